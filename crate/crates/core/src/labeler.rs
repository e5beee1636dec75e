//! Ground-truth stance labels from self-reported profile locations.
//!
//! Pro-independence users name the aspirant nation (`Països Catalans`,
//! `Euskal Herria`); anti-independence users name a city or region together
//! with the recognised state (`Girona, Espanya`). Scotland has no distinct
//! national name, so location evidence must agree with referendum hashtags.
//! Ambiguous users are left unlabelled and can be exported for manual review.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::model::{Dataset, StanceLabel, Territory, TerritoryId, Tweet, UserRecord};
use crate::textfeat::tokenize;

/// A conjunction of terms that must all appear in a location, none of the
/// forbidden terms may appear, and optionally the location must be short.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRule {
    pub required_terms: Vec<String>,
    #[serde(default)]
    pub forbidden_terms: Vec<String>,
    /// Only match locations with at most this many word tokens.
    #[serde(default)]
    pub max_tokens: Option<usize>,
}

impl MatchRule {
    pub fn all_of(terms: &[&str]) -> Self {
        MatchRule {
            required_terms: terms.iter().map(|t| t.to_string()).collect(),
            forbidden_terms: Vec::new(),
            max_tokens: None,
        }
    }

    pub fn matches(&self, location_tokens: &[String]) -> bool {
        if self.required_terms.is_empty() {
            return false;
        }
        if self.max_tokens.is_some_and(|max| location_tokens.len() > max) {
            return false;
        }
        self.required_terms
            .iter()
            .all(|t| contains_term(location_tokens, t))
            && !self
                .forbidden_terms
                .iter()
                .any(|t| contains_term(location_tokens, t))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub territory: Territory,
    pub pi_location_patterns: Vec<MatchRule>,
    pub ai_location_patterns: Vec<MatchRule>,
    /// Whether AI patterns were built as (region or city) AND state term.
    pub ai_requires_conjunction: bool,
    /// Lowercase, without the leading `#`.
    pub yes_hashtags: Vec<String>,
    pub no_hashtags: Vec<String>,
}

/// On-disk rule format. `pi_patterns` entries are either a plain term or a
/// full [`MatchRule`] object.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleFile {
    #[serde(default)]
    pub territory: Option<Territory>,
    pub pi_patterns: Vec<PatternSpec>,
    #[serde(default)]
    pub ai_patterns: Vec<String>,
    #[serde(default)]
    pub cities: Vec<String>,
    #[serde(default)]
    pub state_terms: Vec<String>,
    #[serde(default = "default_true")]
    pub ai_requires_conjunction: bool,
    #[serde(default)]
    pub yes_hashtags: Vec<String>,
    #[serde(default)]
    pub no_hashtags: Vec<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Term(String),
    Rule {
        required: Vec<String>,
        #[serde(default)]
        forbidden: Vec<String>,
        #[serde(default)]
        max_tokens: Option<usize>,
    },
}

impl PatternSpec {
    fn to_rule(&self) -> MatchRule {
        match self {
            PatternSpec::Term(t) => MatchRule::all_of(&[t.as_str()]),
            PatternSpec::Rule {
                required,
                forbidden,
                max_tokens,
            } => MatchRule {
                required_terms: required.clone(),
                forbidden_terms: forbidden.clone(),
                max_tokens: *max_tokens,
            },
        }
    }
}

fn clean_hashtag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

impl RuleFile {
    pub fn into_rules(self, territory: Territory) -> Result<RuleSet> {
        let pi: Vec<MatchRule> = self.pi_patterns.iter().map(PatternSpec::to_rule).collect();
        let places: Vec<&String> = self.ai_patterns.iter().chain(&self.cities).collect();
        let ai: Vec<MatchRule> = if self.ai_requires_conjunction {
            places
                .iter()
                .flat_map(|place| {
                    self.state_terms
                        .iter()
                        .map(move |state| MatchRule::all_of(&[place.as_str(), state.as_str()]))
                })
                .collect()
        } else {
            places.iter().map(|p| MatchRule::all_of(&[p.as_str()])).collect()
        };
        let rules = RuleSet {
            territory,
            pi_location_patterns: pi,
            ai_location_patterns: ai,
            ai_requires_conjunction: self.ai_requires_conjunction,
            yes_hashtags: self.yes_hashtags.iter().map(|t| clean_hashtag(t)).collect(),
            no_hashtags: self.no_hashtags.iter().map(|t| clean_hashtag(t)).collect(),
        };
        rules.validate()?;
        Ok(rules)
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<()> {
        if self.pi_location_patterns.is_empty() || self.ai_location_patterns.is_empty() {
            return Err(Error::InvalidInput(
                "rule set needs both PI and AI location patterns".into(),
            ));
        }
        if let Some(rule) = self
            .pi_location_patterns
            .iter()
            .chain(&self.ai_location_patterns)
            .find(|r| r.required_terms.is_empty())
        {
            return Err(Error::InvalidInput(format!(
                "pattern without required terms: {rule:?}"
            )));
        }
        let yes: BTreeSet<&String> = self.yes_hashtags.iter().collect();
        if let Some(tag) = self.no_hashtags.iter().find(|t| yes.contains(t)) {
            return Err(Error::InvalidInput(format!(
                "hashtag #{tag} is both a yes and a no tag"
            )));
        }
        Ok(())
    }

    pub fn uses_hashtags(&self) -> bool {
        !self.yes_hashtags.is_empty() || !self.no_hashtags.is_empty()
    }

    /// Loads a JSON rule file. The territory comes from the file when present,
    /// otherwise from `territory`.
    pub fn from_file(path: &Path, territory: Option<Territory>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: RuleFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let territory = file
            .territory
            .clone()
            .or(territory)
            .ok_or_else(|| Error::InvalidInput(format!("{}: no territory", path.display())))?;
        file.into_rules(territory)
    }
}

/// Raw JSON of the shipped rule file for a built-in territory.
pub fn builtin_rule_file(id: &TerritoryId) -> Option<&'static str> {
    match id {
        TerritoryId::Catalonia => Some(include_str!("../data/rules/catalonia.json")),
        TerritoryId::BasqueCountry => Some(include_str!("../data/rules/basque_country.json")),
        TerritoryId::Scotland => Some(include_str!("../data/rules/scotland.json")),
        TerritoryId::Custom(_) => None,
    }
}

pub fn builtin_rules(territory: &Territory) -> Result<RuleSet> {
    let text = builtin_rule_file(&territory.id)
        .ok_or_else(|| Error::NoBuiltinRules(territory.id.to_string()))?;
    let file: RuleFile = serde_json::from_str(text).expect("shipped rule files parse");
    file.into_rules(territory.clone())
}

/// Lowercase, NFC-composed, whitespace-collapsed, with surrounding
/// punctuation removed. Diacritics are kept.
pub fn normalize_location(raw: &str) -> String {
    let lowered: String = raw.nfc().collect::<String>().to_lowercase().nfc().collect();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation() || is_unicode_punct(c))
        .to_string()
}

fn is_unicode_punct(c: char) -> bool {
    matches!(c, '¡' | '¿' | '«' | '»' | '·' | '“' | '”' | '‘' | '’' | '…' | '–' | '—')
}

fn word_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Whole-token containment: the term's tokens appear contiguously.
fn contains_term(location_tokens: &[String], term: &str) -> bool {
    let term_tokens = word_tokens(&normalize_location(term));
    if term_tokens.is_empty() || term_tokens.len() > location_tokens.len() {
        return false;
    }
    location_tokens
        .windows(term_tokens.len())
        .any(|w| w == term_tokens.as_slice())
}

fn location_matches(location: &str, rules: &RuleSet) -> (bool, bool) {
    let tokens = word_tokens(&normalize_location(location));
    let pi = rules.pi_location_patterns.iter().any(|r| r.matches(&tokens));
    let ai = rules.ai_location_patterns.iter().any(|r| r.matches(&tokens));
    (pi, ai)
}

/// PI or AI when exactly one side's patterns match; `None` when neither or
/// both do.
pub fn label_by_location(user: &UserRecord, rules: &RuleSet) -> Option<StanceLabel> {
    match location_matches(&user.location, rules) {
        (true, false) => Some(StanceLabel::PI),
        (false, true) => Some(StanceLabel::AI),
        _ => None,
    }
}

/// Majority of yes vs. no hashtag occurrences across the timeline; ties and
/// no evidence give `None`.
pub fn label_by_hashtags(timeline: &[Tweet], rules: &RuleSet) -> Option<StanceLabel> {
    let (mut yes, mut no) = (0usize, 0usize);
    for tweet in timeline {
        for token in tokenize(&tweet.text) {
            if let Some(tag) = token.strip_prefix('#') {
                if rules.yes_hashtags.iter().any(|t| t == tag) {
                    yes += 1;
                } else if rules.no_hashtags.iter().any(|t| t == tag) {
                    no += 1;
                }
            }
        }
    }
    match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Some(StanceLabel::PI),
        std::cmp::Ordering::Less => Some(StanceLabel::AI),
        std::cmp::Ordering::Equal => None,
    }
}

/// Label counts in the layout of a Pro / Anti / Total table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelReport {
    pub territory: String,
    pub pro: usize,
    pub anti: usize,
    pub unlabeled: usize,
    /// Users whose location and hashtags disagree, flagged for review.
    pub conflicts: Vec<String>,
}

impl LabelReport {
    pub fn total(&self) -> usize {
        self.pro + self.anti
    }

    pub fn rows(&self) -> [(&'static str, usize); 3] {
        [
            ("Pro-Independence", self.pro),
            ("Anti-Independence", self.anti),
            ("Total", self.total()),
        ]
    }
}

/// Labels every user that has no label yet and counts the outcome.
/// Existing labels are never changed.
pub fn label_dataset(dataset: &Dataset, rules: &RuleSet) -> (Dataset, LabelReport) {
    let mut out = dataset.clone();
    let mut report = LabelReport {
        territory: dataset.territory.id.to_string(),
        ..Default::default()
    };
    for user in out.users.values_mut() {
        if user.label.is_none() {
            let by_location = label_by_location(user, rules);
            user.label = if rules.uses_hashtags() {
                let by_tags = label_by_hashtags(&user.timeline, rules);
                match (by_location, by_tags) {
                    (Some(l), Some(h)) if l == h => Some(l),
                    (Some(_), Some(_)) => {
                        report.conflicts.push(user.user_id.clone());
                        None
                    }
                    _ => None,
                }
            } else {
                by_location
            };
        }
        match user.label {
            Some(StanceLabel::PI) => report.pro += 1,
            Some(StanceLabel::AI) => report.anti += 1,
            None => report.unlabeled += 1,
        }
    }
    (out, report)
}

/// Writes `user_id,location,label` rows in user-id order for manual audit and
/// returns the number of rows.
pub fn export_for_review(dataset: &Dataset, path: &Path) -> Result<usize> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["user_id", "location", "label"])
        .map_err(|e| csv_error(path, e))?;
    for user in dataset.users.values() {
        let label = user.label.map(StanceLabel::as_str).unwrap_or("");
        w.write_record([user.user_id.as_str(), user.location.as_str(), label])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(dataset.users.len())
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(id: &str, location: &str) -> UserRecord {
        UserRecord::new(id, location)
    }

    fn tweet(text: &str) -> Tweet {
        Tweet {
            tweet_id: "t".into(),
            author_id: "u".into(),
            text: text.into(),
            created_at: 0,
            retweet_of: None,
            reply_to: None,
            mentions: vec![],
            urls: vec![],
            retweet_count: 0,
            favourite_count: 0,
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_location("  Barcelona,  ESPAÑA "), "barcelona, españa");
        assert_eq!(normalize_location(""), "");
        assert_eq!(normalize_location("Euskal   Herria"), "euskal herria");
        // Decomposed "n" + combining tilde composes to a single "ñ".
        assert_eq!(normalize_location("Espan\u{303}a!"), "españa");
    }

    #[test]
    fn builtin_catalonia() {
        let rules = builtin_rules(&Territory::catalonia()).unwrap();
        assert!(!rules.uses_hashtags());
        assert_eq!(label_by_location(&user("a", "Països Catalans"), &rules), Some(StanceLabel::PI));
        assert_eq!(label_by_location(&user("a", "PPCC"), &rules), Some(StanceLabel::PI));
        assert_eq!(label_by_location(&user("a", "Girona, Espanya"), &rules), Some(StanceLabel::AI));
        assert_eq!(label_by_location(&user("a", "Catalunya"), &rules), None);
        assert_eq!(label_by_location(&user("a", "Barcelona"), &rules), None);
        assert_eq!(label_by_location(&user("a", ""), &rules), None);
    }

    #[test]
    fn builtin_basque_acronym_is_token_bound() {
        let rules = builtin_rules(&Territory::basque_country()).unwrap();
        assert_eq!(label_by_location(&user("a", "Euskal Herria"), &rules), Some(StanceLabel::PI));
        assert_eq!(label_by_location(&user("a", "Bilbo, EH"), &rules), Some(StanceLabel::PI));
        assert_eq!(label_by_location(&user("a", "Ehem"), &rules), None);
        assert_eq!(label_by_location(&user("a", "somewhere far away in EH"), &rules), None);
        assert_eq!(
            label_by_location(&user("a", "Donostia-San Sebastián, España"), &rules),
            Some(StanceLabel::AI)
        );
    }

    #[test]
    fn custom_territory_needs_a_rule_file() {
        let mut t = Territory::catalonia();
        t.id = TerritoryId::Custom("Kurdistan".into());
        assert!(matches!(builtin_rules(&t), Err(Error::NoBuiltinRules(_))));
    }

    #[test]
    fn both_sides_matching_abstains_regardless_of_order() {
        let mut rules = builtin_rules(&Territory::catalonia()).unwrap();
        let u = user("a", "Països Catalans, Barcelona, España");
        assert_eq!(label_by_location(&u, &rules), None);
        rules.pi_location_patterns.reverse();
        rules.ai_location_patterns.reverse();
        assert_eq!(label_by_location(&u, &rules), None);
    }

    #[test]
    fn hashtag_majority() {
        let rules = builtin_rules(&Territory::scotland()).unwrap();
        assert_eq!(label_by_hashtags(&[tweet("Off to vote #VoteYes")], &rules), Some(StanceLabel::PI));
        assert_eq!(label_by_hashtags(&[tweet("#VoteYes"), tweet("#voteno")], &rules), None);
        let tl = vec![
            tweet("#BetterTogether"),
            tweet("#BetterTogether #YesScot"),
            tweet("so #bettertogether."),
        ];
        assert_eq!(label_by_hashtags(&tl, &rules), Some(StanceLabel::AI));
        assert_eq!(label_by_hashtags(&[], &rules), None);
    }

    #[test]
    fn scotland_requires_agreement() {
        let rules = builtin_rules(&Territory::scotland()).unwrap();
        let mut d = Dataset::new(Territory::scotland(), 0);
        let mut yes = user("yes", "Scotland");
        yes.timeline.push(tweet("#YesScotland"));
        let mut conflict = user("conflict", "Glasgow, UK");
        conflict.timeline.push(tweet("#VoteYes"));
        let silent = user("silent", "Edinburgh, United Kingdom");
        d.insert(yes);
        d.insert(conflict);
        d.insert(silent);
        let (labeled, report) = label_dataset(&d, &rules);
        assert_eq!(labeled.users["yes"].label, Some(StanceLabel::PI));
        assert_eq!(labeled.users["conflict"].label, None);
        assert_eq!(labeled.users["silent"].label, None);
        assert_eq!(report.conflicts, vec!["conflict".to_string()]);
    }

    #[test]
    fn label_report_counts_and_idempotence() {
        let rules = builtin_rules(&Territory::catalonia()).unwrap();
        let mut d = Dataset::new(Territory::catalonia(), 0);
        d.insert(user("a", "Països Catalans"));
        d.insert(user("b", "Reus, Espanya"));
        d.insert(user("c", ""));
        let (once, report) = label_dataset(&d, &rules);
        assert_eq!((report.pro, report.anti, report.unlabeled), (1, 1, 1));
        assert_eq!(
            report.rows().map(|r| r.0),
            ["Pro-Independence", "Anti-Independence", "Total"]
        );
        let (twice, report2) = label_dataset(&once, &rules);
        assert_eq!(once, twice);
        assert_eq!(report, report2);
    }

    #[test]
    fn manual_labels_are_kept() {
        let rules = builtin_rules(&Territory::catalonia()).unwrap();
        let mut d = Dataset::new(Territory::catalonia(), 0);
        let mut u = user("a", "Països Catalans");
        u.label = Some(StanceLabel::AI);
        d.insert(u);
        let (out, report) = label_dataset(&d, &rules);
        assert_eq!(out.users["a"].label, Some(StanceLabel::AI));
        assert_eq!(report.anti, 1);
    }

    #[test]
    fn unlabelable_dataset() {
        let rules = builtin_rules(&Territory::catalonia()).unwrap();
        let mut d = Dataset::new(Territory::catalonia(), 0);
        for i in 0..4 {
            d.insert(user(&format!("u{i}"), "Madrid"));
        }
        let (_, report) = label_dataset(&d, &rules);
        assert_eq!((report.pro, report.anti, report.unlabeled), (0, 0, 4));
    }

    #[test]
    fn review_export_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("review.csv");
        let mut d = Dataset::new(Territory::catalonia(), 0);
        for id in ["e", "b", "d", "a", "c"] {
            let mut u = user(id, "Vic, Espanya");
            u.label = Some(StanceLabel::AI);
            d.insert(u);
        }
        assert_eq!(export_for_review(&d, &path).unwrap(), 5);
        let text = std::fs::read_to_string(&path).unwrap();
        let ids: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(text.lines().next(), Some("user_id,location,label"));
        assert_eq!(ids, vec!["a", "b", "c", "d", "e"]);

        let empty = Dataset::new(Territory::catalonia(), 0);
        assert_eq!(export_for_review(&empty, &path).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "user_id,location,label\n");
    }

    #[test]
    fn rule_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.json");
        std::fs::write(&path, builtin_rule_file(&TerritoryId::Scotland).unwrap()).unwrap();
        let loaded = RuleSet::from_file(&path, Some(Territory::scotland())).unwrap();
        assert_eq!(loaded, builtin_rules(&Territory::scotland()).unwrap());
        assert!(RuleSet::from_file(&path, None).is_err());
    }

    #[test]
    fn overlapping_hashtags_rejected() {
        let file: RuleFile = serde_json::from_str(
            r##"{"pi_patterns":["x"],"ai_patterns":["y"],"state_terms":["z"],"yes_hashtags":["#A"],"no_hashtags":["a"]}"##,
        )
        .unwrap();
        assert!(file.into_rules(Territory::scotland()).is_err());
    }
}
