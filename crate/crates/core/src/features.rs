//! Feature families for stance classification and the 30 behavioural
//! features compared between groups.
//!
//! Every matrix has one row per dataset user in user-id order, so matrices of
//! different families built from the same dataset line up row for row.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::csv_error;
use crate::model::{Dataset, StanceLabel, Territory, Tweet, UserRecord};
use crate::stats::{self, Direction, TestResult};
use crate::textfeat::{
    embed_text, identify_language, sentiment_score, tokenize, EmbeddingTable, LanguageProfile,
    SentimentClass, SentimentLexicon,
};

/// Default quantile for the interaction and network vocabularies.
pub const DEFAULT_PERCENTILE: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureFamily {
    Timeline,
    Interactions,
    Favourites,
    Network,
    Behavioral,
}

impl FeatureFamily {
    /// The families used for classification, in reporting order.
    pub const CLASSIFIER_FAMILIES: [FeatureFamily; 4] = [
        FeatureFamily::Timeline,
        FeatureFamily::Interactions,
        FeatureFamily::Favourites,
        FeatureFamily::Network,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Timeline => "Timeline",
            FeatureFamily::Interactions => "Interactions",
            FeatureFamily::Favourites => "Favourites",
            FeatureFamily::Network => "Network",
            FeatureFamily::Behavioral => "Behavioral",
        }
    }

    /// Whether every value is 0 or 1.
    pub fn is_binary(self) -> bool {
        self == FeatureFamily::Network
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "timeline" => Ok(FeatureFamily::Timeline),
            "interactions" | "interaction" => Ok(FeatureFamily::Interactions),
            "favourites" | "favorites" | "favourite" | "favorite" => Ok(FeatureFamily::Favourites),
            "network" => Ok(FeatureFamily::Network),
            "behavioral" | "behavioural" => Ok(FeatureFamily::Behavioral),
            other => Err(Error::InvalidInput(format!("unknown feature family '{other}'"))),
        }
    }
}

/// Row-major values. Sparse rows hold `(column, value)` pairs sorted by
/// column with no explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureValues {
    Dense(Vec<f64>),
    Sparse(Vec<Vec<(usize, f64)>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub family: FeatureFamily,
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: FeatureValues,
    /// Aligned with `row_ids`; `None` for unlabelled users.
    pub labels: Vec<Option<StanceLabel>>,
}

impl FeatureMatrix {
    /// Checks row alignment, widths, finiteness and binary network values.
    pub fn new(
        family: FeatureFamily,
        row_ids: Vec<String>,
        columns: Vec<String>,
        values: FeatureValues,
        labels: Vec<Option<StanceLabel>>,
    ) -> Result<Self> {
        let m = FeatureMatrix {
            family,
            row_ids,
            columns,
            values,
            labels,
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let (rows, cols) = (self.row_ids.len(), self.columns.len());
        if self.labels.len() != rows {
            return Err(Error::InvalidInput(format!(
                "{} labels for {rows} rows",
                self.labels.len()
            )));
        }
        let bad_value = |v: f64| !v.is_finite() || (self.family.is_binary() && v != 0.0 && v != 1.0);
        match &self.values {
            FeatureValues::Dense(v) => {
                if v.len() != rows * cols {
                    return Err(Error::WidthMismatch {
                        expected: rows * cols,
                        found: v.len(),
                    });
                }
                if let Some(x) = v.iter().find(|x| bad_value(**x)) {
                    return Err(Error::InvalidInput(format!("invalid {} value {x}", self.family)));
                }
            }
            FeatureValues::Sparse(r) => {
                if r.len() != rows {
                    return Err(Error::InvalidInput(format!("{} sparse rows for {rows} ids", r.len())));
                }
                for row in r {
                    if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                        return Err(Error::InvalidInput("sparse row columns not increasing".into()));
                    }
                    if let Some(&(c, x)) = row.iter().find(|(c, x)| *c >= cols || bad_value(*x)) {
                        return Err(Error::InvalidInput(format!("invalid sparse entry ({c}, {x})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.values, FeatureValues::Sparse(_))
    }

    /// Non-zero `(column, value)` pairs of a row in column order.
    pub fn nonzeros(&self, row: usize) -> Vec<(usize, f64)> {
        match &self.values {
            FeatureValues::Dense(v) => {
                let d = self.n_cols();
                v[row * d..(row + 1) * d]
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x != 0.0)
                    .map(|(c, x)| (c, *x))
                    .collect()
            }
            FeatureValues::Sparse(r) => r[row].clone(),
        }
    }

    pub fn dense_row(&self, row: usize) -> Vec<f64> {
        let d = self.n_cols();
        match &self.values {
            FeatureValues::Dense(v) => v[row * d..(row + 1) * d].to_vec(),
            FeatureValues::Sparse(r) => {
                let mut out = vec![0.0; d];
                for &(c, x) in &r[row] {
                    out[c] = x;
                }
                out
            }
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match &self.values {
            FeatureValues::Dense(v) => v[row * self.n_cols() + col],
            FeatureValues::Sparse(r) => r[row]
                .binary_search_by_key(&col, |(c, _)| *c)
                .map_or(0.0, |i| r[row][i].1),
        }
    }

    /// Copy restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let d = self.n_cols();
        let values = match &self.values {
            FeatureValues::Dense(v) => FeatureValues::Dense(
                rows.iter()
                    .flat_map(|&r| v[r * d..(r + 1) * d].iter().copied())
                    .collect(),
            ),
            FeatureValues::Sparse(s) => FeatureValues::Sparse(rows.iter().map(|&r| s[r].clone()).collect()),
        };
        FeatureMatrix {
            family: self.family,
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            columns: self.columns.clone(),
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Rows that carry a label, with the labels unwrapped.
    pub fn labeled_subset(&self) -> (FeatureMatrix, Vec<StanceLabel>) {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&r| self.labels[r].is_some()).collect();
        let labels = rows.iter().map(|&r| self.labels[r].unwrap()).collect();
        (self.select_rows(&rows), labels)
    }

    /// Values of one column over all rows.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }
}

fn all_rows(dataset: &Dataset) -> (Vec<String>, Vec<Option<StanceLabel>>) {
    dataset
        .users
        .values()
        .map(|u| (u.user_id.clone(), u.label))
        .unzip()
}

fn embedding_family(
    dataset: &Dataset,
    table: &EmbeddingTable,
    family: FeatureFamily,
    tweets: fn(&UserRecord) -> &[Tweet],
) -> Result<FeatureMatrix> {
    let d = table.dimension;
    let users: Vec<&UserRecord> = dataset.users.values().collect();
    let rows: Vec<Vec<f64>> = users
        .par_iter()
        .map(|u| {
            let tweets = tweets(u);
            let mut acc = vec![0.0; d];
            if tweets.is_empty() {
                return acc;
            }
            for t in tweets {
                for (a, x) in acc.iter_mut().zip(embed_text(&tokenize(&t.text), table)) {
                    *a += x;
                }
            }
            let n = tweets.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        })
        .collect();
    let (row_ids, labels) = all_rows(dataset);
    let columns = (0..d).map(|i| format!("dim{i}")).collect();
    FeatureMatrix::new(family, row_ids, columns, FeatureValues::Dense(rows.concat()), labels)
}

/// Mean over each user's timeline of the tweet embeddings; zero rows for
/// empty timelines.
pub fn timeline_features(dataset: &Dataset, table: &EmbeddingTable) -> Result<FeatureMatrix> {
    embedding_family(dataset, table, FeatureFamily::Timeline, |u| &u.timeline)
}

/// As [`timeline_features`] over favourited tweets.
pub fn favourite_features(dataset: &Dataset, table: &EmbeddingTable) -> Result<FeatureMatrix> {
    embedding_family(dataset, table, FeatureFamily::Favourites, |u| &u.favourites)
}

/// Every interaction target of a user, one entry per interaction: retweets,
/// replies and mentions in the timeline, and authors of favourited tweets.
/// Self-interactions are skipped.
pub fn interaction_targets(user: &UserRecord) -> Vec<&str> {
    let mut out = Vec::new();
    for t in &user.timeline {
        out.extend(t.retweet_of.as_deref());
        out.extend(t.reply_to.as_deref());
        out.extend(t.mentions.iter().map(String::as_str));
    }
    out.extend(user.favourites.iter().map(|f| f.author_id.as_str()));
    out.retain(|t| *t != user.user_id && !t.is_empty());
    out
}

/// Followees and followers of a user, deduplicated.
pub fn network_members(user: &UserRecord) -> BTreeSet<&str> {
    user.followees
        .iter()
        .chain(&user.followers)
        .map(String::as_str)
        .filter(|m| *m != user.user_id)
        .collect()
}

fn vocabulary<'a>(
    per_user: impl Iterator<Item = Vec<&'a str>>,
    q: f64,
) -> Vec<String> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for targets in per_user {
        for t in targets {
            *counts.entry(t).or_default() += 1;
        }
    }
    stats::percentile_cutoff(counts, q)
        .into_iter()
        .map(str::to_string)
        .collect()
}

fn check_quantile(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("percentile {q} outside [0, 1]")));
    }
    Ok(())
}

/// Interaction-target vocabulary over the users in `scope` (all users when
/// `None`): targets whose total count reaches the `q` quantile.
pub fn interaction_vocabulary(dataset: &Dataset, q: f64, scope: Option<&BTreeSet<String>>) -> Result<Vec<String>> {
    check_quantile(q)?;
    let vocab = vocabulary(
        dataset
            .users
            .values()
            .filter(|u| scope.is_none_or(|s| s.contains(&u.user_id)))
            .map(interaction_targets),
        q,
    );
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary("dataset has no interactions".into()));
    }
    Ok(vocab)
}

/// Network vocabulary: users whose appearances in followee or follower
/// lists reach the `q` quantile.
pub fn network_vocabulary(dataset: &Dataset, q: f64, scope: Option<&BTreeSet<String>>) -> Result<Vec<String>> {
    check_quantile(q)?;
    let vocab = vocabulary(
        dataset
            .users
            .values()
            .filter(|u| scope.is_none_or(|s| s.contains(&u.user_id)))
            .map(|u| network_members(u).into_iter().collect()),
        q,
    );
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary("dataset has no follow relations".into()));
    }
    Ok(vocab)
}

fn sparse_family(
    dataset: &Dataset,
    family: FeatureFamily,
    vocab: Vec<String>,
    cells: impl Fn(&UserRecord) -> BTreeMap<&str, f64> + Sync,
) -> Result<FeatureMatrix> {
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let users: Vec<&UserRecord> = dataset.users.values().collect();
    let rows: Vec<Vec<(usize, f64)>> = users
        .par_iter()
        .map(|u| {
            let mut row: Vec<(usize, f64)> = cells(u)
                .into_iter()
                .filter_map(|(t, x)| index.get(t).map(|&c| (c, x)))
                .collect();
            row.sort_unstable_by_key(|(c, _)| *c);
            row
        })
        .collect();
    let (row_ids, labels) = all_rows(dataset);
    FeatureMatrix::new(family, row_ids, vocab, FeatureValues::Sparse(rows), labels)
}

/// Interaction counts against a fixed target vocabulary.
pub fn interaction_features_with_vocabulary(dataset: &Dataset, vocab: Vec<String>) -> Result<FeatureMatrix> {
    sparse_family(dataset, FeatureFamily::Interactions, vocab, |u| {
        let mut counts = BTreeMap::new();
        for t in interaction_targets(u) {
            *counts.entry(t).or_insert(0.0) += 1.0;
        }
        counts
    })
}

/// Per-user interaction counts with every target in the global `q`-quantile
/// vocabulary.
pub fn interaction_features(dataset: &Dataset, q: f64) -> Result<FeatureMatrix> {
    interaction_features_with_vocabulary(dataset, interaction_vocabulary(dataset, q, None)?)
}

/// Network membership against a fixed vocabulary.
pub fn network_features_with_vocabulary(dataset: &Dataset, vocab: Vec<String>) -> Result<FeatureMatrix> {
    sparse_family(dataset, FeatureFamily::Network, vocab, |u| {
        network_members(u).into_iter().map(|m| (m, 1.0)).collect()
    })
}

/// 1 where the column user is among the row user's followees or followers.
pub fn network_features(dataset: &Dataset, q: f64) -> Result<FeatureMatrix> {
    network_features_with_vocabulary(dataset, network_vocabulary(dataset, q, None)?)
}

/// Builds one classifier family with the global vocabulary.
pub fn family_features(
    dataset: &Dataset,
    family: FeatureFamily,
    table: Option<&EmbeddingTable>,
    q: f64,
) -> Result<FeatureMatrix> {
    let need_table = || table.ok_or_else(|| Error::InvalidInput(format!("{family} features need embeddings")));
    match family {
        FeatureFamily::Timeline => timeline_features(dataset, need_table()?),
        FeatureFamily::Favourites => favourite_features(dataset, need_table()?),
        FeatureFamily::Interactions => interaction_features(dataset, q),
        FeatureFamily::Network => network_features(dataset, q),
        FeatureFamily::Behavioral => Err(Error::InvalidInput(
            "behavioral features are built with behavioral_features".into(),
        )),
    }
}

pub const BEHAVIORAL_FEATURE_COUNT: usize = 30;

/// Column names of the behavioural features, #1 to #30.
pub const BEHAVIORAL_FEATURES: [&str; BEHAVIORAL_FEATURE_COUNT] = [
    "tweet_count",
    "favourite_count",
    "tweets_per_day",
    "account_age_days",
    "retweets_received",
    "favourites_received",
    "local_tld_urls",
    "state_tld_urls",
    "followers",
    "followees",
    "verified",
    "geo_enabled",
    "profile_url_local_tld",
    "profile_url_state_tld",
    "ui_language_local",
    "ui_language_state",
    "interactions_within",
    "interactions_across",
    "favouriting_within",
    "favouriting_across",
    "mentions_within",
    "mentions_across",
    "retweets_within",
    "retweets_across",
    "listed_count",
    "follows_within",
    "follows_across",
    "tweets_local_language",
    "positive_within",
    "negative_across",
];

/// Which interaction kinds a within/across count includes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionKinds {
    pub retweets: bool,
    pub replies: bool,
    pub mentions: bool,
    pub favourites: bool,
}

impl InteractionKinds {
    pub const REPLIES: InteractionKinds = InteractionKinds {
        retweets: false,
        replies: true,
        mentions: false,
        favourites: false,
    };

    pub const TWEETED: InteractionKinds = InteractionKinds {
        retweets: true,
        replies: true,
        mentions: true,
        favourites: false,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehavioralConfig {
    /// Kinds counted by features #17 and #18. Replies only by default, since
    /// the other kinds have their own rows.
    pub interaction_kinds: InteractionKinds,
    /// Interaction tweets whose sentiment feeds #29 and #30.
    pub sentiment_kinds: InteractionKinds,
}

impl Default for BehavioralConfig {
    fn default() -> Self {
        BehavioralConfig {
            interaction_kinds: InteractionKinds::REPLIES,
            sentiment_kinds: InteractionKinds::TWEETED,
        }
    }
}

/// Language profiles and polarity lexicons for the linguistic features.
/// Lexicons are merged; later ones win on shared tokens.
#[derive(Clone, Debug, Default)]
pub struct TextResources {
    pub profiles: Vec<LanguageProfile>,
    pub lexicons: Vec<SentimentLexicon>,
}

impl TextResources {
    fn merged_lexicon(&self) -> Option<SentimentLexicon> {
        if self.lexicons.is_empty() {
            return None;
        }
        let mut polarity = BTreeMap::new();
        for lex in &self.lexicons {
            polarity.extend(lex.polarity.iter().map(|(k, v)| (k.clone(), *v)));
        }
        Some(SentimentLexicon {
            language: "mixed".into(),
            polarity,
        })
    }
}

/// Per feature, the number of users for whom the input was missing and the
/// value defaulted to 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub users: usize,
    pub missing: Vec<usize>,
}

impl Coverage {
    /// Share of users with real data for feature `i` (0-based).
    pub fn fraction(&self, i: usize) -> f64 {
        if self.users == 0 {
            return 0.0;
        }
        1.0 - self.missing[i] as f64 / self.users as f64
    }
}

const DAY: f64 = 86_400.0;

/// Last dot-suffix of the URL's host, with the dot, lowercased.
pub fn url_tld(raw: &str) -> Option<String> {
    let raw = raw.trim();
    let parsed = url::Url::parse(raw).or_else(|_| url::Url::parse(&format!("http://{raw}")));
    let host = parsed.ok()?.host_str()?.trim_end_matches('.').to_ascii_lowercase();
    let dot = host.rfind('.')?;
    let tld = &host[dot..];
    (tld.len() > 1).then(|| tld.to_string())
}

fn same_language(code: &str, set: &[String]) -> bool {
    set.iter().any(|s| s.eq_ignore_ascii_case(code.trim()))
}

struct Extractor<'a> {
    dataset: &'a Dataset,
    territory: &'a Territory,
    config: &'a BehavioralConfig,
    profiles: &'a [LanguageProfile],
    lexicon: Option<&'a SentimentLexicon>,
}

impl Extractor<'_> {
    fn tweet_targets<'t>(&self, tweet: &'t Tweet, kinds: InteractionKinds) -> Vec<&'t str> {
        let mut out = Vec::new();
        if kinds.retweets {
            out.extend(tweet.retweet_of.as_deref());
        }
        if kinds.replies {
            out.extend(tweet.reply_to.as_deref());
        }
        if kinds.mentions {
            out.extend(tweet.mentions.iter().map(String::as_str));
        }
        out
    }

    /// Adds one to `within` or `across` depending on the target's label.
    fn tally(&self, own: Option<StanceLabel>, user: &str, target: &str, within: &mut f64, across: &mut f64) {
        if target == user {
            return;
        }
        if let (Some(own), Some(other)) = (own, self.dataset.label_of(target)) {
            if own == other {
                *within += 1.0;
            } else {
                *across += 1.0;
            }
        }
    }

    fn row(&self, u: &UserRecord) -> ([f64; BEHAVIORAL_FEATURE_COUNT], [bool; BEHAVIORAL_FEATURE_COUNT]) {
        let mut f = [0.0; BEHAVIORAL_FEATURE_COUNT];
        let mut missing = [false; BEHAVIORAL_FEATURE_COUNT];
        let t = self.territory;
        let own = u.label;
        let id = u.user_id.as_str();

        f[0] = u.timeline.len() as f64;
        f[1] = u.favourites.len() as f64;
        match u.timeline.iter().map(|t| t.created_at).min() {
            Some(first) => {
                let days = ((self.dataset.reference_time - first) as f64 / DAY).max(1.0);
                f[2] = f[0] / days;
            }
            None => missing[2] = true,
        }
        f[3] = ((self.dataset.reference_time - u.created_at) as f64 / DAY).max(0.0);
        for tweet in u.timeline.iter().filter(|t| t.retweet_of.is_none()) {
            f[4] += tweet.retweet_count as f64;
            f[5] += tweet.favourite_count as f64;
        }
        for tld in u.timeline.iter().flat_map(|t| &t.urls).filter_map(|x| url_tld(x)) {
            if tld.eq_ignore_ascii_case(&t.local_tld) {
                f[6] += 1.0;
            } else if tld.eq_ignore_ascii_case(&t.state_tld) {
                f[7] += 1.0;
            }
        }
        f[8] = u.followers_count as f64;
        f[9] = u.followees_count as f64;
        f[10] = u.verified as u8 as f64;
        f[11] = u.geo_enabled as u8 as f64;
        match u.profile_url.as_deref().and_then(url_tld) {
            Some(tld) => {
                f[12] = tld.eq_ignore_ascii_case(&t.local_tld) as u8 as f64;
                f[13] = tld.eq_ignore_ascii_case(&t.state_tld) as u8 as f64;
            }
            None => {
                missing[12] = true;
                missing[13] = true;
            }
        }
        if u.ui_language.trim().is_empty() {
            missing[14] = true;
            missing[15] = true;
        } else {
            f[14] = same_language(&u.ui_language, &t.local_languages) as u8 as f64;
            f[15] = same_language(&u.ui_language, &t.state_languages) as u8 as f64;
        }

        let (mut w, mut a) = (0.0, 0.0);
        for tweet in &u.timeline {
            for target in self.tweet_targets(tweet, self.config.interaction_kinds) {
                self.tally(own, id, target, &mut w, &mut a);
            }
        }
        if self.config.interaction_kinds.favourites {
            for fav in &u.favourites {
                self.tally(own, id, &fav.author_id, &mut w, &mut a);
            }
        }
        (f[16], f[17]) = (w, a);
        let (mut w, mut a) = (0.0, 0.0);
        for fav in &u.favourites {
            self.tally(own, id, &fav.author_id, &mut w, &mut a);
        }
        (f[18], f[19]) = (w, a);
        let (mut w, mut a) = (0.0, 0.0);
        for m in u.timeline.iter().flat_map(|t| &t.mentions) {
            self.tally(own, id, m, &mut w, &mut a);
        }
        (f[20], f[21]) = (w, a);
        let (mut w, mut a) = (0.0, 0.0);
        for r in u.timeline.iter().filter_map(|t| t.retweet_of.as_deref()) {
            self.tally(own, id, r, &mut w, &mut a);
        }
        (f[22], f[23]) = (w, a);
        f[24] = u.listed_count as f64;
        let (mut w, mut a) = (0.0, 0.0);
        for followee in &u.followees {
            self.tally(own, id, followee, &mut w, &mut a);
        }
        (f[25], f[26]) = (w, a);

        if self.profiles.is_empty() {
            missing[27] = true;
        } else {
            let own_langs = t.own_tweet_languages();
            f[27] = u
                .timeline
                .iter()
                .filter(|tw| {
                    identify_language(&tw.text, self.profiles)
                        .is_ok_and(|code| same_language(&code, own_langs))
                })
                .count() as f64;
        }

        match (self.lexicon, own) {
            (Some(lex), Some(own)) => {
                for tweet in &u.timeline {
                    let targets: BTreeSet<&str> = self
                        .tweet_targets(tweet, self.config.sentiment_kinds)
                        .into_iter()
                        .filter(|x| *x != id)
                        .collect();
                    if targets.is_empty() {
                        continue;
                    }
                    let (_, class) = sentiment_score(&tokenize(&tweet.text), lex);
                    for target in targets {
                        match (self.dataset.label_of(target), class) {
                            (Some(l), SentimentClass::Positive) if l == own => f[28] += 1.0,
                            (Some(l), SentimentClass::Negative) if l != own => f[29] += 1.0,
                            _ => {}
                        }
                    }
                }
            }
            (None, _) => {
                missing[28] = true;
                missing[29] = true;
            }
            (Some(_), None) => {}
        }
        (f, missing)
    }
}

/// The 30 behavioural features for every user, plus per-feature coverage.
/// Within/across counts compare the user's own label with the label of each
/// target; unlabelled users and unlabelled targets contribute nothing.
pub fn behavioral_features(
    dataset: &Dataset,
    territory: &Territory,
    resources: &TextResources,
    config: &BehavioralConfig,
) -> Result<(FeatureMatrix, Coverage)> {
    let lexicon = resources.merged_lexicon();
    let ex = Extractor {
        dataset,
        territory,
        config,
        profiles: &resources.profiles,
        lexicon: lexicon.as_ref(),
    };
    let users: Vec<&UserRecord> = dataset.users.values().collect();
    let rows: Vec<_> = users.par_iter().map(|u| ex.row(u)).collect();
    let mut coverage = Coverage {
        users: rows.len(),
        missing: vec![0; BEHAVIORAL_FEATURE_COUNT],
    };
    let mut values = Vec::with_capacity(rows.len() * BEHAVIORAL_FEATURE_COUNT);
    for (f, missing) in rows {
        values.extend_from_slice(&f);
        for (c, m) in coverage.missing.iter_mut().zip(missing) {
            *c += m as usize;
        }
    }
    let (row_ids, labels) = all_rows(dataset);
    let columns = BEHAVIORAL_FEATURES.iter().map(|s| s.to_string()).collect();
    let m = FeatureMatrix::new(FeatureFamily::Behavioral, row_ids, columns, FeatureValues::Dense(values), labels)?;
    Ok((m, coverage))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureComparison {
    /// 1-based feature number.
    pub feature_id: usize,
    pub name: String,
    pub result: TestResult,
}

impl FeatureComparison {
    /// "PI", "AI" or "" for the group with the larger mean.
    pub fn direction_label(&self) -> &'static str {
        match self.result.direction {
            Direction::GroupA => StanceLabel::PI.as_str(),
            Direction::GroupB => StanceLabel::AI.as_str(),
            Direction::None => "",
        }
    }
}

/// Welch's t-test of PI against AI for every column, in column order.
pub fn group_comparison_report(matrix: &FeatureMatrix) -> Result<Vec<FeatureComparison>> {
    if matrix.family == FeatureFamily::Behavioral && matrix.n_cols() != BEHAVIORAL_FEATURE_COUNT {
        return Err(Error::WidthMismatch {
            expected: BEHAVIORAL_FEATURE_COUNT,
            found: matrix.n_cols(),
        });
    }
    let pi: Vec<usize> = (0..matrix.n_rows()).filter(|&r| matrix.labels[r] == Some(StanceLabel::PI)).collect();
    let ai: Vec<usize> = (0..matrix.n_rows()).filter(|&r| matrix.labels[r] == Some(StanceLabel::AI)).collect();
    if pi.is_empty() || ai.is_empty() {
        return Err(Error::SingleClass);
    }
    if pi.len() < 2 || ai.len() < 2 {
        return Err(Error::SampleTooSmall(format!(
            "{} PI and {} AI rows; each group needs at least 2",
            pi.len(),
            ai.len()
        )));
    }
    (0..matrix.n_cols())
        .map(|c| {
            let a: Vec<f64> = pi.iter().map(|&r| matrix.get(r, c)).collect();
            let b: Vec<f64> = ai.iter().map(|&r| matrix.get(r, c)).collect();
            Ok(FeatureComparison {
                feature_id: c + 1,
                name: matrix.columns[c].clone(),
                result: stats::welch_t_test(&a, &b)?,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    family: FeatureFamily,
    storage: String,
    n_rows: usize,
    row_ids: Vec<String>,
    columns: Vec<String>,
    labels: Vec<Option<StanceLabel>>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes values to `path` (dense: `user_id,<columns>`; sparse:
/// `row,col,value` triplets) and the row, column and label descriptors to a
/// JSON file beside it.
pub fn save_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    match &matrix.values {
        FeatureValues::Dense(_) => {
            let mut header = vec!["user_id".to_string()];
            header.extend(matrix.columns.iter().cloned());
            w.write_record(&header).map_err(|e| csv_error(path, e))?;
            for r in 0..matrix.n_rows() {
                let mut rec = vec![matrix.row_ids[r].clone()];
                rec.extend(matrix.dense_row(r).iter().map(|x| x.to_string()));
                w.write_record(&rec).map_err(|e| csv_error(path, e))?;
            }
        }
        FeatureValues::Sparse(rows) => {
            w.write_record(["row", "col", "value"]).map_err(|e| csv_error(path, e))?;
            for (r, row) in rows.iter().enumerate() {
                for (c, x) in row {
                    w.write_record([r.to_string(), c.to_string(), x.to_string()])
                        .map_err(|e| csv_error(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    let sidecar = Sidecar {
        version: 1,
        family: matrix.family,
        storage: if matrix.is_sparse() { "sparse" } else { "dense" }.into(),
        n_rows: matrix.n_rows(),
        row_ids: matrix.row_ids.clone(),
        columns: matrix.columns.clone(),
        labels: matrix.labels.clone(),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises");
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn load_matrix(path: &Path) -> Result<FeatureMatrix> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: side.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let d = meta.columns.len();
    let values = match meta.storage.as_str() {
        "dense" => {
            let mut v = Vec::with_capacity(meta.n_rows * d);
            for (i, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| csv_error(path, e))?;
                if rec.len() != d + 1 {
                    return Err(parse_err(i + 2, format!("expected {} fields, found {}", d + 1, rec.len())));
                }
                for field in rec.iter().skip(1) {
                    v.push(field.parse::<f64>().map_err(|e| parse_err(i + 2, e.to_string()))?);
                }
            }
            FeatureValues::Dense(v)
        }
        "sparse" => {
            let mut rows = vec![Vec::new(); meta.n_rows];
            for (i, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| csv_error(path, e))?;
                let field = |k: usize| rec.get(k).ok_or_else(|| parse_err(i + 2, "missing field".into()));
                let r: usize = field(0)?.parse().map_err(|e| parse_err(i + 2, format!("{e}")))?;
                let c: usize = field(1)?.parse().map_err(|e| parse_err(i + 2, format!("{e}")))?;
                let x: f64 = field(2)?.parse().map_err(|e| parse_err(i + 2, format!("{e}")))?;
                rows.get_mut(r)
                    .ok_or_else(|| parse_err(i + 2, format!("row {r} out of range")))?
                    .push((c, x));
            }
            FeatureValues::Sparse(rows)
        }
        other => return Err(Error::UnknownFormat(other.to_string())),
    };
    FeatureMatrix::new(meta.family, meta.row_ids, meta.columns, values, meta.labels)
}
