//! Synthetic labelled datasets with planted homophily and planted group
//! differences, so the whole pipeline runs without collected data.
//!
//! The follow graph is a planted partition: each undirected tie picks a
//! source uniformly, then a target inside the source's group with
//! probability `homophily`. The source follows the target and the target
//! follows back with its group's reciprocity. Users also follow popular
//! external accounts that lean towards one side.
//!
//! PI users are planted higher than AI users on every behavioural feature
//! except #8, #14 and #16 (state TLD URLs, state-TLD profile URL, state
//! interface language). The within/across directions rely on equal group
//! sizes; with unbalanced groups the across-group counts may flip.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BEHAVIORAL_FEATURE_COUNT;
use crate::ingest::{self, Manifest};
use crate::model::{Dataset, StanceLabel, Territory, Tweet, UserRecord, MAX_TWEETS};
use crate::stats::Direction;
use crate::textfeat::{self, LanguageProfile, SentimentLexicon};

pub const PROFILES_FILE: &str = "profiles.tsv";
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const PROVENANCE_FILE: &str = "synth_config.json";

const DAY: i64 = 86_400;
const TWEET_WINDOW_DAYS: i64 = 60;
/// Seed of the fixed synthetic vocabularies, independent of `seed`.
const LANGUAGE_SEED: u64 = 0x5eed_1a9e;
const WORDS_PER_LANGUAGE: usize = 150;
const SENTIMENT_TOKENS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub pi_fraction: f64,
    /// Probability that a tie stays inside the source's group.
    pub homophily: f64,
    pub mean_degree: f64,
    pub tweets_per_user: usize,
    pub token_vocab_per_group: usize,
    /// Share of each group's topic vocabulary that the groups have in common.
    pub token_overlap: f64,
    pub seed: u64,

    pub territory: Territory,
    pub reference_time: i64,
    /// Follow-back probability for targets in each group, PI first.
    pub reciprocity: [f64; 2],
    /// Multiplier on PI activity rates (tweets, favourites, engagement).
    pub pi_activity: f64,
    pub favourites_per_user: usize,
    pub n_external: usize,
    /// Mean number of external accounts each user follows.
    pub external_follows: f64,
    /// Probability that an external follow goes to the user's own side;
    /// defaults to `homophily`.
    pub external_homophily: Option<f64>,
    pub topic_tokens_per_tweet: usize,
    pub language_words_per_tweet: usize,
    /// Chance that a timeline tweet retweets, replies to or mentions a followee.
    pub interaction_rate: f64,
    /// Chance that a tweet is in the nation's own language, PI first.
    pub local_language_share: [f64; 2],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 1000,
            pi_fraction: 0.5,
            homophily: 0.8,
            mean_degree: 20.0,
            tweets_per_user: 20,
            token_vocab_per_group: 200,
            token_overlap: 0.95,
            seed: 0,
            territory: Territory::catalonia(),
            reference_time: 1_500_000_000,
            reciprocity: [0.5, 0.2],
            pi_activity: 1.3,
            favourites_per_user: 10,
            n_external: 100,
            external_follows: 20.0,
            external_homophily: None,
            topic_tokens_per_tweet: 4,
            language_words_per_tweet: 6,
            interaction_rate: 0.4,
            local_language_share: [0.40, 0.30],
        }
    }
}

fn unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 2 {
            return Err(Error::InvalidInput(format!("n_users = {}; at least 2 required", self.n_users)));
        }
        if !(self.pi_fraction > 0.0 && self.pi_fraction < 1.0) {
            return Err(Error::InvalidInput(format!("pi_fraction = {} outside (0, 1)", self.pi_fraction)));
        }
        let n_pi = self.n_pi();
        if n_pi == 0 || n_pi == self.n_users {
            return Err(Error::InvalidInput("both groups must be non-empty".into()));
        }
        unit("homophily", self.homophily)?;
        unit("token_overlap", self.token_overlap)?;
        unit("interaction_rate", self.interaction_rate)?;
        for x in self.reciprocity.iter().chain(&self.local_language_share) {
            unit("probability", *x)?;
        }
        if let Some(h) = self.external_homophily {
            unit("external_homophily", h)?;
        }
        if !(self.mean_degree > 0.0) || !self.mean_degree.is_finite() {
            return Err(Error::InvalidInput(format!("mean_degree = {}", self.mean_degree)));
        }
        if self.mean_degree > (self.n_users - 1) as f64 {
            return Err(Error::Infeasible(format!(
                "mean_degree {} exceeds n_users - 1 = {}",
                self.mean_degree,
                self.n_users - 1
            )));
        }
        if !(self.pi_activity > 0.0) || !(self.external_follows >= 0.0) {
            return Err(Error::InvalidInput("activity rates must be positive".into()));
        }
        if self.n_external == 1 {
            return Err(Error::InvalidInput("n_external must be 0 or at least 2".into()));
        }
        if self.token_vocab_per_group == 0 || self.tweets_per_user > MAX_TWEETS {
            return Err(Error::InvalidInput("token vocabulary must be non-empty and tweets_per_user <= 500".into()));
        }
        let problems = self.territory.problems();
        if !problems.is_empty() {
            return Err(Error::InvalidInput(problems.join("; ")));
        }
        Ok(())
    }

    /// Number of PI users: `round(pi_fraction * n_users)`.
    pub fn n_pi(&self) -> usize {
        (self.pi_fraction * self.n_users as f64).round() as usize
    }
}

/// Expected symmetric assortativity of the generated follow graph, ignoring
/// rejected duplicate ties.
pub fn expected_assortativity(homophily: f64, pi_fraction: f64, reciprocity: [f64; 2]) -> f64 {
    let (h, p) = (homophily, pi_fraction);
    let [rp, ra] = reciprocity;
    let within_pi = p * h * (1.0 + rp);
    let within_ai = (1.0 - p) * h * (1.0 + ra);
    let across = p * (1.0 - h) * (1.0 + ra) + (1.0 - p) * (1.0 - h) * (1.0 + rp);
    let total = within_pi + within_ai + across;
    let a_pi = (within_pi + across / 2.0) / total;
    let a_ai = (within_ai + across / 2.0) / total;
    let baseline = a_pi * a_pi + a_ai * a_ai;
    ((within_pi + within_ai) / total - baseline) / (1.0 - baseline)
}

/// Homophily giving `target` expected assortativity, found by bisection.
pub fn calibrate_homophily(target: f64, pi_fraction: f64, reciprocity: [f64; 2]) -> Result<f64> {
    let r = |h| expected_assortativity(h, pi_fraction, reciprocity);
    if !(r(0.0)..=r(1.0)).contains(&target) {
        return Err(Error::Infeasible(format!(
            "assortativity {target} outside the reachable range [{:.3}, 1]",
            r(0.0)
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = (lo + hi) / 2.0;
        if r(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// Group with the larger planted mean for each behavioural feature.
pub fn planted_directions() -> [Direction; BEHAVIORAL_FEATURE_COUNT] {
    let mut d = [Direction::GroupA; BEHAVIORAL_FEATURE_COUNT];
    for i in [7, 13, 15] {
        d[i] = Direction::GroupB;
    }
    d
}

/// Tweet-language codes of the nation and of the state.
pub fn language_codes(territory: &Territory) -> (String, String) {
    let local = territory
        .own_tweet_languages()
        .first()
        .cloned()
        .unwrap_or_else(|| "loc".into());
    let state = territory
        .state_languages
        .first()
        .map(|s| s.split('-').next().unwrap_or(s).to_string())
        .filter(|s| *s != local)
        .unwrap_or_else(|| "sta".into());
    (local, state)
}

fn make_words(consonants: &[char], vowels: &[char], seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = BTreeSet::new();
    while words.len() < WORDS_PER_LANGUAGE {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .flat_map(|_| [*consonants.choose(&mut rng).unwrap(), *vowels.choose(&mut rng).unwrap()])
            .collect();
        words.insert(w);
    }
    words.into_iter().collect()
}

/// Word lists of the nation's and the state's synthetic languages.
fn languages() -> [Vec<String>; 2] {
    [
        make_words(&['k', 't', 'x', 'z', 'b'], &['a', 'e', 'u'], LANGUAGE_SEED),
        make_words(&['l', 'm', 'n', 'r', 's', 'p'], &['o', 'i', 'a'], LANGUAGE_SEED + 1),
    ]
}

fn sentence(words: &[String], n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    (0..n).map(|_| words.choose(rng).unwrap().clone()).collect()
}

/// Language profiles and polarity lexicon matching the generated text.
pub fn text_resources(territory: &Territory) -> (Vec<LanguageProfile>, SentimentLexicon) {
    let (local, state) = language_codes(territory);
    let mut rng = ChaCha8Rng::seed_from_u64(LANGUAGE_SEED + 2);
    let profiles = languages()
        .iter()
        .zip([local, state])
        .map(|(words, code)| {
            let texts: Vec<String> = (0..400).map(|_| sentence(words, 8, &mut rng).join(" ")).collect();
            LanguageProfile::train(&code, texts.iter().map(String::as_str))
        })
        .collect();
    let entries = (0..SENTIMENT_TOKENS).flat_map(|i| [(format!("pos{i}"), 1.0), (format!("neg{i}"), -1.0)]);
    let lexicon = SentimentLexicon::new("any", entries).expect("polarities within range");
    (profiles, lexicon)
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    languages: [Vec<String>; 2],
    /// Topic tokens per group, PI first.
    topics: [Vec<String>; 2],
}

impl Generator<'_> {
    fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).expect("positive mean").sample(&mut self.rng) as u64
    }

    fn activity(&self, g: usize) -> f64 {
        if g == StanceLabel::PI.index() {
            self.cfg.pi_activity
        } else {
            1.0
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p.clamp(0.0, 1.0))
    }

    fn tweet_text(&mut self, g: usize, sentiment: Option<bool>) -> String {
        let local = self.chance(self.cfg.local_language_share[g]);
        let lang = if local { 0 } else { 1 };
        let mut tokens = sentence(&self.languages[lang], self.cfg.language_words_per_tweet, &mut self.rng);
        for _ in 0..self.cfg.topic_tokens_per_tweet {
            tokens.push(self.topics[g].choose(&mut self.rng).unwrap().clone());
        }
        if let Some(positive) = sentiment {
            let i = self.rng.gen_range(0..SENTIMENT_TOKENS);
            tokens.push(if positive { format!("pos{i}") } else { format!("neg{i}") });
        }
        tokens.shuffle(&mut self.rng);
        tokens.join(" ")
    }

    fn url(&mut self, g: usize) -> String {
        let t = &self.cfg.territory;
        let roll: f64 = self.rng.gen();
        let [local, state] = [[0.6, 0.2], [0.2, 0.6]][g];
        let tld = if roll < local {
            t.local_tld.clone()
        } else if roll < local + state {
            t.state_tld.clone()
        } else {
            ".com".into()
        };
        format!("http://site{}{tld}/p{}", self.rng.gen_range(0..50), self.rng.gen_range(0..1000))
    }
}

/// Builds a dataset from `config`; byte-identical for identical configs.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let cfg = config;
    let n = cfg.n_users;
    let shared = (cfg.token_overlap * cfg.token_vocab_per_group as f64).round() as usize;
    let own = cfg.token_vocab_per_group - shared;
    let topic = |i: usize| format!("tk{i:04}");
    let topics = [
        (0..shared).chain(shared..shared + own).map(topic).collect(),
        (0..shared).chain(shared + own..shared + 2 * own).map(topic).collect(),
    ];
    let mut gen = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        languages: languages(),
        topics,
    };

    let ids: Vec<String> = (0..n).map(|i| format!("u{i:05}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut gen.rng);
    let mut group = vec![StanceLabel::AI.index(); n];
    for &i in &order[..cfg.n_pi()] {
        group[i] = StanceLabel::PI.index();
    }
    let members: [Vec<usize>; 2] = [0, 1].map(|g| (0..n).filter(|&i| group[i] == g).collect());

    // Planted-partition ties.
    let m = (n as f64 * cfg.mean_degree / 2.0).round() as usize;
    if m > n * (n - 1) / 2 {
        return Err(Error::Infeasible(format!("{m} ties requested among {n} users")));
    }
    let mut seen = HashSet::with_capacity(m);
    let mut ties = Vec::with_capacity(m);
    let mut budget = 50 * m + 1000;
    while ties.len() < m {
        if budget == 0 {
            return Err(Error::Infeasible(format!(
                "could only place {} of {m} ties with homophily {}",
                ties.len(),
                cfg.homophily
            )));
        }
        budget -= 1;
        let s = gen.rng.gen_range(0..n);
        let within = gen.chance(cfg.homophily);
        let tg = if within { group[s] } else { 1 - group[s] };
        let t = *members[tg].choose(&mut gen.rng).unwrap();
        if t == s || !seen.insert((s.min(t), s.max(t))) {
            continue;
        }
        ties.push((s, t));
    }
    let mut followees: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    let mut followers: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    for (s, t) in ties {
        followees[s].insert(ids[t].clone());
        followers[t].insert(ids[s].clone());
        if gen.chance(cfg.reciprocity[group[t]]) {
            followees[t].insert(ids[s].clone());
            followers[s].insert(ids[t].clone());
        }
    }
    // Internal followees, for interactions and favourites.
    let internal: Vec<Vec<usize>> = followees
        .iter()
        .map(|f| f.iter().map(|id| id[1..].parse().unwrap()).collect())
        .collect();

    // External accounts: the first half lean PI, the rest AI; Zipf popularity.
    if cfg.n_external >= 2 {
        let half = cfg.n_external / 2;
        let sides = [(0..half).collect::<Vec<_>>(), (half..cfg.n_external).collect::<Vec<_>>()];
        let zipf: Vec<WeightedIndex<f64>> = sides
            .iter()
            .map(|s| WeightedIndex::new((0..s.len()).map(|r| 1.0 / (r + 1) as f64)).unwrap())
            .collect();
        let align = cfg.external_homophily.unwrap_or(cfg.homophily);
        for u in 0..n {
            let k = gen.poisson(cfg.external_follows) as usize;
            for _ in 0..k.min(cfg.n_external) {
                let side = if gen.chance(align) { group[u] } else { 1 - group[u] };
                let x = sides[side][zipf[side].sample(&mut gen.rng)];
                followees[u].insert(format!("x{x:04}"));
            }
        }
    }

    // Timelines.
    let kinds = ["retweet", "reply", "mention"];
    let mut timelines: Vec<Vec<Tweet>> = Vec::with_capacity(n);
    for u in 0..n {
        let g = group[u];
        let act = gen.activity(g);
        let count = (gen.poisson(cfg.tweets_per_user as f64 * act) as usize).min(MAX_TWEETS);
        let mut tl = Vec::with_capacity(count);
        for i in 0..count {
            let mut t = Tweet {
                tweet_id: format!("{}-t{i:03}", ids[u]),
                author_id: ids[u].clone(),
                text: String::new(),
                created_at: cfg.reference_time - gen.rng.gen_range(0..TWEET_WINDOW_DAYS * DAY),
                retweet_of: None,
                reply_to: None,
                mentions: vec![],
                urls: vec![],
                retweet_count: 0,
                favourite_count: 0,
            };
            let mut sentiment = None;
            if !internal[u].is_empty() && gen.chance(cfg.interaction_rate) {
                let target = *internal[u].choose(&mut gen.rng).unwrap();
                let tid = ids[target].clone();
                let same = group[target] == g;
                let roll: f64 = gen.rng.gen();
                sentiment = match (same, roll) {
                    (true, r) if r < 0.5 => Some(true),
                    (true, r) if r < 0.6 => Some(false),
                    (false, r) if r < 0.4 => Some(false),
                    (false, r) if r < 0.55 => Some(true),
                    _ => None,
                };
                match *kinds.choose(&mut gen.rng).unwrap() {
                    "retweet" => t.retweet_of = Some(tid),
                    "reply" => t.reply_to = Some(tid),
                    _ => t.mentions = vec![tid],
                }
            } else if gen.chance(0.1) {
                sentiment = Some(gen.chance(0.5));
            }
            let mut text = gen.tweet_text(g, sentiment);
            if let Some(r) = &t.retweet_of {
                text = format!("RT @{r}: {text}");
            } else if let Some(r) = &t.reply_to {
                text = format!("@{r} {text}");
            } else if let Some(m) = t.mentions.first() {
                text = format!("{text} @{m}");
            }
            if gen.chance(0.3) {
                let url = gen.url(g);
                text = format!("{text} {url}");
                t.urls.push(url);
            }
            t.text = text;
            if t.retweet_of.is_none() {
                t.retweet_count = gen.poisson(2.0 * act);
                t.favourite_count = gen.poisson(3.0 * act);
            }
            tl.push(t);
        }
        timelines.push(tl);
    }

    let mut dataset = Dataset::new(cfg.territory.clone(), cfg.reference_time);
    let t = &cfg.territory;
    let age = [Normal::new(1500.0, 500.0).unwrap(), Normal::new(1200.0, 500.0).unwrap()];
    for u in 0..n {
        let g = group[u];
        let act = gen.activity(g);
        let fav_count = gen.poisson(cfg.favourites_per_user as f64 * act) as usize;
        let mut favourites = Vec::new();
        for _ in 0..fav_count.min(MAX_TWEETS) {
            let Some(&f) = internal[u].choose(&mut gen.rng) else { break };
            if let Some(tw) = timelines[f].choose(&mut gen.rng) {
                favourites.push(tw.clone());
            }
        }
        let mut user = UserRecord::new(ids[u].clone(), "synthetic");
        let age_days: f64 = age[g].sample(&mut gen.rng);
        let age_days = age_days.max(1.0);
        user.created_at = cfg.reference_time - (age_days * DAY as f64) as i64;
        user.listed_count = gen.poisson(5.0 * act);
        user.verified = gen.chance([0.10, 0.04][g]);
        user.geo_enabled = gen.chance([0.5, 0.3][g]);
        if gen.chance(0.6) {
            let roll: f64 = gen.rng.gen();
            let [local, state] = [[0.5, 0.1], [0.1, 0.5]][g];
            let tld = if roll < local {
                &t.local_tld
            } else if roll < local + state {
                &t.state_tld
            } else {
                ".com"
            };
            user.profile_url = Some(format!("https://home{u}{tld}"));
        }
        let roll: f64 = gen.rng.gen();
        let [local, state] = [[0.6, 0.3], [0.2, 0.7]][g];
        user.ui_language = if roll < local {
            t.local_languages.first().cloned().unwrap_or_default()
        } else if roll < local + state {
            t.state_languages.first().cloned().unwrap_or_default()
        } else {
            "fr".into()
        };
        user.followees = followees[u].iter().cloned().collect();
        user.followers = followers[u].iter().cloned().collect();
        user.followees_count = user.followees.len() as u64;
        user.followers_count = user.followers.len() as u64 + gen.poisson([60.0, 40.0][g]);
        user.timeline = std::mem::take(&mut timelines[u]);
        user.favourites = favourites;
        user.label = Some(StanceLabel::from_index(g));
        dataset.insert(user);
    }
    dataset.link_follows();
    Ok(dataset)
}

/// Writes the dataset files, the text resources and the config used.
pub fn write_synthetic(config: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let dataset = generate(config)?;
    let manifest = ingest::save_dataset(&dataset, dir)?;
    let (profiles, lexicon) = text_resources(&config.territory);
    textfeat::save_profiles(&profiles, &dir.join(PROFILES_FILE))?;
    lexicon.save(&dir.join(LEXICON_FILE))?;
    let provenance = dir.join(PROVENANCE_FILE);
    let json = serde_json::to_string_pretty(config).expect("config serialises");
    std::fs::write(&provenance, json + "\n").map_err(|e| Error::io(&provenance, e))?;
    Ok(manifest)
}

/// Count of each label, PI first.
pub fn label_counts(dataset: &Dataset) -> BTreeMap<StanceLabel, usize> {
    StanceLabel::ALL.iter().map(|&l| (l, dataset.count_label(l))).collect()
}
