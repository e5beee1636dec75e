//! Core domain types shared by every stage of the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Upper bound on stored timeline and favourites tweets per user.
pub const MAX_TWEETS: usize = 500;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerritoryId {
    Catalonia,
    BasqueCountry,
    Scotland,
    Custom(String),
}

impl TerritoryId {
    pub fn name(&self) -> &str {
        match self {
            TerritoryId::Catalonia => "Catalonia",
            TerritoryId::BasqueCountry => "Basque Country",
            TerritoryId::Scotland => "Scotland",
            TerritoryId::Custom(name) => name,
        }
    }
}

impl fmt::Display for TerritoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerritoryId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "catalonia" | "catalunya" | "ca" => TerritoryId::Catalonia,
            "basquecountry" | "basque" | "euskadi" | "eu" => TerritoryId::BasqueCountry,
            "scotland" | "sc" => TerritoryId::Scotland,
            _ => TerritoryId::Custom(s.trim().to_string()),
        })
    }
}

/// A territory with an independence movement, together with the markers that
/// distinguish the aspirant nation from the recognised state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Territory {
    pub id: TerritoryId,
    /// Top-level domain of the aspirant nation, e.g. `.cat`.
    pub local_tld: String,
    /// Top-level domain of the recognised state, e.g. `.es`.
    pub state_tld: String,
    /// Interface-language codes associated with the aspirant nation.
    pub local_languages: Vec<String>,
    /// Interface-language codes associated with the recognised state.
    pub state_languages: Vec<String>,
    /// Tweet-language codes counted as the nation's own language. Kept apart
    /// from `local_languages` because interface and tweet languages differ
    /// for Scotland.
    #[serde(default)]
    pub tweet_languages: Vec<String>,
}

impl Territory {
    pub fn catalonia() -> Self {
        Territory {
            id: TerritoryId::Catalonia,
            local_tld: ".cat".into(),
            state_tld: ".es".into(),
            local_languages: vec!["ca".into()],
            state_languages: vec!["es".into()],
            tweet_languages: vec!["ca".into()],
        }
    }

    pub fn basque_country() -> Self {
        Territory {
            id: TerritoryId::BasqueCountry,
            local_tld: ".eus".into(),
            state_tld: ".es".into(),
            local_languages: vec!["eu".into()],
            state_languages: vec!["es".into()],
            tweet_languages: vec!["eu".into()],
        }
    }

    /// Scotland has no Gaelic or Scots interface option, so `en` stands for
    /// the nation and `en-gb` for the state.
    pub fn scotland() -> Self {
        Territory {
            id: TerritoryId::Scotland,
            local_tld: ".scot".into(),
            state_tld: ".uk".into(),
            local_languages: vec!["en".into()],
            state_languages: vec!["en-gb".into()],
            tweet_languages: vec!["gd".into(), "sco".into()],
        }
    }

    /// Built-in definition for one of the three studied territories.
    pub fn builtin(id: &TerritoryId) -> Option<Self> {
        match id {
            TerritoryId::Catalonia => Some(Self::catalonia()),
            TerritoryId::BasqueCountry => Some(Self::basque_country()),
            TerritoryId::Scotland => Some(Self::scotland()),
            TerritoryId::Custom(_) => None,
        }
    }

    /// Tweet languages that count as the nation's own, falling back to the
    /// interface languages when none are configured.
    pub fn own_tweet_languages(&self) -> &[String] {
        if self.tweet_languages.is_empty() {
            &self.local_languages
        } else {
            &self.tweet_languages
        }
    }

    /// Descriptions of every broken invariant; empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.local_tld.starts_with('.') || !self.state_tld.starts_with('.') {
            out.push("TLDs must begin with '.'".to_string());
        }
        if self.local_tld.eq_ignore_ascii_case(&self.state_tld) {
            out.push(format!("local and state TLD are both {}", self.local_tld));
        }
        if self.local_languages.is_empty() || self.state_languages.is_empty() {
            out.push("language lists must be non-empty".to_string());
        }
        if let Some(shared) = self
            .local_languages
            .iter()
            .find(|l| self.state_languages.contains(l))
        {
            out.push(format!("language {shared} is both local and state"));
        }
        out
    }
}

/// Stance towards independence: pro (`PI`) or anti (`AI`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StanceLabel {
    PI,
    AI,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 2] = [StanceLabel::PI, StanceLabel::AI];

    /// Row/column index in 2×2 tables: PI = 0, AI = 1.
    pub fn index(self) -> usize {
        match self {
            StanceLabel::PI => 0,
            StanceLabel::AI => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            StanceLabel::PI
        } else {
            StanceLabel::AI
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            StanceLabel::PI => StanceLabel::AI,
            StanceLabel::AI => StanceLabel::PI,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::PI => "PI",
            StanceLabel::AI => "AI",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PI" | "pi" => Ok(StanceLabel::PI),
            "AI" | "ai" => Ok(StanceLabel::AI),
            other => Err(format!("unknown stance label {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub tweet_id: String,
    pub author_id: String,
    pub text: String,
    /// UTC epoch seconds.
    pub created_at: i64,
    pub retweet_of: Option<String>,
    pub reply_to: Option<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default)]
    pub urls: Vec<String>,
    pub retweet_count: u64,
    pub favourite_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub location: String,
    /// UTC epoch seconds.
    pub created_at: i64,
    pub followers_count: u64,
    pub followees_count: u64,
    pub listed_count: u64,
    pub verified: bool,
    pub geo_enabled: bool,
    pub profile_url: Option<String>,
    pub ui_language: String,
    pub timeline: Vec<Tweet>,
    pub favourites: Vec<Tweet>,
    /// Accounts this user follows, sorted and unique.
    pub followees: Vec<String>,
    /// Accounts following this user, sorted and unique.
    pub followers: Vec<String>,
    pub label: Option<StanceLabel>,
}

impl UserRecord {
    /// A profile with no tweets, edges or label.
    pub fn new(user_id: impl Into<String>, location: impl Into<String>) -> Self {
        UserRecord {
            user_id: user_id.into(),
            location: location.into(),
            created_at: 0,
            followers_count: 0,
            followees_count: 0,
            listed_count: 0,
            verified: false,
            geo_enabled: false,
            profile_url: None,
            ui_language: String::new(),
            timeline: Vec::new(),
            favourites: Vec::new(),
            followees: Vec::new(),
            followers: Vec::new(),
            label: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub territory: Territory,
    /// Epoch seconds against which account ages are measured.
    pub reference_time: i64,
    pub users: BTreeMap<String, UserRecord>,
}

impl Dataset {
    pub fn new(territory: Territory, reference_time: i64) -> Self {
        Dataset {
            territory,
            reference_time,
            users: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, user: UserRecord) -> Option<UserRecord> {
        self.users.insert(user.user_id.clone(), user)
    }

    pub fn label_of(&self, user_id: &str) -> Option<StanceLabel> {
        self.users.get(user_id).and_then(|u| u.label)
    }

    /// Labelled users in user-id order.
    pub fn labeled_users(&self) -> impl Iterator<Item = (&UserRecord, StanceLabel)> {
        self.users
            .values()
            .filter_map(|u| u.label.map(|label| (u, label)))
    }

    pub fn count_label(&self, label: StanceLabel) -> usize {
        self.users.values().filter(|u| u.label == Some(label)).count()
    }

    /// Makes follow lists sorted, unique and mutually consistent between
    /// members of the dataset.
    pub fn link_follows(&mut self) {
        let mut incoming: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut outgoing: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for user in self.users.values() {
            for followee in &user.followees {
                if self.users.contains_key(followee) {
                    incoming
                        .entry(followee.clone())
                        .or_default()
                        .insert(user.user_id.clone());
                }
            }
            for follower in &user.followers {
                if self.users.contains_key(follower) {
                    outgoing
                        .entry(follower.clone())
                        .or_default()
                        .insert(user.user_id.clone());
                }
            }
        }
        for (id, user) in self.users.iter_mut() {
            let mut followees: BTreeSet<String> = user.followees.drain(..).collect();
            followees.extend(outgoing.remove(id).unwrap_or_default());
            followees.remove(id);
            let mut followers: BTreeSet<String> = user.followers.drain(..).collect();
            followers.extend(incoming.remove(id).unwrap_or_default());
            followers.remove(id);
            user.followees = followees.into_iter().collect();
            user.followers = followers.into_iter().collect();
        }
    }
}

/// One broken invariant found by [`validate_dataset`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// `None` for dataset-level problems.
    pub user_id: Option<String>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.user_id {
            Some(id) => write!(f, "user {id}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn is_sorted_unique(ids: &[String]) -> bool {
    ids.windows(2).all(|w| w[0] < w[1])
}

/// Lists every invariant violation in the dataset. An empty result means the
/// dataset is valid.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for message in dataset.territory.problems() {
        out.push(Violation {
            user_id: None,
            field: "territory",
            message,
        });
    }

    for (key, user) in &dataset.users {
        let mut push = |field: &'static str, message: String| {
            out.push(Violation {
                user_id: Some(key.clone()),
                field,
                message,
            })
        };
        if user.user_id.is_empty() {
            push("user_id", "empty user id".into());
        } else if &user.user_id != key {
            push("user_id", format!("stored under key {key:?}"));
        }
        if user.timeline.len() > MAX_TWEETS {
            push(
                "timeline",
                format!("{} tweets exceeds {MAX_TWEETS}", user.timeline.len()),
            );
        }
        if user.favourites.len() > MAX_TWEETS {
            push(
                "favourites",
                format!("{} tweets exceeds {MAX_TWEETS}", user.favourites.len()),
            );
        }
        for tweet in &user.timeline {
            if tweet.author_id != user.user_id {
                push(
                    "timeline",
                    format!(
                        "tweet {} authored by {:?}, not the owner",
                        tweet.tweet_id, tweet.author_id
                    ),
                );
            }
        }
        for tweet in &user.favourites {
            if tweet.author_id.is_empty() {
                push(
                    "favourites",
                    format!("tweet {} has an empty author", tweet.tweet_id),
                );
            }
        }
        if !is_sorted_unique(&user.followees) {
            push("followees", "list not sorted and unique".into());
        }
        if !is_sorted_unique(&user.followers) {
            push("followers", "list not sorted and unique".into());
        }
        for followee in &user.followees {
            if let Some(other) = dataset.users.get(followee) {
                if other.followers.binary_search(&user.user_id).is_err() {
                    push(
                        "followees",
                        format!("follows {followee} but is missing from its followers"),
                    );
                }
            }
        }
        for follower in &user.followers {
            if let Some(other) = dataset.users.get(follower) {
                if other.followees.binary_search(&user.user_id).is_err() {
                    push(
                        "followers",
                        format!("followed by {follower} but missing from its followees"),
                    );
                }
            }
        }
    }
    out
}
