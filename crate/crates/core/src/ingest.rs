//! JSON-lines persistence for datasets.
//!
//! A dataset lives in four files plus a manifest:
//!
//! * `users.jsonl`: one profile per line
//! * `tweets.jsonl`: timeline tweets, keyed by `author_id`
//! * `favourites.jsonl`: favourited tweets, keyed by `favourited_by`
//! * `edges.jsonl`: `{"src","dst","kind":"follows"}`, meaning `src` follows `dst`
//!
//! Unknown keys are ignored. Missing optional keys stay absent.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, StanceLabel, Territory, Tweet, UserRecord};

pub const USERS_FILE: &str = "users.jsonl";
pub const TWEETS_FILE: &str = "tweets.jsonl";
pub const FAVOURITES_FILE: &str = "favourites.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub territory: Territory,
    /// Epoch seconds used as "now" when measuring account age.
    #[serde(default)]
    pub reference_time: i64,
    pub users_path: PathBuf,
    pub tweets_path: PathBuf,
    pub favourites_path: PathBuf,
    pub edges_path: PathBuf,
}

impl Manifest {
    /// Manifest using the standard file names inside `dir`.
    pub fn in_directory(dir: &Path, territory: Territory, reference_time: i64) -> Self {
        Manifest {
            territory,
            reference_time,
            users_path: dir.join(USERS_FILE),
            tweets_path: dir.join(TWEETS_FILE),
            favourites_path: dir.join(FAVOURITES_FILE),
            edges_path: dir.join(EDGES_FILE),
        }
    }

    /// Reads a manifest; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut manifest.users_path,
            &mut manifest.tweets_path,
            &mut manifest.favourites_path,
            &mut manifest.edges_path,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let paths = [
            &self.users_path,
            &self.tweets_path,
            &self.favourites_path,
            &self.edges_path,
        ];
        for (i, a) in paths.iter().enumerate() {
            if paths[i + 1..].contains(a) {
                return Err(Error::InvalidInput(format!(
                    "manifest lists {} twice",
                    a.display()
                )));
            }
        }
        let problems = self.territory.problems();
        if !problems.is_empty() {
            return Err(Error::InvalidInput(format!(
                "territory {}: {}",
                self.territory.id,
                problems.join("; ")
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct UserLine {
    user_id: String,
    location: String,
    created_at: i64,
    followers_count: u64,
    followees_count: u64,
    listed_count: u64,
    verified: bool,
    geo_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile_url: Option<String>,
    ui_language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<StanceLabel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TweetLine {
    tweet_id: String,
    author_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    favourited_by: Option<String>,
    text: String,
    created_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    retweet_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reply_to: Option<String>,
    #[serde(default)]
    mentions: Vec<String>,
    #[serde(default)]
    urls: Vec<String>,
    retweet_count: u64,
    favourite_count: u64,
}

impl TweetLine {
    fn from_tweet(t: &Tweet, favourited_by: Option<&str>) -> Self {
        TweetLine {
            tweet_id: t.tweet_id.clone(),
            author_id: t.author_id.clone(),
            favourited_by: favourited_by.map(str::to_string),
            text: t.text.clone(),
            created_at: t.created_at,
            retweet_of: t.retweet_of.clone(),
            reply_to: t.reply_to.clone(),
            mentions: t.mentions.clone(),
            urls: t.urls.clone(),
            retweet_count: t.retweet_count,
            favourite_count: t.favourite_count,
        }
    }

    fn into_tweet(self) -> (Tweet, Option<String>) {
        (
            Tweet {
                tweet_id: self.tweet_id,
                author_id: self.author_id,
                text: self.text,
                created_at: self.created_at,
                retweet_of: self.retweet_of,
                reply_to: self.reply_to,
                mentions: self.mentions,
                urls: self.urls,
                retweet_count: self.retweet_count,
                favourite_count: self.favourite_count,
            },
            self.favourited_by,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeLine {
    src: String,
    dst: String,
    kind: String,
}

/// Counters for records that were dropped or replaced while loading.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadWarnings {
    pub duplicate_users: usize,
    pub dropped_tweets: usize,
    pub dropped_favourites: usize,
    pub dropped_edges: usize,
    pub unknown_edge_kinds: usize,
}

impl LoadWarnings {
    pub fn total(&self) -> usize {
        self.duplicate_users
            + self.dropped_tweets
            + self.dropped_favourites
            + self.dropped_edges
            + self.unknown_edge_kinds
    }
}

#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    pub warnings: LoadWarnings,
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Loads the four files named by the manifest and joins them into a dataset.
///
/// Tweets and favourites whose owner is not a known user are dropped, as are
/// edges with no known endpoint. Edges with one unknown endpoint populate the
/// known side only.
pub fn load_dataset(manifest: &Manifest) -> Result<Loaded> {
    manifest.validate()?;
    let ((users, tweets), (favourites, edges)) = rayon::join(
        || {
            rayon::join(
                || read_lines::<UserLine>(&manifest.users_path),
                || read_lines::<TweetLine>(&manifest.tweets_path),
            )
        },
        || {
            rayon::join(
                || read_lines::<TweetLine>(&manifest.favourites_path),
                || read_lines::<EdgeLine>(&manifest.edges_path),
            )
        },
    );
    let (users, tweets, favourites, edges) = (users?, tweets?, favourites?, edges?);

    let mut warnings = LoadWarnings::default();
    let mut map: BTreeMap<String, UserRecord> = BTreeMap::new();
    for line in users {
        let user = UserRecord {
            user_id: line.user_id,
            location: line.location,
            created_at: line.created_at,
            followers_count: line.followers_count,
            followees_count: line.followees_count,
            listed_count: line.listed_count,
            verified: line.verified,
            geo_enabled: line.geo_enabled,
            profile_url: line.profile_url,
            ui_language: line.ui_language,
            timeline: Vec::new(),
            favourites: Vec::new(),
            followees: Vec::new(),
            followers: Vec::new(),
            label: line.label,
        };
        if map.insert(user.user_id.clone(), user).is_some() {
            warnings.duplicate_users += 1;
        }
    }

    for line in tweets {
        let (tweet, _) = line.into_tweet();
        match map.get_mut(&tweet.author_id) {
            Some(user) => user.timeline.push(tweet),
            None => warnings.dropped_tweets += 1,
        }
    }
    for line in favourites {
        let (tweet, owner) = line.into_tweet();
        match owner.and_then(|o| map.get_mut(&o)) {
            Some(user) => user.favourites.push(tweet),
            None => warnings.dropped_favourites += 1,
        }
    }
    for edge in edges {
        if edge.kind != "follows" {
            warnings.unknown_edge_kinds += 1;
            continue;
        }
        let known_src = map.contains_key(&edge.src);
        let known_dst = map.contains_key(&edge.dst);
        if !known_src && !known_dst {
            warnings.dropped_edges += 1;
            continue;
        }
        if let Some(u) = map.get_mut(&edge.src) {
            u.followees.push(edge.dst.clone());
        }
        if let Some(v) = map.get_mut(&edge.dst) {
            v.followers.push(edge.src);
        }
    }

    let mut dataset = Dataset {
        territory: manifest.territory.clone(),
        reference_time: manifest.reference_time,
        users: map,
    };
    dataset.link_follows();
    if warnings.total() > 0 {
        log::warn!("load_dataset: {warnings:?}");
    }
    Ok(Loaded { dataset, warnings })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row).expect("records serialize");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the dataset as four JSON-lines files plus `manifest.json` in
/// `directory`, creating it if needed.
pub fn save_dataset(dataset: &Dataset, directory: &Path) -> Result<Manifest> {
    fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;
    let manifest = Manifest::in_directory(
        directory,
        dataset.territory.clone(),
        dataset.reference_time,
    );

    write_jsonl(
        &manifest.users_path,
        dataset.users.values().map(|u| UserLine {
            user_id: u.user_id.clone(),
            location: u.location.clone(),
            created_at: u.created_at,
            followers_count: u.followers_count,
            followees_count: u.followees_count,
            listed_count: u.listed_count,
            verified: u.verified,
            geo_enabled: u.geo_enabled,
            profile_url: u.profile_url.clone(),
            ui_language: u.ui_language.clone(),
            label: u.label,
        }),
    )?;
    write_jsonl(
        &manifest.tweets_path,
        dataset
            .users
            .values()
            .flat_map(|u| u.timeline.iter().map(|t| TweetLine::from_tweet(t, None))),
    )?;
    write_jsonl(
        &manifest.favourites_path,
        dataset.users.values().flat_map(|u| {
            u.favourites
                .iter()
                .map(|t| TweetLine::from_tweet(t, Some(&u.user_id)))
        }),
    )?;

    let follows = |src: &str, dst: &str| EdgeLine {
        src: src.to_string(),
        dst: dst.to_string(),
        kind: "follows".to_string(),
    };
    let mut edges = Vec::new();
    for user in dataset.users.values() {
        for followee in &user.followees {
            edges.push(follows(&user.user_id, followee));
        }
        for follower in &user.followers {
            // Already written from the follower's side when it is a member.
            let covered = dataset
                .users
                .get(follower)
                .is_some_and(|f| f.followees.contains(&user.user_id));
            if !covered {
                edges.push(follows(follower, &user.user_id));
            }
        }
    }
    write_jsonl(&manifest.edges_path, edges.into_iter())?;

    // File names only, so the directory stays relocatable.
    Manifest::in_directory(Path::new(""), manifest.territory.clone(), manifest.reference_time)
        .save(&directory.join(MANIFEST_FILE))?;
    Ok(manifest)
}
