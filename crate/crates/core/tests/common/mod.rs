#![allow(dead_code)]

use natid_core::{Dataset, StanceLabel, Territory, Tweet, UserRecord};

pub const REFERENCE_TIME: i64 = 1_500_000_000;

pub fn tweet(id: &str, author: &str, text: &str) -> Tweet {
    Tweet {
        tweet_id: id.to_string(),
        author_id: author.to_string(),
        text: text.to_string(),
        created_at: REFERENCE_TIME - 86_400,
        retweet_of: None,
        reply_to: None,
        mentions: Vec::new(),
        urls: Vec::new(),
        retweet_count: 0,
        favourite_count: 0,
    }
}

pub fn user(id: &str, label: Option<StanceLabel>) -> UserRecord {
    let mut u = UserRecord::new(id, "");
    u.label = label;
    u.created_at = REFERENCE_TIME - 400 * 86_400;
    u.ui_language = "en".into();
    u
}

pub fn dataset(users: Vec<UserRecord>) -> Dataset {
    let mut d = Dataset::new(Territory::catalonia(), REFERENCE_TIME);
    for u in users {
        d.insert(u);
    }
    d.link_follows();
    d
}
