//! Database of the reference site and its seeded population.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::canonical::{sha256_hex, Record, StateDump};
use crate::rng::{mix64, SplitMix64};

pub const LISTING_COUNT: u32 = 60;
pub const PRICE_MIN_CENTS: u64 = 50_000;
pub const PRICE_MAX_CENTS: u64 = 500_000;
pub const RATING_MIN: u8 = 10;
pub const RATING_MAX: u8 = 50;
pub const REVIEW_COUNT_BOUND: u64 = 1000;

pub const CATEGORIES: [&str; 6] = ["apartment", "condo", "house", "loft", "studio", "townhome"];
const CATEGORY_NOUNS: [&str; 6] = [
    "Apartments",
    "Condos",
    "Homes",
    "Lofts",
    "Studios",
    "Townhomes",
];

const NAME_FIRST: [&str; 20] = [
    "Reed", "Oak", "Maple", "Cedar", "Birch", "Willow", "Aspen", "Elm", "Pine", "Ash", "Stone",
    "River", "Lake", "Brook", "Summit", "Harbor", "Meadow", "Garden", "Park", "Bay",
];
const NAME_SECOND: [&str; 16] = [
    "Hill", "Ridge", "View", "Point", "Crest", "Glen", "Grove", "Landing", "Terrace", "Square",
    "Court", "Commons", "Heights", "Crossing", "Place", "Village",
];

pub const USERNAMES: [&str; 5] = ["alice", "bob", "carol", "dave", "erin"];

/// Password of a seeded account. Known to validators and scripted test
/// policies; agents have to be told it in the task instruction.
pub fn default_password(username: &str) -> String {
    format!("{username}-pass")
}

pub fn password_digest(username: &str, password: &str) -> String {
    sha256_hex(format!("{username}:{password}").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Listing {
    pub id: u32,
    pub name: String,
    pub price_cents: u64,
    pub category: String,
    /// Tenths of a star, 10..=50.
    pub rating: u8,
    pub review_count: u32,
}

impl Listing {
    pub fn price_text(&self) -> String {
        format!("{}.{:02}", self.price_cents / 100, self.price_cents % 100)
    }

    pub fn rating_text(&self) -> String {
        format!("{}.{}", self.rating / 10, self.rating % 10)
    }
}

/// `$2,938.17` style display price.
pub fn display_price(cents: u64) -> String {
    let dollars = (cents / 100).to_string();
    let mut grouped = String::new();
    for (i, c) in dollars.chars().enumerate() {
        if i > 0 && (dollars.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    format!("${grouped}.{:02}", cents % 100)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub username: String,
    pub password_digest: String,
    pub favorites: BTreeSet<u32>,
    pub session_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactMessage {
    pub id: u32,
    pub name: String,
    pub message: String,
    pub username: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    pub seed: u64,
    pub listings: Vec<Listing>,
    pub users: Vec<UserAccount>,
    pub contact_messages: Vec<ContactMessage>,
    pub session_counter: u64,
}

/// Build the initial database for a seed.
///
/// One splitmix64 stream seeded with `seed` is consumed listing by listing
/// (ids 1..=60), each drawing in order: category index `below(6)`; then name
/// parts `below(20)`, `below(16)` repeated until the name is unused; price
/// `in_range(50000, 500000)`; rating `in_range(10, 50)`; review count
/// `below(1000)`. Accounts are the fixed five usernames with no favorites.
pub fn populate(seed: u64) -> Database {
    let mut rng = SplitMix64::new(seed);
    let mut names = BTreeSet::new();
    let mut listings = Vec::with_capacity(LISTING_COUNT as usize);

    for id in 1..=LISTING_COUNT {
        let cat = rng.below(CATEGORIES.len() as u64) as usize;
        let name = loop {
            let a = rng.below(NAME_FIRST.len() as u64) as usize;
            let b = rng.below(NAME_SECOND.len() as u64) as usize;
            let candidate = format!("{}-{} {}", NAME_FIRST[a], NAME_SECOND[b], CATEGORY_NOUNS[cat]);
            if names.insert(candidate.clone()) {
                break candidate;
            }
        };
        let price_cents = rng.in_range(PRICE_MIN_CENTS, PRICE_MAX_CENTS);
        let rating = rng.in_range(RATING_MIN as u64, RATING_MAX as u64) as u8;
        let review_count = rng.below(REVIEW_COUNT_BOUND) as u32;
        listings.push(Listing {
            id,
            name,
            price_cents,
            category: CATEGORIES[cat].to_string(),
            rating,
            review_count,
        });
    }

    let users = USERNAMES
        .iter()
        .map(|u| UserAccount {
            username: u.to_string(),
            password_digest: password_digest(u, &default_password(u)),
            favorites: BTreeSet::new(),
            session_token: None,
        })
        .collect();

    Database {
        seed,
        listings,
        users,
        contact_messages: Vec::new(),
        session_counter: 0,
    }
}

impl Database {
    pub fn listing(&self, id: u32) -> Option<&Listing> {
        id.checked_sub(1)
            .and_then(|i| self.listings.get(i as usize))
            .filter(|l| l.id == id)
    }

    pub fn user(&self, username: &str) -> Option<&UserAccount> {
        self.users.iter().find(|u| u.username == username)
    }

    pub fn user_mut(&mut self, username: &str) -> Option<&mut UserAccount> {
        self.users.iter_mut().find(|u| u.username == username)
    }

    pub fn user_by_token(&self, token: &str) -> Option<&UserAccount> {
        self.users
            .iter()
            .find(|u| u.session_token.as_deref() == Some(token))
    }

    /// Check credentials and open a new session for the user.
    pub fn login(&mut self, username: &str, password: &str) -> Option<String> {
        let digest = password_digest(username, password);
        if self.user(username)?.password_digest != digest {
            return None;
        }
        let seed = self.seed;
        self.session_counter += 1;
        let counter = self.session_counter;
        let user = self.user_mut(username)?;
        let token = format!("s{counter}-{:016x}", mix64(seed ^ counter));
        user.session_token = Some(token.clone());
        Some(token)
    }

    pub fn sign_up(&mut self, username: &str, password: &str) -> Result<String, &'static str> {
        if username.trim().is_empty() || password.is_empty() {
            return Err("username and password required");
        }
        if self.user(username).is_some() {
            return Err("username taken");
        }
        self.users.push(UserAccount {
            username: username.to_string(),
            password_digest: password_digest(username, password),
            favorites: BTreeSet::new(),
            session_token: None,
        });
        self.login(username, password).ok_or("sign-up failed")
    }

    /// Flip a favorite for the user owning `token`. Returns the new membership.
    pub fn toggle_favorite(&mut self, token: &str, listing_id: u32) -> Option<bool> {
        self.listing(listing_id)?;
        let user = self
            .users
            .iter_mut()
            .find(|u| u.session_token.as_deref() == Some(token))?;
        if user.favorites.remove(&listing_id) {
            Some(false)
        } else {
            user.favorites.insert(listing_id);
            Some(true)
        }
    }

    pub fn add_contact_message(&mut self, name: &str, message: &str, username: Option<String>) {
        let id = self.contact_messages.len() as u32 + 1;
        self.contact_messages.push(ContactMessage {
            id,
            name: name.to_string(),
            message: message.to_string(),
            username,
        });
    }

    /// Listings filtered by category (`None` or `"all"` for every listing)
    /// and ordered by the sort key, ties by ascending id.
    pub fn query_listings(&self, sort: SortKey, category: Option<&str>) -> Vec<&Listing> {
        let mut rows: Vec<&Listing> = self
            .listings
            .iter()
            .filter(|l| match category {
                None | Some("all") => true,
                Some(c) => l.category == c,
            })
            .collect();
        match sort {
            SortKey::Id => rows.sort_by_key(|l| l.id),
            SortKey::PriceAsc => rows.sort_by_key(|l| (l.price_cents, l.id)),
            SortKey::PriceDesc => {
                rows.sort_by(|a, b| b.price_cents.cmp(&a.price_cents).then(a.id.cmp(&b.id)))
            }
        }
        rows
    }

    /// Canonical table dump used for the state digest.
    pub fn dump(&self) -> StateDump {
        let mut dump = StateDump::default();
        for l in &self.listings {
            dump.insert("listings", l.id, to_record(json!(l)));
        }
        for u in &self.users {
            dump.insert("users", &u.username, to_record(json!(u)));
        }
        for m in &self.contact_messages {
            dump.insert("contact_messages", m.id, to_record(json!(m)));
        }
        dump.insert(
            "meta",
            "counters",
            to_record(json!({ "session_counter": self.session_counter })),
        );
        dump
    }

    pub fn state_hash(&self) -> String {
        self.dump().digest()
    }
}

fn to_record(v: serde_json::Value) -> Record {
    serde_json::from_value(v).expect("object record")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    Id,
    PriceAsc,
    PriceDesc,
}

impl SortKey {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "id" => Some(SortKey::Id),
            "price_asc" => Some(SortKey::PriceAsc),
            "price_desc" => Some(SortKey::PriceDesc),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SortKey::Id => "id",
            SortKey::PriceAsc => "price_asc",
            SortKey::PriceDesc => "price_desc",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_ranges() {
        let db = populate(42);
        assert_eq!(db.listings.len(), 60);
        assert_eq!(db.users.len(), 5);
        assert!(db.contact_messages.is_empty());
        let names: BTreeSet<_> = db.listings.iter().map(|l| &l.name).collect();
        assert_eq!(names.len(), 60);
        for (i, l) in db.listings.iter().enumerate() {
            assert_eq!(l.id as usize, i + 1);
            assert!((PRICE_MIN_CENTS..=PRICE_MAX_CENTS).contains(&l.price_cents));
            assert!((RATING_MIN..=RATING_MAX).contains(&l.rating));
            assert!(CATEGORIES.contains(&l.category.as_str()));
        }
        assert!(db.users.iter().all(|u| u.favorites.is_empty()));
    }

    #[test]
    fn seeded_purity() {
        assert_eq!(populate(42), populate(42));
        assert_eq!(populate(42).state_hash(), populate(42).state_hash());
        assert_ne!(populate(42).state_hash(), populate(43).state_hash());
    }

    #[test]
    fn first_listing_of_seed_42_follows_the_documented_draw_order() {
        // replay the draw order by hand against the raw stream
        let mut rng = SplitMix64::new(42);
        let cat = (rng.next_u64() % 6) as usize;
        let a = (rng.next_u64() % 20) as usize;
        let b = (rng.next_u64() % 16) as usize;
        let price = 50_000 + rng.next_u64() % 450_001;
        let rating = 10 + rng.next_u64() % 41;
        let reviews = rng.next_u64() % 1000;
        let l = &populate(42).listings[0];
        assert_eq!(l.category, CATEGORIES[cat]);
        assert_eq!(l.name, format!("{}-{} {}", NAME_FIRST[a], NAME_SECOND[b], CATEGORY_NOUNS[cat]));
        assert_eq!(l.price_cents, price);
        assert_eq!(l.rating as u64, rating);
        assert_eq!(l.review_count as u64, reviews);
    }

    #[test]
    fn price_formats() {
        assert_eq!(display_price(293_800), "$2,938.00");
        assert_eq!(display_price(50_005), "$500.05");
        assert_eq!(display_price(123_456_789), "$1,234,567.89");
        let l = Listing {
            id: 1,
            name: "x".into(),
            price_cents: 293_817,
            category: "loft".into(),
            rating: 45,
            review_count: 0,
        };
        assert_eq!(l.price_text(), "2938.17");
        assert_eq!(l.rating_text(), "4.5");
    }

    #[test]
    fn login_and_sessions() {
        let mut db = populate(1);
        assert!(db.login("alice", "wrong").is_none());
        let t1 = db.login("alice", &default_password("alice")).unwrap();
        let t2 = db.login("bob", &default_password("bob")).unwrap();
        assert_ne!(t1, t2);
        assert_eq!(db.user_by_token(&t1).unwrap().username, "alice");
        assert_eq!(db.toggle_favorite(&t1, 7), Some(true));
        assert_eq!(db.user("alice").unwrap().favorites.len(), 1);
        assert!(db.user("bob").unwrap().favorites.is_empty());
        assert_eq!(db.toggle_favorite(&t1, 7), Some(false));
        assert_eq!(db.toggle_favorite(&t1, 999), None);
        assert_eq!(db.toggle_favorite("nope", 7), None);
    }

    #[test]
    fn sort_ties_by_id() {
        let mut db = populate(3);
        db.listings[4].price_cents = 1;
        db.listings[2].price_cents = 1;
        let rows = db.query_listings(SortKey::PriceAsc, None);
        assert_eq!((rows[0].id, rows[1].id), (3, 5));
        let rows = db.query_listings(SortKey::PriceDesc, None);
        assert_eq!((rows[58].id, rows[59].id), (3, 5));
    }
}
