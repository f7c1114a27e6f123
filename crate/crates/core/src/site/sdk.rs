//! State-access interface for validators. Reads the database directly and
//! never goes through page rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::data::{Database, Listing, SortKey};

/// One state-access call, optionally binding its result to a name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SdkCall {
    pub name: String,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind_as: Option<String>,
}

impl SdkCall {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            args: BTreeMap::new(),
            bind_as: None,
        }
    }

    pub fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn bind(mut self, name: &str) -> Self {
        self.bind_as = Some(name.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message")]
pub enum SdkError {
    #[error("unknown SDK call `{0}`")]
    UnknownCall(String),
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("environment unavailable: {0}")]
    Unavailable(String),
}

pub const SDK_CALLS: [&str; 7] = [
    "list_listings",
    "get_listing",
    "count_listings",
    "favorites_count",
    "min_price",
    "contact_messages_count",
    "user_exists",
];

pub fn listing_json(l: &Listing) -> Value {
    json!({
        "id": l.id,
        "name": l.name,
        "price": l.price_text(),
        "price_cents": l.price_cents,
        "category": l.category,
        "rating": l.rating_text(),
        "review_count": l.review_count,
    })
}

struct Args<'a> {
    call: &'a SdkCall,
}

impl<'a> Args<'a> {
    fn only(call: &'a SdkCall, allowed: &[&str]) -> Result<Self, SdkError> {
        if let Some(k) = call.args.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(SdkError::BadArgument(format!(
                "{} does not take `{k}`",
                call.name
            )));
        }
        Ok(Self { call })
    }

    fn opt(&self, key: &str) -> Option<&'a str> {
        self.call.args.get(key).map(String::as_str)
    }

    /// Category filter; `all` means none.
    fn category(&self) -> Option<&'a str> {
        self.opt("category").filter(|c| *c != "all")
    }

    fn req(&self, key: &str) -> Result<&'a str, SdkError> {
        self.opt(key)
            .ok_or_else(|| SdkError::BadArgument(format!("{} requires `{key}`", self.call.name)))
    }

    fn int(&self, key: &str) -> Result<Option<u64>, SdkError> {
        self.opt(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| SdkError::BadArgument(format!("`{key}` must be an integer, got `{v}`")))
            })
            .transpose()
    }
}

/// Execute a call and return its deterministic text result.
pub fn query(db: &Database, call: &SdkCall) -> Result<String, SdkError> {
    match call.name.as_str() {
        "list_listings" => {
            let a = Args::only(call, &["sort", "category", "limit"])?;
            let sort = match a.opt("sort") {
                None => SortKey::Id,
                Some(s) => SortKey::parse(s)
                    .ok_or_else(|| SdkError::BadArgument(format!("unknown sort `{s}`")))?,
            };
            let limit = match a.int("limit")? {
                Some(0) => return Err(SdkError::BadArgument("`limit` must be at least 1".into())),
                Some(n) => n as usize,
                None => usize::MAX,
            };
            let rows: Vec<Value> = db
                .query_listings(sort, a.category())
                .into_iter()
                .take(limit)
                .map(listing_json)
                .collect();
            Ok(Value::Array(rows).to_string())
        }
        "get_listing" => {
            let a = Args::only(call, &["id"])?;
            let id = a.req("id")?;
            let listing = id
                .parse::<u32>()
                .ok()
                .and_then(|id| db.listing(id))
                .ok_or_else(|| SdkError::BadArgument(format!("no listing with id `{id}`")))?;
            Ok(listing_json(listing).to_string())
        }
        "count_listings" => {
            let a = Args::only(call, &["category"])?;
            Ok(db.query_listings(SortKey::Id, a.category()).len().to_string())
        }
        "favorites_count" => {
            let a = Args::only(call, &["username"])?;
            let name = a.req("username")?;
            let user = db
                .user(name)
                .ok_or_else(|| SdkError::BadArgument(format!("no user `{name}`")))?;
            Ok(user.favorites.len().to_string())
        }
        "min_price" => {
            Args::only(call, &[])?;
            db.query_listings(SortKey::PriceAsc, None)
                .first()
                .map(|l| l.price_text())
                .ok_or_else(|| SdkError::BadArgument("catalog is empty".into()))
        }
        "contact_messages_count" => {
            Args::only(call, &[])?;
            Ok(db.contact_messages.len().to_string())
        }
        "user_exists" => {
            let a = Args::only(call, &["username"])?;
            Ok(db.user(a.req("username")?).is_some().to_string())
        }
        other => Err(SdkError::UnknownCall(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::data::populate;

    #[test]
    fn list_limit_and_sort() {
        let db = populate(42);
        let out = query(&db, &SdkCall::new("list_listings").arg("sort", "price_asc").arg("limit", 1)).unwrap();
        let rows: Vec<Value> = serde_json::from_str(&out).unwrap();
        assert_eq!(rows.len(), 1);
        let min = db.listings.iter().map(|l| l.price_cents).min().unwrap();
        assert_eq!(rows[0]["price_cents"], json!(min));
    }

    #[test]
    fn min_price_matches_catalog() {
        let db = populate(42);
        let min = db.listings.iter().min_by_key(|l| (l.price_cents, l.id)).unwrap();
        assert_eq!(query(&db, &SdkCall::new("min_price")).unwrap(), min.price_text());
    }

    #[test]
    fn unknown_category_yields_empty() {
        let db = populate(42);
        assert_eq!(query(&db, &SdkCall::new("list_listings").arg("category", "castle")).unwrap(), "[]");
        assert_eq!(query(&db, &SdkCall::new("count_listings").arg("category", "castle")).unwrap(), "0");
        assert_eq!(query(&db, &SdkCall::new("count_listings").arg("category", "all")).unwrap(), "60");
    }

    #[test]
    fn counts_sum_to_catalog() {
        let db = populate(42);
        let total: usize = crate::site::data::CATEGORIES
            .iter()
            .map(|c| {
                query(&db, &SdkCall::new("count_listings").arg("category", c))
                    .unwrap()
                    .parse::<usize>()
                    .unwrap()
            })
            .sum();
        assert_eq!(total, 60);
    }

    #[test]
    fn errors() {
        let db = populate(42);
        assert_eq!(
            query(&db, &SdkCall::new("drop_tables")),
            Err(SdkError::UnknownCall("drop_tables".into()))
        );
        assert!(matches!(
            query(&db, &SdkCall::new("get_listing").arg("id", 61)),
            Err(SdkError::BadArgument(_))
        ));
        assert!(matches!(
            query(&db, &SdkCall::new("min_price").arg("x", 1)),
            Err(SdkError::BadArgument(_))
        ));
        assert!(matches!(
            query(&db, &SdkCall::new("list_listings").arg("limit", "many")),
            Err(SdkError::BadArgument(_))
        ));
        assert!(matches!(
            query(&db, &SdkCall::new("favorites_count").arg("username", "zed")),
            Err(SdkError::BadArgument(_))
        ));
    }

    #[test]
    fn simple_counters() {
        let db = populate(42);
        assert_eq!(query(&db, &SdkCall::new("favorites_count").arg("username", "alice")).unwrap(), "0");
        assert_eq!(query(&db, &SdkCall::new("contact_messages_count")).unwrap(), "0");
        assert_eq!(query(&db, &SdkCall::new("user_exists").arg("username", "bob")).unwrap(), "true");
        assert_eq!(query(&db, &SdkCall::new("user_exists").arg("username", "zoe")).unwrap(), "false");
    }
}
