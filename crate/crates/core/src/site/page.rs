//! Page snapshots and the route table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::data::{display_price, Database, SortKey, CATEGORIES};

pub const PAGE_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Link,
    Button,
    Textbox,
    Option,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub element_id: u32,
    pub role: Role,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

/// Flat accessibility-style observation of one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub url: String,
    pub elements: Vec<Element>,
}

impl PageSnapshot {
    pub fn element(&self, id: u32) -> Option<&Element> {
        self.elements.iter().find(|e| e.element_id == id)
    }

    pub fn find(&self, role: Role, label: &str) -> Option<&Element> {
        self.elements
            .iter()
            .find(|e| e.role == role && e.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn is_not_found(&self) -> bool {
        self.elements
            .iter()
            .any(|e| e.role == Role::Text && e.label == NOT_FOUND_LABEL)
    }

    /// Listing rows on a catalog page: `(name, display price)` in order.
    pub fn listing_rows(&self) -> Vec<(String, String)> {
        let mut rows = Vec::new();
        let mut iter = self.elements.iter().peekable();
        while let Some(e) = iter.next() {
            let is_row = e.role == Role::Link
                && e.value.as_deref().is_some_and(|v| v.starts_with("/listings/"));
            if is_row {
                if let Some(next) = iter.peek() {
                    if next.role == Role::Text {
                        let price = next.label.split(" · ").next().unwrap_or("").to_string();
                        rows.push((e.label.clone(), price));
                    }
                }
            }
        }
        rows
    }
}

pub const NOT_FOUND_LABEL: &str = "404 Not Found";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Form {
    Login,
    Signup,
    Contact,
}

impl Form {
    pub fn field_key(self, field: &str) -> String {
        let form = match self {
            Form::Login => "login",
            Form::Signup => "signup",
            Form::Contact => "contact",
        };
        format!("{form}.{field}")
    }
}

/// What interacting with an element does. Kept out of the snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Inert,
    Href(String),
    ToggleFavorite(u32),
    Submit(Form),
    Field(Form, &'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub snapshot: PageSnapshot,
    pub targets: Vec<Target>,
}

impl Page {
    pub fn target(&self, element_id: u32) -> Option<(&Element, &Target)> {
        let idx = element_id.checked_sub(1)? as usize;
        Some((self.snapshot.elements.get(idx)?, self.targets.get(idx)?))
    }
}

/// Per-episode browser state that shapes rendering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionView<'a> {
    pub token: Option<&'a str>,
    pub fields: Option<&'a BTreeMap<String, String>>,
    pub flash: Option<&'a str>,
}

struct Builder {
    url: String,
    elements: Vec<Element>,
    targets: Vec<Target>,
}

impl Builder {
    fn new(url: &str) -> Self {
        Self {
            url: url.to_string(),
            elements: Vec::new(),
            targets: Vec::new(),
        }
    }

    fn push(&mut self, role: Role, label: impl Into<String>, value: Option<String>, target: Target) {
        let element_id = self.elements.len() as u32 + 1;
        self.elements.push(Element {
            element_id,
            role,
            label: label.into(),
            value,
        });
        self.targets.push(target);
    }

    fn text(&mut self, label: impl Into<String>) {
        self.push(Role::Text, label, None, Target::Inert);
    }

    fn link(&mut self, label: impl Into<String>, href: impl Into<String>) {
        let href = href.into();
        self.push(Role::Link, label, Some(href.clone()), Target::Href(href));
    }

    fn option(&mut self, label: impl Into<String>, href: impl Into<String>) {
        let href = href.into();
        self.push(Role::Option, label, Some(href.clone()), Target::Href(href));
    }

    fn button(&mut self, label: impl Into<String>, target: Target) {
        self.push(Role::Button, label, None, target);
    }

    fn textbox(&mut self, label: &str, form: Form, field: &'static str, view: &SessionView<'_>, masked: bool) {
        let value = view
            .fields
            .and_then(|f| f.get(&form.field_key(field)))
            .map(|v| if masked { "*".repeat(v.chars().count()) } else { v.clone() });
        self.push(Role::Textbox, label, value, Target::Field(form, field));
    }

    fn finish(self) -> Page {
        Page {
            snapshot: PageSnapshot {
                url: self.url,
                elements: self.elements,
            },
            targets: self.targets,
        }
    }
}

/// Listing catalog query parsed from `/listings?...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogQuery {
    pub sort: SortKey,
    pub category: Option<String>,
    pub page: usize,
}

impl CatalogQuery {
    pub fn href(&self) -> String {
        let mut parts = Vec::new();
        if self.sort != SortKey::Id {
            parts.push(format!("sort={}", self.sort.as_str()));
        }
        if let Some(c) = &self.category {
            parts.push(format!("category={c}"));
        }
        if self.page != 1 {
            parts.push(format!("page={}", self.page));
        }
        if parts.is_empty() {
            "/listings".to_string()
        } else {
            format!("/listings?{}", parts.join("&"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Route {
    Home,
    Catalog(CatalogQuery),
    Detail(u32),
    Login,
    Signup,
    Favorites,
    Contact,
    NotFound,
}

pub fn parse_route(url: &str) -> Route {
    let Ok(parsed) = url::Url::parse("http://site.local").and_then(|base| base.join(url)) else {
        return Route::NotFound;
    };
    let path = parsed.path();
    let query: Vec<(String, String)> = parsed.query_pairs().into_owned().collect();
    let no_query = query.is_empty();

    match path {
        "/" if no_query => Route::Home,
        "/login" if no_query => Route::Login,
        "/signup" if no_query => Route::Signup,
        "/account/favorites" if no_query => Route::Favorites,
        "/contact" if no_query => Route::Contact,
        "/listings" => {
            let mut q = CatalogQuery {
                sort: SortKey::Id,
                category: None,
                page: 1,
            };
            for (k, v) in query {
                match k.as_str() {
                    "sort" => match SortKey::parse(&v) {
                        Some(s) if s != SortKey::Id => q.sort = s,
                        _ => return Route::NotFound,
                    },
                    "category" => q.category = if v == "all" { None } else { Some(v) },
                    "page" => match v.parse::<usize>() {
                        Ok(p) if p >= 1 => q.page = p,
                        _ => return Route::NotFound,
                    },
                    _ => return Route::NotFound,
                }
            }
            Route::Catalog(q)
        }
        _ if no_query => match path.strip_prefix("/listings/").map(str::parse::<u32>) {
            Some(Ok(id)) => Route::Detail(id),
            _ => Route::NotFound,
        },
        _ => Route::NotFound,
    }
}

/// Render a page. Pure in `(db, url, view)`.
pub fn render(db: &Database, url: &str, view: &SessionView<'_>) -> Page {
    let user = view.token.and_then(|t| db.user_by_token(t));
    let mut b = Builder::new(url);

    b.link("Home", "/");
    b.link("Listings", "/listings");
    b.link("Favorites", "/account/favorites");
    b.link("Contact", "/contact");
    match user {
        Some(u) => b.text(format!("Signed in as {}", u.username)),
        None => {
            b.link("Log in", "/login");
            b.link("Sign up", "/signup");
        }
    }
    if let Some(flash) = view.flash {
        b.text(flash);
    }

    match parse_route(url) {
        Route::Home => {
            b.text("Homestead Rentals");
            b.text(format!("{} listings available", db.listings.len()));
            b.link("Sort by price (low to high)", "/listings?sort=price_asc");
            b.link("Sort by price (high to low)", "/listings?sort=price_desc");
            for c in CATEGORIES {
                b.link(format!("Browse {c} listings"), format!("/listings?category={c}"));
            }
        }
        Route::Catalog(q) => render_catalog(db, &q, &mut b),
        Route::Detail(id) => match db.listing(id) {
            Some(l) => {
                b.text(l.name.clone());
                b.text(format!("Price: {}", display_price(l.price_cents)));
                b.text(format!("Category: {}", l.category));
                b.text(format!("Rating: {} ({} reviews)", l.rating_text(), l.review_count));
                match user {
                    Some(u) if u.favorites.contains(&id) => {
                        b.button("Remove from favorites", Target::ToggleFavorite(id))
                    }
                    Some(_) => b.button("Add to favorites", Target::ToggleFavorite(id)),
                    None => b.link("Log in to save favorites", "/login"),
                }
                b.link("Back to listings", "/listings");
            }
            None => b.text(NOT_FOUND_LABEL),
        },
        Route::Login => {
            b.text("Log in");
            b.textbox("Username", Form::Login, "username", view, false);
            b.textbox("Password", Form::Login, "password", view, true);
            b.button("Log in", Target::Submit(Form::Login));
        }
        Route::Signup => {
            b.text("Create an account");
            b.textbox("Username", Form::Signup, "username", view, false);
            b.textbox("Password", Form::Signup, "password", view, true);
            b.button("Create account", Target::Submit(Form::Signup));
        }
        Route::Favorites => match user {
            Some(u) => {
                b.text(format!("{} favorites", u.favorites.len()));
                for id in &u.favorites {
                    if let Some(l) = db.listing(*id) {
                        b.link(l.name.clone(), format!("/listings/{id}"));
                        b.button(format!("Remove {}", l.name), Target::ToggleFavorite(*id));
                    }
                }
            }
            None => {
                b.text("Please log in to view favorites");
            }
        },
        Route::Contact => {
            b.text("Contact us");
            b.textbox("Name", Form::Contact, "name", view, false);
            b.textbox("Message", Form::Contact, "message", view, false);
            b.button("Send message", Target::Submit(Form::Contact));
        }
        Route::NotFound => b.text(NOT_FOUND_LABEL),
    }
    b.finish()
}

fn render_catalog(db: &Database, q: &CatalogQuery, b: &mut Builder) {
    let rows = db.query_listings(q.sort, q.category.as_deref());
    let pages = rows.len().div_ceil(PAGE_SIZE).max(1);
    if q.page > pages {
        b.text(NOT_FOUND_LABEL);
        return;
    }

    b.text(format!("{} results", rows.len()));
    for (label, sort) in [
        ("Sort by price (low to high)", SortKey::PriceAsc),
        ("Sort by price (high to low)", SortKey::PriceDesc),
    ] {
        let href = CatalogQuery {
            sort,
            category: q.category.clone(),
            page: 1,
        }
        .href();
        b.option(label, href);
    }
    for c in std::iter::once("all").chain(CATEGORIES) {
        let href = CatalogQuery {
            sort: q.sort,
            category: (c != "all").then(|| c.to_string()),
            page: 1,
        }
        .href();
        b.option(format!("Category: {c}"), href);
    }

    for l in rows.iter().skip((q.page - 1) * PAGE_SIZE).take(PAGE_SIZE) {
        b.link(l.name.clone(), format!("/listings/{}", l.id));
        b.text(format!(
            "{} · {} · {} stars ({} reviews)",
            display_price(l.price_cents),
            l.category,
            l.rating_text(),
            l.review_count
        ));
    }

    b.text(format!("Page {} of {}", q.page, pages));
    if q.page > 1 {
        b.link("Previous page", CatalogQuery { page: q.page - 1, ..q.clone() }.href());
    }
    if q.page < pages {
        b.link("Next page", CatalogQuery { page: q.page + 1, ..q.clone() }.href());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::data::populate;

    #[test]
    fn routes() {
        assert_eq!(parse_route("/"), Route::Home);
        assert_eq!(parse_route("/listings/7"), Route::Detail(7));
        assert_eq!(parse_route("/listings/x"), Route::NotFound);
        assert_eq!(parse_route("/nope"), Route::NotFound);
        assert_eq!(parse_route("/login?x=1"), Route::NotFound);
        assert_eq!(
            parse_route("/listings?sort=price_asc&category=loft&page=2"),
            Route::Catalog(CatalogQuery {
                sort: SortKey::PriceAsc,
                category: Some("loft".into()),
                page: 2
            })
        );
        assert_eq!(parse_route("/listings?sort=cheap"), Route::NotFound);
        assert_eq!(parse_route("/listings?page=0"), Route::NotFound);
    }

    #[test]
    fn element_ids_are_positions() {
        let db = populate(42);
        let page = render(&db, "/listings", &SessionView::default());
        for (i, e) in page.snapshot.elements.iter().enumerate() {
            assert_eq!(e.element_id as usize, i + 1);
        }
        assert_eq!(page.targets.len(), page.snapshot.elements.len());
    }

    #[test]
    fn catalog_pages_hold_ten_rows() {
        let db = populate(42);
        let page = render(&db, "/listings?page=6", &SessionView::default());
        assert_eq!(page.snapshot.listing_rows().len(), 10);
        assert!(render(&db, "/listings?page=7", &SessionView::default()).snapshot.is_not_found());
    }

    #[test]
    fn unknown_listing_renders_404() {
        let db = populate(42);
        let page = render(&db, "/listings/61", &SessionView::default());
        assert!(page.snapshot.is_not_found());
        assert_eq!(page.snapshot.url, "/listings/61");
    }

    #[test]
    fn unknown_category_is_empty_not_missing() {
        let db = populate(42);
        let snap = render(&db, "/listings?category=castle", &SessionView::default()).snapshot;
        assert!(!snap.is_not_found());
        assert!(snap.find(Role::Text, "0 results").is_some());
        assert!(snap.listing_rows().is_empty());
    }

    #[test]
    fn password_is_masked() {
        let db = populate(42);
        let mut fields = BTreeMap::new();
        fields.insert("login.password".to_string(), "secret".to_string());
        fields.insert("login.username".to_string(), "alice".to_string());
        let view = SessionView {
            fields: Some(&fields),
            ..Default::default()
        };
        let snap = render(&db, "/login", &view).snapshot;
        let pw = snap
            .elements
            .iter()
            .find(|e| e.role == Role::Textbox && e.label == "Password")
            .unwrap();
        assert_eq!(pw.value.as_deref(), Some("******"));
        let user = snap.find(Role::Textbox, "Username").unwrap();
        assert_eq!(user.value.as_deref(), Some("alice"));
    }
}
