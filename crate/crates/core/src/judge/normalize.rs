//! Text normalization applied to both sides of every check.

/// Canonicalize a piece of answer or expected text.
///
/// Steps, in order: lowercase, drop `$`, drop commas sitting between two
/// ASCII digits (thousands separators), collapse whitespace runs to a single
/// space and trim the ends.
pub fn normalize(raw: &str) -> String {
    let lowered: Vec<char> = raw.to_lowercase().chars().filter(|c| *c != '$').collect();

    let mut out = String::with_capacity(lowered.len());
    for (i, &c) in lowered.iter().enumerate() {
        if c == ',' && i > 0 && i + 1 < lowered.len() {
            if lowered[i - 1].is_ascii_digit() && lowered[i + 1].is_ascii_digit() {
                continue;
            }
        }
        out.push(c);
    }

    out.split_whitespace().collect::<Vec<_>>().join(" ")
}
