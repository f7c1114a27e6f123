//! Windowed edit-distance similarity used by `fuzzy_match`.
//!
//! Similarity of two strings is `1 - lev(a, b) / max(|a|, |b|)` measured in
//! chars. A target matches when some contiguous window of it, whose length
//! lies within `window_slack_pct` percent of the expected length, reaches
//! `threshold_pct` percent similarity. All comparisons are done on integers so
//! the verdict never depends on float rounding.

use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzyConfig {
    pub threshold_pct: u32,
    pub window_slack_pct: u32,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            threshold_pct: 80,
            window_slack_pct: 30,
        }
    }
}

/// Best window found in a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowScore {
    /// Char offset of the window in the target.
    pub start: usize,
    /// Window length in chars.
    pub len: usize,
    pub distance: usize,
    /// `max(|expected|, |window|)`, the similarity denominator.
    pub scale: usize,
}

impl WindowScore {
    pub fn similarity(&self) -> f64 {
        if self.scale == 0 {
            return 1.0;
        }
        1.0 - self.distance as f64 / self.scale as f64
    }

    pub fn passes(&self, threshold_pct: u32) -> bool {
        if self.scale == 0 {
            return true;
        }
        let kept = (self.scale - self.distance) as u64;
        kept * 100 >= threshold_pct as u64 * self.scale as u64
    }

    /// Compare by similarity only (exact rational comparison).
    pub fn cmp_similarity(&self, other: &Self) -> Ordering {
        if self.scale == 0 || other.scale == 0 {
            return (self.scale == 0).cmp(&(other.scale == 0));
        }
        let lhs = (self.scale - self.distance) as u64 * other.scale as u64;
        let rhs = (other.scale - other.distance) as u64 * self.scale as u64;
        lhs.cmp(&rhs)
    }
}

/// Inclusive window-length bounds for an expected string of `expected_len` chars.
pub fn window_bounds(expected_len: usize, slack_pct: u32) -> (usize, usize) {
    let e = expected_len as u64;
    let lo_num = (100 - slack_pct.min(100)) as u64 * e;
    let hi_num = (100 + slack_pct) as u64 * e;
    // smallest L with 100 L >= lo_num, largest L with 100 L <= hi_num
    let lo = lo_num.div_ceil(100) as usize;
    let hi = (hi_num / 100) as usize;
    (lo, hi)
}

/// Search every admissible window of `target` and return the most similar
/// one. Ties go to the earliest start, then the shortest window. `None` when
/// the target has no admissible window at all.
pub fn best_window(expected: &str, target: &str, slack_pct: u32) -> Option<WindowScore> {
    let e: Vec<char> = expected.chars().collect();
    let t: Vec<char> = target.chars().collect();
    let (lo, hi) = window_bounds(e.len(), slack_pct);
    if lo > t.len() {
        return None;
    }

    let m = e.len();
    let mut best: Option<WindowScore> = None;
    let mut prev = vec![0usize; m + 1];
    let mut cur = vec![0usize; m + 1];

    for start in 0..=t.len() {
        let max_len = hi.min(t.len() - start);
        if max_len < lo {
            continue;
        }
        // column k holds lev(e[..j], t[start..start+k]) for every j
        for (j, slot) in prev.iter_mut().enumerate() {
            *slot = j;
        }
        for len in 0..=max_len {
            if len > 0 {
                let wc = t[start + len - 1];
                cur[0] = len;
                for j in 1..=m {
                    let sub = prev[j - 1] + usize::from(e[j - 1] != wc);
                    cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
                }
                std::mem::swap(&mut prev, &mut cur);
            }
            if len < lo {
                continue;
            }
            let candidate = WindowScore {
                start,
                len,
                distance: prev[m],
                scale: m.max(len),
            };
            let better = match &best {
                None => true,
                Some(b) => candidate.cmp_similarity(b) == Ordering::Greater,
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best
}

/// Char-slice of `target` covered by a window.
pub fn window_text(target: &str, score: &WindowScore) -> String {
    target.chars().skip(score.start).take(score.len).collect()
}
