//! Ranking extraction and repair for model output.
//!
//! Reasoning models wrap the answer in arbitrary prose and often emit
//! intermediate lists while thinking, so extraction takes the LAST
//! well-formed JSON array of integers, fenced or bare. Whatever comes back,
//! the result is always a valid ranking; defects are recorded as repairs
//! instead of errors.

use serde::Serialize;

/// A repair action applied while turning model output into a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Repair {
    /// Dropped an out-of-range entry.
    Oob,
    /// Dropped a duplicate entry, keeping the first occurrence.
    Dup,
    /// Appended missing indices in prompt order to reach full length.
    Fill,
    /// No array found; the ranking is the prompt order.
    NoParse,
}

impl std::fmt::Display for Repair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Repair::Oob => "oob",
            Repair::Dup => "dup",
            Repair::Fill => "fill",
            Repair::NoParse => "no_parse",
        })
    }
}

/// Last well-formed JSON array of integers in the text, if any.
pub fn extract_last_int_array(text: &str) -> Option<Vec<i64>> {
    let mut found = None;
    let mut from = 0;
    while let Some(rel) = text[from..].find('[') {
        let open = from + rel;
        if let Some(rel_close) = text[open + 1..].find(']') {
            let close = open + 1 + rel_close;
            if let Ok(values) = serde_json::from_str::<Vec<i64>>(&text[open..=close]) {
                found = Some(values);
            }
        }
        from = open + 1;
    }
    found
}

fn note(repairs: &mut Vec<Repair>, repair: Repair) {
    if !repairs.contains(&repair) {
        repairs.push(repair);
    }
}

/// Turn raw model text into a duplicate-free ranking of 1-based prompt
/// indices with length `min(topk, n)`.
///
/// `fallback_order` is the ordering shown in the prompt (a permutation of
/// 1..=n); it completes under-length outputs and replaces unparseable ones.
/// Repair tags record, in first-trigger order, what had to be fixed.
pub fn parse_ranking(
    raw: &str,
    n: usize,
    topk: usize,
    fallback_order: &[usize],
) -> (Vec<usize>, Vec<Repair>) {
    debug_assert!(n >= 1);
    debug_assert_eq!(fallback_order.len(), n);
    let want = topk.min(n);

    let Some(values) = extract_last_int_array(raw) else {
        let ranking = fallback_order.iter().copied().take(want).collect();
        return (ranking, vec![Repair::NoParse]);
    };

    let mut repairs = Vec::new();
    let mut seen = vec![false; n + 1];
    let mut ranking = Vec::with_capacity(want);
    for value in values {
        if value < 1 || value > n as i64 {
            note(&mut repairs, Repair::Oob);
            continue;
        }
        let index = value as usize;
        if seen[index] {
            note(&mut repairs, Repair::Dup);
            continue;
        }
        seen[index] = true;
        ranking.push(index);
    }

    if ranking.len() < want {
        note(&mut repairs, Repair::Fill);
        for &index in fallback_order {
            if ranking.len() >= want {
                break;
            }
            if index >= 1 && index <= n && !seen[index] {
                seen[index] = true;
                ranking.push(index);
            }
        }
        // A malformed fallback cannot leave the ranking short.
        for (index, was_seen) in seen.iter_mut().enumerate().skip(1) {
            if ranking.len() >= want {
                break;
            }
            if !*was_seen {
                *was_seen = true;
                ranking.push(index);
            }
        }
    }

    ranking.truncate(want);
    (ranking, repairs)
}
