//! Bag and set arithmetic for the bounded-multiplicity tropical carriers.

use num_traits::CheckedSub;

use super::value::{Cost, Rational};
use super::PopsError;

/// The `p + 1` smallest entries of `items`, ascending and ∞-padded.
pub fn min_p(mut items: Vec<Cost>, p: u32) -> Vec<Cost> {
    let width = p as usize + 1;
    items.sort();
    items.truncate(width);
    items.resize(width, Cost::Inf);
    items
}

/// Entries within `eta` of the minimum, ascending and duplicate-free.
/// An empty input or an ∞ minimum yields `{∞}`.
pub fn min_eta(mut items: Vec<Cost>, eta: Rational) -> Result<Vec<Cost>, PopsError> {
    items.sort();
    items.dedup();
    let Some(&Cost::Finite(lo)) = items.first() else {
        return Ok(vec![Cost::Inf]);
    };
    let mut kept = Vec::with_capacity(items.len());
    for c in items {
        match c {
            Cost::Finite(x) => {
                let gap = x.checked_sub(&lo).ok_or(PopsError::Overflow)?;
                if gap <= eta {
                    kept.push(c);
                } else {
                    break;
                }
            }
            Cost::Inf => break,
        }
    }
    Ok(kept)
}

pub(crate) fn pairwise_sums(a: &[Cost], b: &[Cost]) -> Result<Vec<Cost>, PopsError> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x.checked_add(*y)?);
        }
    }
    Ok(out)
}

pub(crate) fn union(a: &[Cost], b: &[Cost]) -> Vec<Cost> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Multiset difference `y ∖ x` of two ascending bags.
pub(crate) fn bag_difference(y: &[Cost], x: &[Cost]) -> Vec<Cost> {
    let mut out = Vec::new();
    let mut j = 0;
    for c in y {
        while j < x.len() && x[j] < *c {
            j += 1;
        }
        if j < x.len() && x[j] == *c {
            j += 1;
        } else {
            out.push(*c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs(xs: &[i64]) -> Vec<Cost> {
        xs.iter().map(|&x| Cost::int(x)).collect()
    }

    #[test]
    fn min_p_pads_and_truncates() {
        assert_eq!(min_p(costs(&[9, 3, 7, 3]), 2), costs(&[3, 3, 7]));
        assert_eq!(min_p(costs(&[4]), 2), vec![Cost::int(4), Cost::Inf, Cost::Inf]);
    }

    #[test]
    fn min_eta_keeps_window() {
        let eta = Rational::new(13, 2);
        assert_eq!(min_eta(costs(&[3, 7, 5, 9, 10]), eta).unwrap(), costs(&[3, 5, 7, 9]));
        assert_eq!(min_eta(vec![], eta).unwrap(), vec![Cost::Inf]);
        assert_eq!(min_eta(vec![Cost::Inf, Cost::Inf], eta).unwrap(), vec![Cost::Inf]);
    }

    #[test]
    fn difference_is_multiset() {
        assert_eq!(bag_difference(&costs(&[1, 1, 3]), &costs(&[1, 5])), costs(&[1, 3]));
        assert_eq!(bag_difference(&[Cost::int(2), Cost::Inf], &[Cost::int(2), Cost::Inf]), Vec::<Cost>::new());
    }
}
