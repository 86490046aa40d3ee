//! Graded multi-index sets shared by all jets of a given shape.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// All multi-indices over `nvars` variables with total order `<= max_order`,
/// ranked by total degree and then lexicographically.
///
/// The graded ranking makes the set of order `m - 1` a prefix of the set of
/// order `m`, so truncation never needs a remapping table.
#[derive(Debug)]
pub(crate) struct MultiIndexSet {
    nvars: usize,
    indices: Vec<Vec<u8>>,
    /// `pairs[k]` lists every `(i, j)` with `indices[i] + indices[j] == indices[k]`.
    pairs: Vec<Vec<(u32, u32)>>,
    /// `raise[k * nvars + v]` is the rank of `indices[k] + e_v`, if inside the set.
    raise: Vec<Option<u32>>,
    /// `alpha!` for each index.
    factorial: Vec<f64>,
    rank: HashMap<Vec<u8>, usize>,
}

impl MultiIndexSet {
    fn build(nvars: usize, max_order: usize) -> Self {
        let mut indices = Vec::new();
        let mut degree = Vec::new();
        for d in 0..=max_order {
            let mut current = vec![0u8; nvars];
            push_with_degree(&mut indices, &mut current, 0, d);
            degree.resize(indices.len(), d);
        }
        let rank: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();

        let mut pairs = vec![Vec::new(); indices.len()];
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degree[i] + degree[j] > max_order {
                    // degrees are sorted, nothing further in this row fits
                    break;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                if let Some(&k) = rank.get(&sum) {
                    pairs[k].push((i as u32, j as u32));
                }
            }
        }

        let mut raise = Vec::with_capacity(indices.len() * nvars);
        for a in &indices {
            for v in 0..nvars {
                let mut b = a.clone();
                b[v] += 1;
                raise.push(rank.get(&b).map(|&r| r as u32));
            }
        }

        let factorial = indices
            .iter()
            .map(|a| a.iter().map(|&p| factorial(p as usize)).product())
            .collect();

        Self {
            nvars,
            indices,
            pairs,
            raise,
            factorial,
            rank,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.indices.len()
    }

    pub(crate) fn index(&self, k: usize) -> &[u8] {
        &self.indices[k]
    }

    pub(crate) fn pairs(&self, k: usize) -> &[(u32, u32)] {
        &self.pairs[k]
    }

    pub(crate) fn raise(&self, k: usize, var: usize) -> Option<usize> {
        self.raise[k * self.nvars + var].map(|r| r as usize)
    }

    pub(crate) fn factorial(&self, k: usize) -> f64 {
        self.factorial[k]
    }

    pub(crate) fn rank_of(&self, alpha: &[u8]) -> Option<usize> {
        self.rank.get(alpha).copied()
    }
}

fn push_with_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take as u8;
        push_with_degree(out, current, var + 1, remaining - take);
    }
    current[var] = 0;
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

type Cache = Mutex<HashMap<(usize, usize), Arc<MultiIndexSet>>>;

/// Shared, lazily built index set for `(nvars, max_order)`.
pub(crate) fn index_set(nvars: usize, max_order: usize) -> Arc<MultiIndexSet> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("index set cache poisoned");
    guard
        .entry((nvars, max_order))
        .or_insert_with(|| Arc::new(MultiIndexSet::build(nvars, max_order)))
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (factorial(n) / (factorial(k) * factorial(n - k))).round() as usize
    }

    #[test]
    fn sizes_match_stars_and_bars() {
        for nvars in 1..=4 {
            for order in 0..=7 {
                let set = index_set(nvars, order);
                assert_eq!(set.len(), binomial(order + nvars, nvars));
            }
        }
    }

    #[test]
    fn lower_orders_are_prefixes() {
        let big = index_set(3, 7);
        for order in 0..7 {
            let small = index_set(3, order);
            for k in 0..small.len() {
                assert_eq!(small.index(k), big.index(k));
            }
            let next: usize = big.index(small.len()).iter().map(|&p| p as usize).sum();
            assert_eq!(next, order + 1);
        }
    }

    #[test]
    fn pairs_cover_every_split() {
        let set = index_set(2, 4);
        for k in 0..set.len() {
            let a = set.index(k);
            let expected: usize = a.iter().map(|&p| p as usize + 1).product();
            assert_eq!(set.pairs(k).len(), expected);
        }
    }

    #[test]
    fn raise_respects_order_cap() {
        let set = index_set(2, 2);
        let top = set.rank_of(&[1, 1]).unwrap();
        assert_eq!(set.raise(top, 0), None);
        let e1 = set.rank_of(&[1, 0]).unwrap();
        assert_eq!(set.raise(e1, 1), set.rank_of(&[1, 1]));
    }
}
