use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::lang::places::conflicts;
use crate::lang::PlaceExpr;

/// A set of locations.
pub type Kappa = BTreeSet<u32>;

/// Dependency context: place expression to the locations it depends on.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Theta {
    pub map: BTreeMap<PlaceExpr, Kappa>,
}

impl Theta {
    pub fn new() -> Theta {
        Theta::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (PlaceExpr, Kappa)>) -> Theta {
        Theta {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, p: &PlaceExpr) -> Kappa {
        self.map.get(p).cloned().unwrap_or_default()
    }

    pub fn contains(&self, p: &PlaceExpr) -> bool {
        self.map.contains_key(p)
    }

    pub fn keys(&self) -> impl Iterator<Item = &PlaceExpr> {
        self.map.keys()
    }

    pub fn set(&mut self, p: PlaceExpr, k: Kappa) {
        self.map.insert(p, k);
    }

    pub fn remove(&mut self, p: &PlaceExpr) {
        self.map.remove(p);
    }

    /// Union of the entries of every listed key.
    pub fn union_of<'a>(&self, ps: impl IntoIterator<Item = &'a PlaceExpr>) -> Kappa {
        let mut out = Kappa::new();
        for p in ps {
            if let Some(k) = self.map.get(p) {
                out.extend(k.iter().copied());
            }
        }
        out
    }

    /// Add `k` to every key conflicting with `p`; returns the keys touched.
    pub fn update_conflicts(&mut self, p: &PlaceExpr, k: &Kappa) -> Vec<PlaceExpr> {
        let mut touched = Vec::new();
        for (q, v) in self.map.iter_mut() {
            if conflicts(p, q) {
                v.extend(k.iter().copied());
                touched.push(q.clone());
            }
        }
        touched
    }

    /// Add `k` to exactly the listed keys that exist.
    pub fn add_to<'a>(&mut self, ps: impl IntoIterator<Item = &'a PlaceExpr>, k: &Kappa) {
        for p in ps {
            if let Some(v) = self.map.get_mut(p) {
                v.extend(k.iter().copied());
            }
        }
    }

    /// Key-wise union.
    pub fn join(&self, other: &Theta) -> Theta {
        let mut out = self.clone();
        out.join_in(other);
        out
    }

    pub fn join_in(&mut self, other: &Theta) {
        for (p, k) in &other.map {
            self.map.entry(p.clone()).or_default().extend(k.iter().copied());
        }
    }

    /// Key-wise difference, keeping only keys with something left.
    pub fn minus(&self, other: &Theta) -> Theta {
        let mut out = Theta::new();
        for (p, k) in &self.map {
            let d: Kappa = match other.map.get(p) {
                Some(o) => k.difference(o).copied().collect(),
                None => k.clone(),
            };
            if !d.is_empty() {
                out.map.insert(p.clone(), d);
            }
        }
        out
    }

    /// Keys whose dependencies all lie within `k`.
    pub fn deps(&self, k: &Kappa) -> BTreeSet<PlaceExpr> {
        self.map
            .iter()
            .filter(|(_, v)| v.is_subset(k))
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Entries whose key is rooted at `root`.
    pub fn restrict_root(&self, root: &str) -> Theta {
        Theta {
            map: self
                .map
                .iter()
                .filter(|(p, _)| p.root == root)
                .map(|(p, k)| (p.clone(), k.clone()))
                .collect(),
        }
    }

    /// Pointwise inclusion on the keys of `self`.
    pub fn subset_of(&self, other: &Theta) -> bool {
        self.map.iter().all(|(p, k)| other.map.get(p).is_some_and(|o| k.is_subset(o)))
    }

    pub fn total_size(&self) -> usize {
        self.map.values().map(|k| k.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(xs: &[u32]) -> Kappa {
        xs.iter().copied().collect()
    }

    fn t() -> PlaceExpr {
        PlaceExpr::var("t")
    }

    #[test]
    fn update_conflicts_tuple_field() {
        let mut th = Theta::from_pairs([(t(), k(&[1, 2])), (t().field(0), k(&[1, 2])), (t().field(1), k(&[1, 2]))]);
        th.update_conflicts(&t().field(1), &k(&[3]));
        assert!(th.get(&t()).contains(&3));
        assert!(th.get(&t().field(1)).contains(&3));
        assert!(!th.get(&t().field(0)).contains(&3));
        let before = th.clone();
        th.update_conflicts(&t(), &k(&[]));
        assert_eq!(th, before);
        th.update_conflicts(&PlaceExpr::var("u"), &k(&[9]));
        assert_eq!(th, before);
    }

    #[test]
    fn deps_join_minus() {
        let x = PlaceExpr::var("x");
        let y = PlaceExpr::var("y");
        let th = Theta::from_pairs([(x.clone(), k(&[1])), (y.clone(), k(&[1, 2]))]);
        assert_eq!(th.deps(&k(&[1])), BTreeSet::from([x.clone()]));
        assert_eq!(th.deps(&k(&[1, 2])).len(), 2);
        assert_eq!(th.join(&Theta::new()), th);
        assert!(th.minus(&th).map.is_empty());
        let a = Theta::from_pairs([(x.clone(), k(&[1, 2]))]);
        let b = Theta::from_pairs([(x.clone(), k(&[1]))]);
        assert_eq!(a.minus(&b), Theta::from_pairs([(x, k(&[2]))]));
    }
}
