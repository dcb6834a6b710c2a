//! Permutations of `{0, …, n−1}` and their cycle structure.
//!
//! Storage is 0-based: `map[i] = σ(i)`. Constructors taking 1-based images
//! are provided for fixtures written in the usual notation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = CraneError;
    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

/// Canonical cycle form: each cycle starts at its smallest element and
/// cycles are sorted by that element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleDecomposition {
    pub cycles: Vec<Vec<usize>>,
}

impl CycleDecomposition {
    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    /// Rebuild the permutation the cycles came from.
    pub fn recompose(&self) -> Permutation {
        let n: usize = self.cycles.iter().map(Vec::len).sum();
        let mut map = vec![0; n];
        for c in &self.cycles {
            for (k, &i) in c.iter().enumerate() {
                map[i] = c[(k + 1) % c.len()];
            }
        }
        Permutation { map }
    }
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(CraneError::Argument("permutation must have n ≥ 1".into()));
        }
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(CraneError::Argument(format!(
                    "{map:?} is not a bijection on 0..{n}"
                )));
            }
        }
        Ok(Self { map })
    }

    /// From 1-based images, e.g. `[3, 1, 2, 4]` for σ(1)=3, σ(2)=1, ….
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(CraneError::Argument("1-based images must be ≥ 1".into()));
        }
        Self::new(images.iter().map(|&j| j - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|j| j + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { map: inv }
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(CraneError::Argument("composing permutations of different size".into()));
        }
        Ok(Permutation {
            map: other.map.iter().map(|&j| self.map[j]).collect(),
        })
    }

    pub fn decompose(&self) -> CycleDecomposition {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                cycle.push(i);
                i = self.map[i];
            }
            cycles.push(cycle);
        }
        CycleDecomposition { cycles }
    }

    pub fn cycle_count(&self) -> usize {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if !visited[start] {
                count += 1;
                let mut i = start;
                while !visited[i] {
                    visited[i] = true;
                    i = self.map[i];
                }
            }
        }
        count
    }

    /// Uniform draw from all n! permutations (Fisher–Yates).
    pub fn random(n: usize, rng: &mut StreamRng) -> Permutation {
        let mut map: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            map.swap(i, j);
        }
        Permutation { map }
    }

    /// All permutations of `0..n` in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        let mut next = Some((0..n).collect::<Vec<_>>());
        std::iter::from_fn(move || {
            let cur = next.take()?;
            let mut a = cur.clone();
            if let Some(i) = (0..a.len().saturating_sub(1)).rev().find(|&i| a[i] < a[i + 1]) {
                let j = (i + 1..a.len()).rev().find(|&j| a[j] > a[i]).unwrap();
                a.swap(i, j);
                a[i + 1..].reverse();
                next = Some(a);
            }
            Some(Permutation { map: cur })
        })
    }
}

/// Expected number of cycles of a uniform random permutation of n elements:
/// the harmonic number H_n.
pub fn expected_cycle_count(n: usize) -> f64 {
    // sum small terms first
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

/// Variance of the cycle count: H_n − H_n^{(2)}.
pub fn cycle_count_variance(n: usize) -> f64 {
    (1..=n)
        .rev()
        .map(|k| {
            let k = k as f64;
            1.0 / k - 1.0 / (k * k)
        })
        .sum()
}
