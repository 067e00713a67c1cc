//! Column-sampling operators and entry index sets.
//!
//! A [`ColumnSampler`] is an ordered index set `C ⊂ {0..m−1}` together
//! with the selector matrix it induces: the m×d 0/1 matrix whose j-th
//! column is the standard basis vector for the j-th sampled index.
//! Applying the sampler gathers columns directly; the explicit selector
//! product is kept for tests and small cases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

/// Ordered set of sampled column indices out of `m` total columns.
///
/// Indices are 0-based internally; 1-based inputs are converted at the
/// CLI boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SamplerRepr", into = "SamplerRepr")]
pub struct ColumnSampler {
    m: usize,
    indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SamplerRepr {
    m: usize,
    indices: Vec<usize>,
}

impl TryFrom<SamplerRepr> for ColumnSampler {
    type Error = Error;
    fn try_from(repr: SamplerRepr) -> Result<Self> {
        ColumnSampler::new(repr.m, repr.indices)
    }
}

impl From<ColumnSampler> for SamplerRepr {
    fn from(s: ColumnSampler) -> Self {
        SamplerRepr {
            m: s.m,
            indices: s.indices,
        }
    }
}

impl ColumnSampler {
    /// Build a sampler from explicit indices. Indices are sorted into
    /// ascending order; duplicates or out-of-range values are rejected.
    pub fn new(m: usize, mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Index("sampler needs at least one index".into()));
        }
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Index(format!("duplicate column index {}", w[0])));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= m {
                return Err(Error::Index(format!(
                    "column index {last} out of range for m={m}"
                )));
            }
        }
        Ok(Self { m, indices })
    }

    /// Draw `d` distinct indices uniformly without replacement,
    /// deterministic per seed.
    pub fn uniform(m: usize, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > m {
            return Err(Error::Index(format!(
                "cannot sample {d} distinct columns out of {m}"
            )));
        }
        let mut rng = rng::stream(seed, "column-sampler");
        let mut pool: Vec<usize> = (0..m).collect();
        for i in 0..d {
            let j = rng.random_range(i..m);
            pool.swap(i, j);
        }
        Self::new(m, pool[..d].to_vec())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of sampled columns (`d`).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The explicit m×d selector matrix with a 1 at `(c_j, j)`.
    pub fn selector_matrix(&self) -> DenseMatrix {
        let mut psi = DenseMatrix::zeros(self.m, self.indices.len());
        for (j, &c) in self.indices.iter().enumerate() {
            psi.set(c, j, 1.0);
        }
        psi
    }
}

/// Gather the sampled columns of `mtx` in index order; algebraically
/// equal to `mtx · Ψ` but O(n·d) instead of O(n·m·d).
pub fn sample_columns(mtx: &DenseMatrix, sampler: &ColumnSampler) -> Result<DenseMatrix> {
    if mtx.cols() != sampler.m() {
        return Err(Error::Shape {
            context: "sample_columns".into(),
            expected: format!("{} columns", sampler.m()),
            found: format!("{}", mtx.cols()),
        });
    }
    let d = sampler.len();
    let out = DenseMatrix::from_fn(mtx.rows(), d, |i, j| mtx.get(i, sampler.indices()[j]));
    Ok(out)
}

/// A set of entry coordinates inside an n×m frame, kept sorted and
/// duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryIndexSet {
    n: usize,
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl EntryIndexSet {
    pub fn new(n: usize, m: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Index(format!("duplicate entry {:?}", w[0])));
            }
        }
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= m) {
            return Err(Error::Index(format!(
                "entry ({i},{j}) out of range for {n}x{m}"
            )));
        }
        Ok(Self { n, m, pairs })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            pairs: Vec::new(),
        }
    }

    pub fn frame(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    /// Union with another set over the same frame.
    pub fn union(&self, other: &EntryIndexSet) -> Result<EntryIndexSet> {
        if self.frame() != other.frame() {
            return Err(Error::Shape {
                context: "EntryIndexSet::union".into(),
                expected: format!("{:?}", self.frame()),
                found: format!("{:?}", other.frame()),
            });
        }
        let mut pairs = self.pairs.clone();
        for &p in &other.pairs {
            if self.pairs.binary_search(&p).is_err() {
                pairs.push(p);
            }
        }
        EntryIndexSet::new(self.n, self.m, pairs)
    }
}

/// Every entry of the sampled columns: `{(i, c) : i ∈ [n], c ∈ C}`,
/// of size exactly `n·d`.
pub fn omega_of_columns(n: usize, sampler: &ColumnSampler) -> EntryIndexSet {
    let mut pairs = Vec::with_capacity(n * sampler.len());
    for i in 0..n {
        for &c in sampler.indices() {
            pairs.push((i, c));
        }
    }
    EntryIndexSet::new(n, sampler.m(), pairs).expect("column grid is valid by construction")
}

/// Draw `count` distinct entries uniformly from the n×m grid minus
/// `exclude`, deterministic per seed.
pub fn sample_entries_uniform(
    n: usize,
    m: usize,
    count: usize,
    seed: u64,
    exclude: &EntryIndexSet,
) -> Result<EntryIndexSet> {
    if exclude.frame() != (n, m) {
        return Err(Error::Shape {
            context: "sample_entries_uniform".into(),
            expected: format!("({n},{m})"),
            found: format!("{:?}", exclude.frame()),
        });
    }
    if count == 0 {
        return Ok(EntryIndexSet::empty(n, m));
    }
    let mut allowed: Vec<(usize, usize)> = Vec::with_capacity(n * m - exclude.len());
    for i in 0..n {
        for j in 0..m {
            if !exclude.contains(i, j) {
                allowed.push((i, j));
            }
        }
    }
    if count > allowed.len() {
        return Err(Error::Index(format!(
            "cannot sample {count} entries; only {} are available",
            allowed.len()
        )));
    }
    let mut rng = rng::stream(seed, "entry-sampler");
    for i in 0..count {
        let j = rng.random_range(i..allowed.len());
        allowed.swap(i, j);
    }
    allowed.truncate(count);
    EntryIndexSet::new(n, m, allowed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_matches_reference_example() {
        // m=4, C={0,2,3} in 0-based indexing
        let s = ColumnSampler::new(4, vec![0, 2, 3]).unwrap();
        let psi = s.selector_matrix();
        let expected = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(psi, expected);
    }

    #[test]
    fn full_sampling_gives_identity() {
        let s = ColumnSampler::new(3, vec![0, 1, 2]).unwrap();
        assert_eq!(s.selector_matrix(), DenseMatrix::identity(3));
    }

    #[test]
    fn single_column_selector() {
        let s = ColumnSampler::new(5, vec![4]).unwrap();
        let psi = s.selector_matrix();
        assert_eq!(psi.cols(), 1);
        assert_eq!(psi.get(4, 0), 1.0);
        assert_eq!(psi.column(0).iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(ColumnSampler::new(4, vec![0, 0]).is_err());
        assert!(ColumnSampler::new(4, vec![4]).is_err());
        assert!(ColumnSampler::new(4, vec![]).is_err());
    }

    #[test]
    fn gather_equals_explicit_product() {
        let mut state = 5_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5
        };
        let m = DenseMatrix::from_fn(4, 6, |_, _| next());
        let s = ColumnSampler::new(6, vec![1, 4]).unwrap();
        let gathered = sample_columns(&m, &s).unwrap();
        let product = m.matmul(&s.selector_matrix());
        assert_eq!(gathered, product);
    }

    #[test]
    fn identity_sampling_returns_input() {
        let m = DenseMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let s = ColumnSampler::new(3, vec![0, 1, 2]).unwrap();
        assert_eq!(sample_columns(&m, &s).unwrap(), m);
    }

    #[test]
    fn uniform_is_deterministic_and_exhaustive() {
        let a = ColumnSampler::uniform(100, 20, 42).unwrap();
        let b = ColumnSampler::uniform(100, 20, 42).unwrap();
        assert_eq!(a, b);
        let full = ColumnSampler::uniform(10, 10, 3).unwrap();
        assert_eq!(full.indices(), (0..10).collect::<Vec<_>>());
        assert!(ColumnSampler::uniform(5, 6, 0).is_err());
    }

    #[test]
    fn uniform_marginal_inclusion_probability() {
        // empirical inclusion probability should be d/m = 0.3 per index
        let (m, d, draws) = (10usize, 3usize, 100_000u64);
        let mut hits = vec![0u32; m];
        for seed in 0..draws {
            let s = ColumnSampler::uniform(m, d, seed).unwrap();
            for &c in s.indices() {
                hits[c] += 1;
            }
        }
        for (c, &h) in hits.iter().enumerate() {
            let p = h as f64 / draws as f64;
            assert!(
                (p - 0.3).abs() < 0.01,
                "index {c}: empirical inclusion {p} not within 0.3 ± 0.01"
            );
        }
    }

    #[test]
    fn omega_counts() {
        let s = ColumnSampler::new(4, vec![1]).unwrap();
        let o = omega_of_columns(2, &s);
        assert_eq!(o.pairs(), &[(0, 1), (1, 1)]);

        let s = ColumnSampler::new(3, vec![0, 2]).unwrap();
        assert_eq!(omega_of_columns(3, &s).len(), 6);

        let s = ColumnSampler::new(4, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(omega_of_columns(4, &s).len(), 16);
    }

    #[test]
    fn entry_sampling_respects_exclusion() {
        let excl = {
            let s = ColumnSampler::new(10, vec![3]).unwrap();
            omega_of_columns(10, &s)
        };
        for seed in 0..50 {
            let entries = sample_entries_uniform(10, 10, 25, seed, &excl).unwrap();
            assert_eq!(entries.len(), 25);
            assert!(entries.pairs().iter().all(|&(_, j)| j != 3));
        }
    }

    #[test]
    fn entry_sampling_edges() {
        let empty = EntryIndexSet::empty(2, 2);
        let full = sample_entries_uniform(2, 2, 4, 0, &empty).unwrap();
        assert_eq!(full.len(), 4);
        let none = sample_entries_uniform(2, 2, 0, 0, &empty).unwrap();
        assert!(none.is_empty());
        assert!(sample_entries_uniform(2, 2, 5, 0, &empty).is_err());
    }

    #[test]
    fn sampler_json_round_trip() {
        let s = ColumnSampler::new(7, vec![0, 3, 6]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"m":7,"indices":[0,3,6]}"#);
        let back: ColumnSampler = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        // invariant enforcement on deserialize
        let bad: std::result::Result<ColumnSampler, _> =
            serde_json::from_str(r#"{"m":3,"indices":[0,0]}"#);
        assert!(bad.is_err());
    }
}
