//! Stochastic matrices, Reference Models and the maps between them.
//!
//! A Markov kernel `K` of width `C` induces the Reference Model
//! `W'₀ = (1/C)·Σ_{i=1..C} Kⁱ`. When `W'₀` is symmetric with spectrum in
//! `[0, 1]` the map can be inverted eigenvalue by eigenvalue, since
//! `x ↦ (1/C)·Σ xⁱ` is a bijection of `[0, 1]`.

use std::collections::VecDeque;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Absolute tolerance on row sums of stochastic matrices and probability vectors.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Asymmetry and eigenvalue slack accepted by [`kernel_from_reference`].
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Bisection tolerance of [`invert_geometric_sum`].
pub const BISECTION_TOL: f64 = 1e-12;
/// Power-iteration convergence threshold (L1 between successive iterates).
pub const STATIONARY_TOL: f64 = 1e-12;
pub const STATIONARY_MAX_ITER: usize = 1_000_000;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (j, &x) in values.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(0, j));
            }
            if x < 0.0 {
                return Err(Error::NegativeEntry(0, j));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(ProbVector(values))
    }

    pub fn uniform(dim: usize) -> Self {
        ProbVector(vec![1.0 / dim as f64; dim])
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ProbVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Square row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(Matrix);

/// Checks that `raw` is square, finite, nonnegative, and that every row sums
/// to one within [`ROW_SUM_TOL`].
pub fn validate_stochastic(raw: Matrix) -> Result<StochasticMatrix> {
    if raw.rows() != raw.cols() {
        return Err(Error::NotSquare {
            rows: raw.rows(),
            cols: raw.cols(),
        });
    }
    for i in 0..raw.rows() {
        let row = raw.row(i);
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(i, j));
            }
            if x < 0.0 {
                return Err(Error::NegativeEntry(i, j));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowSumViolation(i, sum));
        }
    }
    Ok(StochasticMatrix(raw))
}

impl StochasticMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        validate_stochastic(Matrix::from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Whether the support graph (edges where `K[i][j] > 0`) is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        let reaches_all = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for (v, seen_v) in seen.iter_mut().enumerate() {
                    let w = if forward {
                        self.0[(u, v)]
                    } else {
                        self.0[(v, u)]
                    };
                    if w > 0.0 && !*seen_v {
                        *seen_v = true;
                        queue.push_back(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        n > 0 && reaches_all(true) && reaches_all(false)
    }

    pub fn to_text(&self) -> String {
        self.0.to_text()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.0.save(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        validate_stochastic(Matrix::load(path)?)
    }
}

impl std::ops::Index<(usize, usize)> for StochasticMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Identity-embedding word2vec without softmax: row `i` of `context_probs`
/// is the probability of each word among the `width` words following word `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    context_probs: StochasticMatrix,
    width: usize,
}

impl ReferenceModel {
    pub fn new(context_probs: StochasticMatrix, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter("width must be at least 1".into()));
        }
        Ok(ReferenceModel {
            context_probs,
            width,
        })
    }

    pub fn context_probs(&self) -> &StochasticMatrix {
        &self.context_probs
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn vocab_size(&self) -> usize {
        self.context_probs.dim()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.context_probs.row(i)
    }
}

/// `num_blocks` contiguous runs of `block_size` duplicated rows, starting at row 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub num_blocks: usize,
    pub block_size: usize,
}

impl BlockSpec {
    pub fn new(num_blocks: usize, block_size: usize) -> Self {
        BlockSpec {
            num_blocks,
            block_size,
        }
    }

    pub fn structured_rows(&self) -> usize {
        self.num_blocks * self.block_size
    }

    pub fn check(&self, vocab_size: usize) -> Result<()> {
        if self.num_blocks == 0 || self.block_size == 0 || self.structured_rows() > vocab_size {
            return Err(Error::BlockOverflow(
                self.num_blocks,
                self.block_size,
                vocab_size,
            ));
        }
        Ok(())
    }

    pub fn block(&self, b: usize) -> Range<usize> {
        b * self.block_size..(b + 1) * self.block_size
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.num_blocks).map(|b| self.block(b))
    }

    /// Block index of row `i`, `None` for unstructured rows.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        (i < self.structured_rows()).then(|| i / self.block_size)
    }
}

/// One Dirichlet(1, …, 1) draw: normalized standard exponentials.
pub(crate) fn sample_simplex<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
    row
}

/// Kernel whose rows are independent uniform draws on the simplex.
pub fn random_kernel(vocab_size: usize, seed: u64) -> Result<StochasticMatrix> {
    if vocab_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "vocabulary size must be at least 2, got {vocab_size}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut m = Matrix::zeros(vocab_size, vocab_size);
    for i in 0..vocab_size {
        m.row_mut(i)
            .copy_from_slice(&sample_simplex(&mut rng, vocab_size));
    }
    validate_stochastic(m)
}

/// Kernel made of `spec.num_blocks` blocks of identical rows followed by
/// independently drawn rows.
pub fn block_kernel(vocab_size: usize, spec: BlockSpec, seed: u64) -> Result<StochasticMatrix> {
    if vocab_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "vocabulary size must be at least 2, got {vocab_size}"
        )));
    }
    spec.check(vocab_size)?;
    let mut rng = rng_from_seed(seed);
    let mut m = Matrix::zeros(vocab_size, vocab_size);
    for block in spec.blocks() {
        let row = sample_simplex(&mut rng, vocab_size);
        for i in block {
            m.row_mut(i).copy_from_slice(&row);
        }
    }
    for i in spec.structured_rows()..vocab_size {
        m.row_mut(i)
            .copy_from_slice(&sample_simplex(&mut rng, vocab_size));
    }
    validate_stochastic(m)
}

/// Symmetric stochastic kernel with spectrum in `[0, 1]`.
///
/// Built as the lazy version `(I + S)/2` of the walk
/// `S = I − (D − A)/d_max` on a random weighted graph `A`, so every entry is
/// nonnegative and every eigenvalue of `S` in `[−1, 1]` maps into `[0, 1]`.
pub fn symmetric_kernel(vocab_size: usize, seed: u64) -> Result<StochasticMatrix> {
    if vocab_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "vocabulary size must be at least 2, got {vocab_size}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let n = vocab_size;
    let mut weights = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let w: f64 = rng.sample(Exp1);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| weights.row(i).iter().sum()).collect();
    // d_max scaled up by a random factor so the diagonal mass varies with the seed.
    let scale = degrees.iter().cloned().fold(0.0, f64::max) * rng.random_range(1.0..2.0);
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let walk = if i == j {
                1.0 - degrees[i] / scale
            } else {
                weights[(i, j)] / scale
            };
            let lazy = 0.5 * walk + if i == j { 0.5 } else { 0.0 };
            k[(i, j)] = lazy;
        }
    }
    // Exact symmetry and unit row sums: set the diagonal from the off-diagonal mass.
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| k[(i, j)]).sum();
        k[(i, i)] = 1.0 - off;
    }
    validate_stochastic(k)
}

/// Stationary distribution `μ = μK` by power iteration from the uniform vector.
pub fn stationary(kernel: &StochasticMatrix) -> Result<ProbVector> {
    stationary_with(kernel, STATIONARY_TOL, STATIONARY_MAX_ITER)
}

pub fn stationary_with(kernel: &StochasticMatrix, tol: f64, max_iter: usize) -> Result<ProbVector> {
    if !kernel.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let n = kernel.dim();
    let k = kernel.matrix();
    let mut mu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut cesaro = mu.clone();
    for iter in 1..=max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (x, &kij) in next.iter_mut().zip(k.row(i)) {
                *x += m * kij;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let dist: f64 = mu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut mu, &mut next);
        for (c, &m) in cesaro.iter_mut().zip(&mu) {
            *c += m;
        }
        if dist < tol {
            return Ok(ProbVector::from_raw(mu));
        }
        if iter == max_iter {
            let count = (max_iter + 1) as f64;
            cesaro.iter_mut().for_each(|c| *c /= count);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        averaged: cesaro,
    })
}

/// `W'₀ = (1/C)·Σ_{i=1..C} Kⁱ`.
pub fn reference_from_kernel(kernel: &StochasticMatrix, width: usize) -> Result<ReferenceModel> {
    if width == 0 {
        return Err(Error::InvalidParameter("width must be at least 1".into()));
    }
    if width == 1 {
        return ReferenceModel::new(kernel.clone(), 1);
    }
    let k = kernel.matrix();
    let mut power = k.clone();
    let mut sum = k.clone();
    for _ in 1..width {
        power = power.matmul(k)?;
        sum.add_assign(&power);
    }
    sum.scale(1.0 / width as f64);
    ReferenceModel::new(validate_stochastic(sum)?, width)
}

fn check_unit_interval(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::DomainError(x))
    }
}

/// `x ↦ (1/C)·Σ_{i=1..C} xⁱ` on `[0, 1]`.
pub fn geometric_sum_map(x: f64, width: usize) -> Result<f64> {
    check_unit_interval(x)?;
    if width == 0 {
        return Err(Error::InvalidParameter("width must be at least 1".into()));
    }
    Ok(geometric_sum_unchecked(x, width))
}

fn geometric_sum_unchecked(x: f64, width: usize) -> f64 {
    let mut power = 1.0;
    let mut sum = 0.0;
    for _ in 0..width {
        power *= x;
        sum += power;
    }
    sum / width as f64
}

/// Inverse of [`geometric_sum_map`] by bisection on `[0, 1]`.
pub fn invert_geometric_sum(y: f64, width: usize) -> Result<f64> {
    check_unit_interval(y)?;
    if width == 0 {
        return Err(Error::InvalidParameter("width must be at least 1".into()));
    }
    if width == 1 || y == 0.0 || y == 1.0 {
        return Ok(y);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // 1e-12 residual needs far fewer halvings; run to f64 resolution anyway.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = geometric_sum_unchecked(mid, width);
        if f == y {
            return Ok(mid);
        }
        if f < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    debug_assert!((geometric_sum_unchecked(x, width) - y).abs() < BISECTION_TOL);
    Ok(x)
}

/// Recovers a kernel `K` with `reference_from_kernel(K, C) = W'₀` from a
/// symmetric Reference Model with spectrum in `[0, 1]`.
pub fn kernel_from_reference(rm: &ReferenceModel) -> Result<StochasticMatrix> {
    let w = rm.context_probs().matrix();
    let n = w.rows();
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((w[(i, j)] - w[(j, i)]).abs());
        }
    }
    if asym > SPECTRAL_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (w[(i, j)] + w[(j, i)]));
    let eig = SymmetricEigen::new(sym);
    let mut inverted = Vec::with_capacity(n);
    for &lambda in eig.eigenvalues.iter() {
        if !(-SPECTRAL_TOL..=1.0 + SPECTRAL_TOL).contains(&lambda) {
            return Err(Error::EigenvalueOutOfRange(lambda));
        }
        inverted.push(invert_geometric_sum(lambda.clamp(0.0, 1.0), rm.width())?);
    }
    let p = &eig.eigenvectors;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|l| p[(i, l)] * inverted[l] * p[(j, l)]).sum();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let v = k[(i, j)];
            if v < 0.0 {
                if v < -SPECTRAL_TOL {
                    return Err(Error::NotRepresentable {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                k[(i, j)] = 0.0;
            }
        }
    }
    validate_stochastic(k)
}

/// Exact compression of two identical rows `keep` and `drop`.
///
/// Returns the merge map `E[drop ↦ keep]` (the `V×V` identity with column
/// `drop` removed and a 1 at `(drop, keep)`) and `W'₀` with row `drop`
/// deleted. Their product is `W'₀` again, bit for bit.
pub fn compress_duplicates(
    rm: &ReferenceModel,
    keep: usize,
    drop: usize,
) -> Result<(Matrix, Matrix)> {
    let n = rm.vocab_size();
    for idx in [keep, drop] {
        if idx >= n {
            return Err(Error::IndexOutOfRange {
                index: idx,
                size: n,
            });
        }
    }
    if keep == drop {
        return Err(Error::InvalidParameter(
            "cannot merge a row with itself".into(),
        ));
    }
    let max_diff = rm
        .row(keep)
        .iter()
        .zip(rm.row(drop))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_diff > ROW_SUM_TOL {
        return Err(Error::RowsNotEqual(keep, drop, max_diff));
    }
    let column = |i: usize| if i < drop { i } else { i - 1 };
    let mut merge = Matrix::zeros(n, n - 1);
    for i in 0..n {
        if i != drop {
            merge[(i, column(i))] = 1.0;
        }
    }
    merge[(drop, column(keep))] = 1.0;
    let mut reduced = Matrix::zeros(n - 1, n);
    for i in (0..n).filter(|&i| i != drop) {
        reduced.row_mut(column(i)).copy_from_slice(rm.row(i));
    }
    Ok((merge, reduced))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sm(rows: &[[f64; 2]]) -> StochasticMatrix {
        StochasticMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(StochasticMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).is_ok());
        match StochasticMatrix::from_rows(&[[0.5, 0.5], [0.3, 0.6]]) {
            Err(Error::RowSumViolation(1, s)) => assert!((s - 0.9).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            StochasticMatrix::from_rows(&[[1.2, -0.2], [0.0, 1.0]]),
            Err(Error::NegativeEntry(0, 1))
        ));
        assert!(matches!(
            validate_stochastic(Matrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn random_kernel_is_deterministic_and_stochastic() {
        assert_eq!(random_kernel(2, 11).unwrap(), random_kernel(2, 11).unwrap());
        assert_ne!(random_kernel(5, 11).unwrap(), random_kernel(5, 12).unwrap());
        let k = random_kernel(50, 3).unwrap();
        for i in 0..50 {
            let s: f64 = k.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
        assert!(random_kernel(1, 0).is_err());
    }

    #[test]
    fn dirichlet_mean_is_one_third() {
        // Dirichlet(1,1,1) has mean 1/3 per coordinate; std of the mean over
        // 10⁴ draws is about 0.0024, so 0.01 is a 4σ band.
        let mut sums = [0.0; 9];
        let n = 10_000;
        for seed in 0..n {
            let k = random_kernel(3, seed).unwrap();
            for (s, x) in sums.iter_mut().zip(k.matrix().as_slice()) {
                *s += x;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 1.0 / 3.0).abs() < 0.01, "{}", s / n as f64);
        }
    }

    #[test]
    fn block_kernel_layout() {
        let k = block_kernel(10, BlockSpec::new(2, 3), 5).unwrap();
        assert_eq!(k.row(0), k.row(1));
        assert_eq!(k.row(0), k.row(2));
        assert_eq!(k.row(3), k.row(5));
        assert_ne!(k.row(0), k.row(3));
        for i in 6..10 {
            for j in i + 1..10 {
                assert_ne!(k.row(i), k.row(j));
            }
            assert_ne!(k.row(i), k.row(0));
        }
        assert!(matches!(
            block_kernel(10, BlockSpec::new(3, 4), 5),
            Err(Error::BlockOverflow(3, 4, 10))
        ));
    }

    #[test]
    fn block_kernel_figure_grid_settings() {
        let spec = BlockSpec::new(8, 5);
        let k = block_kernel(50, spec, 1).unwrap();
        for block in spec.blocks() {
            for i in block.clone() {
                assert_eq!(k.row(i), k.row(block.start));
            }
        }
        let spec = BlockSpec::new(160, 5);
        assert_eq!(spec.structured_rows(), 800);
        let k = block_kernel(1000, spec, 1).unwrap();
        assert_eq!(k.row(795), k.row(799));
        assert_ne!(k.row(799), k.row(800));
    }

    #[test]
    fn block_rows_are_distinct_across_blocks() {
        let spec = BlockSpec::new(8, 5);
        for seed in 0..20 {
            let k = block_kernel(50, spec, seed).unwrap();
            for a in 0..8 {
                for b in a + 1..8 {
                    let l1: f64 = k
                        .row(a * 5)
                        .iter()
                        .zip(k.row(b * 5))
                        .map(|(x, y)| (x - y).abs())
                        .sum();
                    assert!(l1 > 0.0);
                }
            }
        }
    }

    #[test]
    fn stationary_examples() {
        let mu = stationary(&sm(&[[0.6, 0.4], [0.4, 0.6]])).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-12 && (mu[1] - 0.5).abs() < 1e-12);
        // μ = μK with K = [[.5,.5],[1,0]]: μ₀ = .5μ₀ + μ₁ ⇒ μ₀ = 2μ₁ ⇒ (2/3, 1/3).
        let mu = stationary(&sm(&[[0.5, 0.5], [1.0, 0.0]])).unwrap();
        assert!((mu[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!((mu[1] - 1.0 / 3.0).abs() < 1e-11);
        assert!(matches!(
            stationary(&sm(&[[1.0, 0.0], [0.0, 1.0]])),
            Err(Error::NotIrreducible)
        ));
    }

    #[test]
    fn periodic_chain_reports_cesaro_average() {
        // Bipartite chain: iterates from uniform oscillate, the average converges
        // to the stationary (1/2, 1/4, 1/4).
        let k = StochasticMatrix::from_rows(&[[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
            .unwrap();
        match stationary_with(&k, 1e-12, 10_000) {
            Err(Error::NoConvergence { averaged, .. }) => {
                assert!((averaged[0] - 0.5).abs() < 1e-3);
                assert!((averaged[1] - 0.25).abs() < 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stationary_is_fixed_point() {
        for seed in 0..5 {
            let k = random_kernel(30, seed).unwrap();
            let mu = stationary(&k).unwrap();
            let mut next = vec![0.0; 30];
            for i in 0..30 {
                for j in 0..30 {
                    next[j] += mu[i] * k[(i, j)];
                }
            }
            let l1: f64 = next
                .iter()
                .zip(mu.as_slice())
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(l1 < 1e-10);
        }
    }

    #[test]
    fn reference_examples() {
        let k = sm(&[[0.6, 0.4], [0.4, 0.6]]);
        assert_eq!(reference_from_kernel(&k, 1).unwrap().context_probs(), &k);
        let swap = sm(&[[0.0, 1.0], [1.0, 0.0]]);
        let rm = reference_from_kernel(&swap, 2).unwrap();
        assert_eq!(rm.context_probs().matrix().as_slice(), &[0.5; 4]);
        // K² = [[.52,.48],[.48,.52]]; (K + K²)/2 = [[.56,.44],[.44,.56]].
        let rm = reference_from_kernel(&k, 2).unwrap();
        let expected = [0.56, 0.44, 0.44, 0.56];
        for (a, b) in rm.context_probs().matrix().as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_sum_examples() {
        for c in 1..6 {
            assert_eq!(geometric_sum_map(1.0, c).unwrap(), 1.0);
            assert_eq!(geometric_sum_map(0.0, c).unwrap(), 0.0);
        }
        assert!((geometric_sum_map(0.5, 2).unwrap() - 0.375).abs() < 1e-16);
        assert!(matches!(
            geometric_sum_map(1.5, 2),
            Err(Error::DomainError(_))
        ));
        assert!(matches!(
            geometric_sum_map(-0.1, 2),
            Err(Error::DomainError(_))
        ));
        // x + x² = 0.75 ⇒ x = (−1 + √4)/2 = 0.5.
        assert!((invert_geometric_sum(0.375, 2).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(invert_geometric_sum(1.0, 7).unwrap(), 1.0);
        assert_eq!(invert_geometric_sum(0.0, 3).unwrap(), 0.0);
        assert!(invert_geometric_sum(f64::NAN, 3).is_err());
    }

    #[test]
    fn kernel_from_reference_examples() {
        let rm = ReferenceModel::new(sm(&[[0.5, 0.5], [0.5, 0.5]]), 2).unwrap();
        let k = kernel_from_reference(&rm).unwrap();
        assert!(k.matrix().max_abs_diff(rm.context_probs().matrix()) < 1e-12);

        // Eigenvalue 0.12 of [[.56,.44],[.44,.56]] solves x + x² = 0.24 at x = 0.2.
        let rm = ReferenceModel::new(sm(&[[0.56, 0.44], [0.44, 0.56]]), 2).unwrap();
        let k = kernel_from_reference(&rm).unwrap();
        let expected = Matrix::from_rows(&[[0.6, 0.4], [0.4, 0.6]]).unwrap();
        assert!(k.matrix().max_abs_diff(&expected) < 1e-10);

        // [[.35,.65],[.65,.35]] has eigenvalues 1 and −0.3.
        let rm = ReferenceModel::new(sm(&[[0.35, 0.65], [0.65, 0.35]]), 2).unwrap();
        match kernel_from_reference(&rm) {
            Err(Error::EigenvalueOutOfRange(l)) => assert!((l + 0.3).abs() < 1e-12),
            other => panic!("{other:?}"),
        }

        let rm = ReferenceModel::new(sm(&[[0.5, 0.5], [1.0, 0.0]]), 2).unwrap();
        assert!(matches!(
            kernel_from_reference(&rm),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn compress_examples() {
        let rows = [[0.2, 0.3, 0.5], [0.2, 0.3, 0.5], [0.6, 0.1, 0.3]];
        let rm = ReferenceModel::new(StochasticMatrix::from_rows(&rows).unwrap(), 1).unwrap();
        let (merge, reduced) = compress_duplicates(&rm, 0, 1).unwrap();
        assert_eq!((merge.rows(), merge.cols()), (3, 2));
        assert_eq!((reduced.rows(), reduced.cols()), (2, 3));
        assert_eq!(
            &merge.matmul(&reduced).unwrap(),
            rm.context_probs().matrix()
        );
        // Reversed roles: keep row 1 and drop row 0.
        let (merge, reduced) = compress_duplicates(&rm, 1, 0).unwrap();
        assert_eq!(
            &merge.matmul(&reduced).unwrap(),
            rm.context_probs().matrix()
        );

        assert!(matches!(
            compress_duplicates(&rm, 0, 2),
            Err(Error::RowsNotEqual(0, 2, _))
        ));
        assert!(compress_duplicates(&rm, 0, 3).is_err());
        assert!(compress_duplicates(&rm, 1, 1).is_err());
    }

    #[test]
    fn compress_block_kernel_rows() {
        let k = block_kernel(10, BlockSpec::new(2, 3), 9).unwrap();
        let rm = reference_from_kernel(&k, 1).unwrap();
        for (a, b) in [(0, 1), (0, 2), (2, 1)] {
            let (merge, reduced) = compress_duplicates(&rm, a, b).unwrap();
            assert_eq!(
                &merge.matmul(&reduced).unwrap(),
                rm.context_probs().matrix()
            );
        }
    }

    #[test]
    fn symmetric_kernel_spectrum() {
        for seed in 0..10 {
            let k = symmetric_kernel(12, seed).unwrap();
            let m = k.matrix();
            assert_eq!(m, &m.transpose());
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(12, 12, m.as_slice()));
            for &l in eig.eigenvalues.iter() {
                assert!((-1e-12..=1.0 + 1e-12).contains(&l), "{l}");
            }
        }
    }

    #[test]
    fn stochastic_text_round_trip() {
        let k = random_kernel(6, 1).unwrap();
        let back = validate_stochastic(Matrix::from_text(&k.to_text()).unwrap()).unwrap();
        assert_eq!(k, back);
    }

    proptest! {
        #[test]
        fn geometric_sum_is_increasing_and_invertible(x in 0.0f64..=1.0, dx in 1e-6f64..0.1, c in 1usize..12) {
            let y = geometric_sum_map(x, c).unwrap();
            let back = invert_geometric_sum(y, c).unwrap();
            prop_assert!((back - x).abs() < 1e-10);
            let x2 = (x + dx).min(1.0);
            if x2 > x {
                prop_assert!(geometric_sum_map(x2, c).unwrap() > y);
            }
        }

        #[test]
        fn reference_is_stochastic(seed in any::<u64>(), v in 2usize..12, c in 1usize..6) {
            let k = random_kernel(v, seed).unwrap();
            let rm = reference_from_kernel(&k, c).unwrap();
            prop_assert!(validate_stochastic(rm.context_probs().matrix().clone()).is_ok());
        }

        #[test]
        fn symmetric_round_trip(seed in any::<u64>(), v in 2usize..16, c in prop::sample::select(vec![1usize, 2, 5])) {
            let k = symmetric_kernel(v, seed).unwrap();
            let rm = reference_from_kernel(&k, c).unwrap();
            let back = kernel_from_reference(&rm).unwrap();
            prop_assert!(back.matrix().max_abs_diff(k.matrix()) < 1e-8);
        }
    }
}
