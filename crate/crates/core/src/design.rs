//! Standardized designs and eigenvalue diagnostics: global convexity, sparse
//! convexity and sparse Riesz bounds.

use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{principal, sym_eigen_extremes};
use crate::penalty::QuadSplinePenalty;

/// Default cap on the number of subsets an exhaustive scan may visit.
pub const DEFAULT_SUBSET_BUDGET: u128 = 1_000_000;

/// Design matrix with columns scaled to `||x_j||^2 / n = 1` and its cached Gram matrix.
#[derive(Debug, Clone)]
pub struct StandardizedDesign {
    x: DMatrix<f64>,
    col_scales: Vec<f64>,
    gram: Arc<DMatrix<f64>>,
}

impl StandardizedDesign {
    /// Divides each column of `raw` by `||x_j|| / sqrt(n)`.
    pub fn standardize(raw: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = raw.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter(format!(
                "design must be nonempty, got {n}x{p}"
            )));
        }
        let sqrt_n = (n as f64).sqrt();
        let mut x = raw.clone();
        let mut col_scales = Vec::with_capacity(p);
        for j in 0..p {
            let norm = raw.column(j).norm();
            if !norm.is_finite() || norm < 1e-12 * sqrt_n {
                return Err(Error::ZeroColumn { column: j });
            }
            let scale = norm / sqrt_n;
            x.column_mut(j).unscale_mut(scale);
            col_scales.push(scale);
        }
        let mut gram = x.tr_mul(&x) / n as f64;
        // symmetrize and pin the unit diagonal against round-off
        for i in 0..p {
            gram[(i, i)] = 1.0;
            for j in 0..i {
                let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        Ok(StandardizedDesign {
            x,
            col_scales,
            gram: Arc::new(gram),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn col_scales(&self) -> &[f64] {
        &self.col_scales
    }

    /// `X'X / n`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_shared(&self) -> Arc<DMatrix<f64>> {
        Arc::clone(&self.gram)
    }

    /// `z* = X'y / n`.
    pub fn z_star(&self, y: &[f64]) -> Result<DVector<f64>> {
        self.check_response(y)?;
        let yv = DVector::from_column_slice(y);
        Ok(self.x.tr_mul(&yv) / self.n() as f64)
    }

    /// `y - X beta`.
    pub fn residual(&self, y: &[f64], beta: &[f64]) -> Result<DVector<f64>> {
        self.check_response(y)?;
        self.check_coef(beta)?;
        Ok(DVector::from_column_slice(y) - &self.x * DVector::from_column_slice(beta))
    }

    /// Maps standardized coefficients back to the raw column scale.
    pub fn to_raw_scale(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter()
            .zip(&self.col_scales)
            .map(|(b, s)| b / s)
            .collect()
    }

    pub(crate) fn check_response(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: self.n(),
                actual: y.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_coef(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: self.p(),
                actual: beta.len(),
            });
        }
        Ok(())
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&index) = subset.iter().find(|&&j| j >= self.p()) {
            return Err(Error::IndexOutOfRange { index, p: self.p() });
        }
        Ok(())
    }

    /// Smallest eigenvalue of `X_A'X_A / n`.
    pub fn restricted_min_eigen(&self, subset: &[usize]) -> Result<f64> {
        self.check_subset(subset)?;
        Ok(sym_eigen_extremes(&principal(&self.gram, subset)).0)
    }

    /// Smallest and largest eigenvalue of `X_A'X_A / n`.
    pub fn restricted_eigen_extremes(&self, subset: &[usize]) -> Result<(f64, f64)> {
        self.check_subset(subset)?;
        Ok(sym_eigen_extremes(&principal(&self.gram, subset)))
    }

    /// Extreme eigenvalues of the full Gram matrix.
    pub fn gram_extremes(&self) -> (f64, f64) {
        sym_eigen_extremes(&self.gram)
    }
}

/// How a sparse Riesz scan visits subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    /// Every subset of size `d_star`, capped by `budget`.
    Exhaustive { budget: u128 },
    /// `count` subsets of size `d_star` drawn uniformly with the given seed.
    Sampled { count: usize, seed: u64 },
}

impl ScanMode {
    pub fn exhaustive() -> Self {
        ScanMode::Exhaustive {
            budget: DEFAULT_SUBSET_BUDGET,
        }
    }
}

/// Two-sided eigenvalue bounds over supports of size at most `d_star`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseRieszBounds {
    pub d_star: usize,
    pub c_lower: f64,
    pub c_upper: f64,
    pub subsets_scanned: u128,
    /// False for sampled scans: the bounds are sampled extremes, not a certificate.
    pub certified: bool,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Scans `c_min` and `c_max` of `X_A'X_A/n` over subsets with `|A| = d_star`.
///
/// By eigenvalue interlacing the extremes over `|A| <= d_star` are attained at
/// `|A| = d_star`, so only those subsets are visited.
pub fn sparse_riesz_scan(
    d: &StandardizedDesign,
    d_star: usize,
    mode: ScanMode,
) -> Result<SparseRieszBounds> {
    let p = d.p();
    if d_star == 0 || d_star > p {
        return Err(Error::InvalidParameter(format!(
            "d_star must lie in 1..={p}, got {d_star}"
        )));
    }
    let gram = d.gram();
    let fold = |acc: (f64, f64), s: &[usize]| {
        let (lo, hi) = sym_eigen_extremes(&principal(gram, s));
        (acc.0.min(lo), acc.1.max(hi))
    };
    let merge = |a: (f64, f64), b: (f64, f64)| (a.0.min(b.0), a.1.max(b.1));
    let init = || (f64::INFINITY, f64::NEG_INFINITY);

    match mode {
        ScanMode::Exhaustive { budget } => {
            let subsets = binomial(p, d_star);
            if subsets > budget {
                return Err(Error::BudgetExceeded { subsets, budget });
            }
            let (lo, hi) = (0..p)
                .combinations(d_star)
                .par_bridge()
                .fold(init, |acc, s| fold(acc, &s))
                .reduce(init, merge);
            Ok(SparseRieszBounds {
                d_star,
                c_lower: lo,
                c_upper: hi,
                subsets_scanned: subsets,
                certified: true,
            })
        }
        ScanMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::InvalidParameter(
                    "sampled scan needs at least one subset".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<Vec<usize>> = (0..count)
                .map(|_| {
                    let mut s = sample(&mut rng, p, d_star).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect();
            let (lo, hi) = draws
                .par_iter()
                .fold(init, |acc, s| fold(acc, s))
                .reduce(init, merge);
            Ok(SparseRieszBounds {
                d_star,
                c_lower: lo,
                c_upper: hi,
                subsets_scanned: count as u128,
                certified: false,
            })
        }
    }
}

/// Outcome of a convexity check: `holds` iff `kappa < c_min`, `margin = c_min - kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityVerdict {
    pub holds: bool,
    pub margin: f64,
    pub kappa: f64,
    pub c_min: f64,
    pub certified: bool,
}

impl ConvexityVerdict {
    fn new(kappa: f64, c_min: f64, certified: bool) -> Self {
        ConvexityVerdict {
            holds: kappa < c_min,
            margin: c_min - kappa,
            kappa,
            c_min,
            certified,
        }
    }
}

/// Global convexity: maximum concavity of the penalty below `c_min(X'X/n)`.
pub fn global_convexity_check(d: &StandardizedDesign, pen: &QuadSplinePenalty) -> ConvexityVerdict {
    let c_min = if d.p() > d.n() {
        0.0
    } else {
        d.gram_extremes().0
    };
    ConvexityVerdict::new(pen.max_concavity(), c_min, true)
}

/// Sparse convexity: maximum concavity below `min_{|A| = d_star} c_min(X_A'X_A/n)`.
pub fn sparse_convexity_check(
    d: &StandardizedDesign,
    pen: &QuadSplinePenalty,
    d_star: usize,
    mode: ScanMode,
) -> Result<ConvexityVerdict> {
    let bounds = sparse_riesz_scan(d, d_star, mode)?;
    Ok(ConvexityVerdict::new(
        pen.max_concavity(),
        bounds.c_lower,
        bounds.certified,
    ))
}
