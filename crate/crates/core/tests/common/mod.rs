//! Test-only oracles written without reference to the library internals.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use plus_core::{PenaltyKind, StandardizedDesign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy)]
pub struct Pen {
    pub kind: PenaltyKind,
    pub gamma: f64,
}

impl Pen {
    pub fn l1() -> Self {
        Pen {
            kind: PenaltyKind::L1,
            gamma: f64::INFINITY,
        }
    }
    pub fn mcp(gamma: f64) -> Self {
        Pen {
            kind: PenaltyKind::Mcp,
            gamma,
        }
    }
    pub fn scad(gamma: f64) -> Self {
        Pen {
            kind: PenaltyKind::Scad,
            gamma,
        }
    }

    /// `rho(t; lambda)` from the textbook formulas.
    pub fn value(&self, t: f64, lambda: f64) -> f64 {
        let (g, l) = (self.gamma, lambda);
        match self.kind {
            PenaltyKind::L1 => l * t,
            PenaltyKind::Mcp if t < g * l => l * t - t * t / (2.0 * g),
            PenaltyKind::Mcp => g * l * l / 2.0,
            PenaltyKind::Scad if t <= l => l * t,
            PenaltyKind::Scad if t <= g * l => {
                (2.0 * g * l * t - t * t - l * l) / (2.0 * (g - 1.0))
            }
            PenaltyKind::Scad => l * l * (g + 1.0) / 2.0,
        }
    }

    /// Pieces `[lo, hi]` of `t >= 0` on which `rho'(t) = a - c t`.
    fn pieces(&self, lambda: f64) -> Vec<(f64, f64, f64, f64)> {
        let (g, l) = (self.gamma, lambda);
        match self.kind {
            PenaltyKind::L1 => vec![(0.0, f64::INFINITY, l, 0.0)],
            PenaltyKind::Mcp => vec![(0.0, g * l, l, 1.0 / g), (g * l, f64::INFINITY, 0.0, 0.0)],
            PenaltyKind::Scad => vec![
                (0.0, l, l, 0.0),
                (l, g * l, g * l / (g - 1.0), 1.0 / (g - 1.0)),
                (g * l, f64::INFINITY, 0.0, 0.0),
            ],
        }
    }

    /// Global minimizer of `(b - u)^2 / 2 + rho(|b|; lambda)` by enumerating
    /// stationary points and piece endpoints.
    pub fn scalar_min(&self, u: f64, lambda: f64) -> f64 {
        let obj = |b: f64| 0.5 * (b - u).powi(2) + self.value(b.abs(), lambda);
        let mut best = (obj(0.0), 0.0);
        for (lo, hi, a, c) in self.pieces(lambda) {
            for s in [1.0, -1.0] {
                let mut cands = vec![lo];
                if hi.is_finite() {
                    cands.push(hi);
                }
                if c < 1.0 {
                    cands.push(((s * u - a) / (1.0 - c)).clamp(lo, hi));
                }
                for t in cands {
                    let v = obj(s * t);
                    if v < best.0 {
                        best = (v, s * t);
                    }
                }
            }
        }
        best.1
    }

    /// Minimizer of the same scalar objective over the grid `k * step`.
    pub fn grid_min(&self, u: f64, lambda: f64, step: f64) -> f64 {
        let obj = |b: f64| 0.5 * (b - u).powi(2) + self.value(b.abs(), lambda);
        let reach = ((u.abs() + 1.0) / step).ceil() as i64;
        let mut best = (f64::INFINITY, 0.0);
        for k in -reach..=reach {
            let b = k as f64 * step;
            let v = obj(b);
            if v < best.0 {
                best = (v, b);
            }
        }
        best.1
    }
}

/// `(1/2n) ||y - X beta||^2 + sum rho(|beta_j|; lambda)`.
pub fn objective(x: &DMatrix<f64>, y: &[f64], pen: Pen, lambda: f64, beta: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let r = DVector::from_column_slice(y) - x * DVector::from_column_slice(beta);
    r.norm_squared() / (2.0 * n) + beta.iter().map(|b| pen.value(b.abs(), lambda)).sum::<f64>()
}

/// Cyclic coordinate descent on a design whose columns satisfy `||x_j||^2 = n`.
pub fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &[f64],
    pen: Pen,
    lambda: f64,
    start: &[f64],
) -> Vec<f64> {
    let nf = x.nrows() as f64;
    let mut beta = start.to_vec();
    let mut r = DVector::from_column_slice(y) - x * DVector::from_column_slice(&beta);
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for (j, bj) in beta.iter_mut().enumerate() {
            let col = x.column(j);
            let u = col.dot(&r) / nf + *bj;
            let new = pen.scalar_min(u, lambda);
            let d = new - *bj;
            if d != 0.0 {
                r.axpy(-d, &col, 1.0);
                *bj = new;
                delta = delta.max(d.abs());
            }
        }
        if delta < 1e-14 {
            break;
        }
    }
    beta
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian design with equicorrelated columns (`corr`), standardized.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize, corr: f64) -> StandardizedDesign {
    let raw = DMatrix::from_fn(n, p, |_, _| 0.0);
    let mut raw = raw;
    for i in 0..n {
        let common = normal(rng);
        for j in 0..p {
            raw[(i, j)] = corr.sqrt() * common + (1.0 - corr).sqrt() * normal(rng);
        }
    }
    StandardizedDesign::standardize(&raw).expect("random design has no zero column")
}

/// Sparse signal plus unit noise.
pub fn random_response(rng: &mut ChaCha8Rng, d: &StandardizedDesign, nonzero: usize) -> Vec<f64> {
    let p = d.p();
    let beta: Vec<f64> = (0..p)
        .map(|j| {
            if j < nonzero {
                let mag = rng.gen_range(0.5..2.0);
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            } else {
                0.0
            }
        })
        .collect();
    let mean = d.x() * DVector::from_vec(beta);
    mean.iter().map(|m| m + normal(rng)).collect()
}

/// Design with `X'X / n = I` exactly (up to rounding).
pub fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> StandardizedDesign {
    let g = DMatrix::from_fn(n, p, |_, _| normal(rng));
    let q = g.qr().q();
    let raw = q * (n as f64).sqrt();
    StandardizedDesign::standardize(&raw).expect("orthonormal columns are nonzero")
}

/// `lambda` at which the first variable enters: `max_j |x_j' y| / n`.
pub fn lambda_max(d: &StandardizedDesign, y: &[f64]) -> f64 {
    d.z_star(y).unwrap().amax()
}

/// `count` levels from `hi` down to `lo`, geometrically spaced.
pub fn geometric_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| hi * (lo / hi).powf(k as f64 / (count - 1) as f64))
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
