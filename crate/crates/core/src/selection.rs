//! Oracle estimator, selection metrics, penalty-level rules and analytic bounds.

use nalgebra::{DMatrix, DVector};

use crate::design::StandardizedDesign;
use crate::error::{Error, Result};
use crate::path::FitResult;

/// True coefficients of a simulated linear model and their support.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTruth {
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub sigma: f64,
}

impl ModelTruth {
    pub fn new(beta: Vec<f64>, sigma: f64) -> Self {
        let support = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        ModelTruth {
            beta,
            support,
            sigma,
        }
    }

    /// Size of the true support.
    pub fn d_o(&self) -> usize {
        self.support.len()
    }

    /// Smallest nonzero `|beta_j|` (infinite for an empty support).
    pub fn beta_star(&self) -> f64 {
        self.support
            .iter()
            .map(|&j| self.beta[j].abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Least squares restricted to `support`, zeros elsewhere.
pub fn oracle_lse(d: &StandardizedDesign, y: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    d.check_response(y)?;
    let p = d.p();
    if let Some(&index) = support.iter().find(|&&j| j >= p) {
        return Err(Error::IndexOutOfRange { index, p });
    }
    let mut beta = vec![0.0; p];
    if support.is_empty() {
        return Ok(beta);
    }
    if support.len() > d.n() {
        return Err(Error::RankDeficient);
    }
    let xa = d.x().select_columns(support);
    let yv = DVector::from_column_slice(y);
    let qr = xa.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if r.diagonal()
        .iter()
        .any(|v| v.abs() <= 1e-10 * rmax.max(1.0))
    {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().tr_mul(&yv);
    let mut coef = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    // one refinement step on the normal equations
    let resid = &yv - &xa * &coef;
    let corr = qr.q().tr_mul(&resid);
    if let Some(dc) = r.solve_upper_triangular(&corr) {
        coef += dc;
    }
    for (a, &j) in support.iter().enumerate() {
        beta[j] = coef[a];
    }
    Ok(beta)
}

/// `sigma sqrt(2 log(p) / n)`.
pub fn universal_lambda(sigma: f64, p: usize, n: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "universal level needs p >= 2, got {p}"
        )));
    }
    if n == 0 || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and sigma > 0, got n = {n}, sigma = {sigma}"
        )));
    }
    Ok(sigma * (2.0 * (p as f64).ln() / n as f64).sqrt())
}

/// `sqrt(log(p) / n)`, the unit of the penalty-level axis.
pub fn lambda_unit(p: usize, n: usize) -> f64 {
    ((p as f64).ln() / n as f64).sqrt()
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `2 (p - d_o) Phi(-lambda sqrt(n))`, a bound on the chance of selecting a null variable.
pub fn false_selection_bound(p: usize, d_o: usize, n: usize, lambda: f64) -> Result<f64> {
    if d_o >= p {
        return Err(Error::InvalidParameter(format!(
            "need p > d_o, got p = {p}, d_o = {d_o}"
        )));
    }
    Ok(2.0 * (p - d_o) as f64 * normal_cdf(-lambda * (n as f64).sqrt()))
}

/// Largest `lambda / sqrt(log(p)/n)` with `beta_star > gamma lambda`.
pub fn unbiasedness_lambda_ceiling(beta_star: f64, gamma: f64, p: usize, n: usize) -> Result<f64> {
    if !(gamma > 0.0) || !(beta_star > 0.0) {
        return Err(Error::InvalidParameter(
            "gamma and beta_star must be positive".into(),
        ));
    }
    if p < 2 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need p >= 2 and n >= 1, got p = {p}, n = {n}"
        )));
    }
    Ok(beta_star / (gamma * lambda_unit(p, n)))
}

/// `(beta_hat - beta)' sigma (beta_hat - beta)`.
pub fn model_error(beta_hat: &[f64], beta: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    let p = beta.len();
    if beta_hat.len() != p {
        return Err(Error::DimensionMismatch {
            what: "coefficient length",
            expected: p,
            actual: beta_hat.len(),
        });
    }
    if sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            what: "covariance dimension",
            expected: p,
            actual: sigma.nrows(),
        });
    }
    let scale = sigma.amax().max(1.0);
    for i in 0..p {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(
                    "covariance matrix is not symmetric".into(),
                ));
            }
        }
    }
    let diff = DVector::from_iterator(p, beta_hat.iter().zip(beta).map(|(a, b)| a - b));
    Ok((diff.transpose() * sigma * &diff)[(0, 0)].max(0.0))
}

/// `Sigma_{jk} = r^{|j - k|}`.
pub fn ar1_covariance(p: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| r.powi((i as i32 - j as i32).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionMetrics {
    /// Total mistakes `|A_hat symmetric-difference A_o|`.
    pub tm: usize,
    /// Correct selection, `A_hat = A_o`.
    pub cs: bool,
    /// `sgn(beta_hat) = sgn(beta)` componentwise with `sgn(0) = 0`.
    pub sign_consistent: bool,
    /// Some null coordinate was selected.
    pub false_inclusion: bool,
}

fn sgn(v: f64) -> i8 {
    (v > 0.0) as i8 - (v < 0.0) as i8
}

pub fn selection_metrics(beta_hat: &[f64], truth: &ModelTruth) -> SelectionMetrics {
    let mut tm = 0;
    let mut false_inclusion = false;
    let mut sign_consistent = true;
    for (&bh, &b) in beta_hat.iter().zip(&truth.beta) {
        let sel = bh != 0.0;
        let tru = b != 0.0;
        if sel != tru {
            tm += 1;
            if sel {
                false_inclusion = true;
            }
        }
        if sgn(bh) != sgn(b) {
            sign_consistent = false;
        }
    }
    SelectionMetrics {
        tm,
        cs: tm == 0,
        sign_consistent,
        false_inclusion,
    }
}

/// `sqrt(||y - X beta_hat||^2 / (n - df))` with `df = |A_hat|`.
pub fn estimate_sigma(d: &StandardizedDesign, y: &[f64], fit: &FitResult) -> Result<f64> {
    let df = fit.active.len();
    let n = d.n();
    if df >= n {
        return Err(Error::NoResidualDf { df, n });
    }
    let r = d.residual(y, &fit.beta)?;
    Ok((r.norm_squared() / (n - df) as f64).sqrt())
}
