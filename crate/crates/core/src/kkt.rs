//! Karush-Kuhn-Tucker checks for penalized least squares, in the original
//! scale and in the rescaled `(tau, b)` coordinates used by the path tracker.

use nalgebra::{DMatrix, DVector};

use crate::design::StandardizedDesign;
use crate::error::{Error, Result};
use crate::linalg::{principal, sym_eigen_extremes};
use crate::penalty::QuadSplinePenalty;

/// Default tolerance for KKT verdicts on standardized data.
pub const DEFAULT_KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Worst violation of the equality rows (active coordinates).
    pub max_active_residual: f64,
    /// `max_{j inactive} |x_j'(y - X beta)/n| - lambda`; negative when strictly satisfied.
    pub max_inactive_excess: f64,
    /// Inactive coordinates whose constraint holds with equality (within tolerance).
    pub boundary: Vec<usize>,
    pub tol: f64,
    pub satisfied: bool,
}

impl KktReport {
    fn from_parts(
        max_active_residual: f64,
        max_inactive_excess: f64,
        boundary: Vec<usize>,
        tol: f64,
    ) -> Self {
        KktReport {
            max_active_residual,
            max_inactive_excess,
            boundary,
            tol,
            satisfied: max_active_residual <= tol && max_inactive_excess <= tol,
        }
    }

    /// Largest of the two violation measures, clipped at 0 for the inactive part.
    pub fn max_violation(&self) -> f64 {
        self.max_active_residual
            .max(self.max_inactive_excess.max(0.0))
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Shared core: `corr` holds `x_j'(y - X beta)/n`, `level` the penalty level.
fn report_from_correlations(
    corr: &DVector<f64>,
    beta: &[f64],
    pen: &QuadSplinePenalty,
    lambda: f64,
    tol: f64,
) -> KktReport {
    let mut active = 0.0_f64;
    let mut excess = f64::NEG_INFINITY;
    let mut boundary = Vec::new();
    for (j, &bj) in beta.iter().enumerate() {
        if bj != 0.0 {
            let target = sgn(bj) * lambda * pen.unit_deriv(bj.abs() / lambda);
            active = active.max((corr[j] - target).abs());
        } else {
            let e = corr[j].abs() - lambda;
            if e.abs() <= tol {
                boundary.push(j);
            }
            excess = excess.max(e);
        }
    }
    if excess == f64::NEG_INFINITY {
        excess = -lambda;
    }
    KktReport::from_parts(active, excess, boundary, tol)
}

/// KKT residuals of `beta` for `(1/2n)||y - X beta||^2 + sum rho(|beta_j|; lambda)`.
pub fn kkt_report(
    d: &StandardizedDesign,
    y: &[f64],
    beta: &[f64],
    pen: &QuadSplinePenalty,
    lambda: f64,
    tol: f64,
) -> Result<KktReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let r = d.residual(y, beta)?;
    let corr = d.x().tr_mul(&r) / d.n() as f64;
    Ok(report_from_correlations(&corr, beta, pen, lambda, tol))
}

/// KKT residuals in rescaled coordinates `z = tau z*`, `b = tau beta`.
///
/// Residuals are divided by `tau` so the report is expressed at penalty level
/// `lambda = 1 / tau` and agrees with [`kkt_report`] for `beta = b / tau`.
pub fn rescaled_kkt_report(
    gram: &DMatrix<f64>,
    z_star: &DVector<f64>,
    b: &[f64],
    tau: f64,
    pen: &QuadSplinePenalty,
    tol: f64,
) -> Result<KktReport> {
    let p = gram.nrows();
    if z_star.len() != p {
        return Err(Error::DimensionMismatch {
            what: "z* length",
            expected: p,
            actual: z_star.len(),
        });
    }
    if b.len() != p {
        return Err(Error::DimensionMismatch {
            what: "coefficient length",
            expected: p,
            actual: b.len(),
        });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let bv = DVector::from_column_slice(b);
    let resid = z_star * tau - gram * &bv;
    let mut active = 0.0_f64;
    let mut excess = f64::NEG_INFINITY;
    let mut boundary = Vec::new();
    for (j, &bj) in b.iter().enumerate() {
        if bj != 0.0 {
            let gap = resid[j] - sgn(bj) * pen.unit_deriv(bj.abs());
            active = active.max(gap.abs() / tau);
        } else {
            let e = (resid[j].abs() - 1.0) / tau;
            if e.abs() <= tol {
                boundary.push(j);
            }
            excess = excess.max(e);
        }
    }
    if excess == f64::NEG_INFINITY {
        excess = -1.0 / tau;
    }
    Ok(KktReport::from_parts(active, excess, boundary, tol))
}

/// Second-order certificate on the active set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMinCertificate {
    pub certified: bool,
    /// Smallest eigenvalue of `X_A'X_A/n + diag(rho''(|beta_j|; lambda))`;
    /// `+inf` for an empty active set.
    pub min_eigenvalue: f64,
}

/// Checks positive definiteness of `X_A'X_A/n + diag(rho''(|beta_j|; lambda), j in A)`.
///
/// Coordinates sitting exactly on a knot use the more concave adjacent segment.
pub fn local_min_certificate(
    d: &StandardizedDesign,
    beta: &[f64],
    pen: &QuadSplinePenalty,
    lambda: f64,
    tol: f64,
) -> Result<LocalMinCertificate> {
    d.check_coef(beta)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if active.is_empty() {
        return Ok(LocalMinCertificate {
            certified: true,
            min_eigenvalue: f64::INFINITY,
        });
    }
    let mut m = principal(d.gram(), &active);
    for (a, &j) in active.iter().enumerate() {
        m[(a, a)] += pen.unit_curvature_conservative(beta[j].abs() / lambda);
    }
    let lo = sym_eigen_extremes(&m).0;
    Ok(LocalMinCertificate {
        certified: lo > tol,
        min_eigenvalue: lo,
    })
}
