//! Quadratic-spline penalties in unit scale.
//!
//! A penalty is stored as the unit-scale spline `rho_m` whose derivative is
//! piecewise linear with `m` knots (the first knot is always 0). The penalty at
//! level `lambda` is recovered through `rho(t; lambda) = lambda^2 * rho_m(t / lambda)`,
//! so the derivative scales as `lambda * rho_m'(t / lambda)` and the curvature
//! is scale free.
//!
//! Derivatives at a knot use the right limit and segments are half-open
//! `[knot_k, knot_{k+1})`.

use crate::error::{Error, Result};

/// Which family a spline penalty was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    L1,
    Mcp,
    Scad,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::L1 => "lasso",
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::Scad => "scad",
        }
    }
}

/// One linear piece of the unit-scale derivative: `rho_m'(t) = intercept + slope * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivSegment {
    pub intercept: f64,
    pub slope: f64,
}

impl DerivSegment {
    fn at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadSplinePenalty {
    kind: PenaltyKind,
    knots: Vec<f64>,
    segments: Vec<DerivSegment>,
    /// `rho_m(knots[k])`, so values only integrate within one segment.
    knot_values: Vec<f64>,
    gamma: f64,
}

impl QuadSplinePenalty {
    fn from_parts(
        kind: PenaltyKind,
        knots: Vec<f64>,
        segments: Vec<DerivSegment>,
        gamma: f64,
    ) -> Self {
        debug_assert_eq!(knots.len(), segments.len());
        let mut knot_values = Vec::with_capacity(knots.len());
        knot_values.push(0.0);
        for k in 1..knots.len() {
            let (a, b) = (knots[k - 1], knots[k]);
            let seg = segments[k - 1];
            let integral = seg.intercept * (b - a) + 0.5 * seg.slope * (b * b - a * a);
            knot_values.push(knot_values[k - 1] + integral);
        }
        QuadSplinePenalty {
            kind,
            knots,
            segments,
            knot_values,
            gamma,
        }
    }

    /// The l1 penalty, `rho_1(t) = t`.
    pub fn l1() -> Self {
        Self::from_parts(
            PenaltyKind::L1,
            vec![0.0],
            vec![DerivSegment {
                intercept: 1.0,
                slope: 0.0,
            }],
            f64::INFINITY,
        )
    }

    /// Minimax concave penalty with `rho_2'(t) = (1 - t / gamma)^+`.
    pub fn mcp(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "MCP requires gamma > 0, got {gamma}"
            )));
        }
        Ok(Self::from_parts(
            PenaltyKind::Mcp,
            vec![0.0, gamma],
            vec![
                DerivSegment {
                    intercept: 1.0,
                    slope: -1.0 / gamma,
                },
                DerivSegment {
                    intercept: 0.0,
                    slope: 0.0,
                },
            ],
            gamma,
        ))
    }

    /// SCAD penalty with knots `0, 1, gamma`.
    pub fn scad(gamma: f64) -> Result<Self> {
        if !(gamma > 2.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "SCAD requires gamma > 2, got {gamma}"
            )));
        }
        Ok(Self::from_parts(
            PenaltyKind::Scad,
            vec![0.0, 1.0, gamma],
            vec![
                DerivSegment {
                    intercept: 1.0,
                    slope: 0.0,
                },
                DerivSegment {
                    intercept: gamma / (gamma - 1.0),
                    slope: -1.0 / (gamma - 1.0),
                },
                DerivSegment {
                    intercept: 0.0,
                    slope: 0.0,
                },
            ],
            gamma,
        ))
    }

    /// Builds a penalty from its family name (`l1`/`lasso`, `mcp`, `scad`).
    pub fn from_name(name: &str, gamma: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "l1" | "lasso" => Ok(Self::l1()),
            "mcp" | "mc+" => Self::mcp(gamma),
            "scad" => Self::scad(gamma),
            other => Err(Error::InvalidParameter(format!(
                "unknown penalty `{other}`"
            ))),
        }
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// Number of knots, including 0.
    pub fn m(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segments(&self) -> &[DerivSegment] {
        &self.segments
    }

    /// Unbiasedness threshold in unit scale; infinite for l1.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// 1-based index of the segment holding `u >= 0`.
    pub fn segment_index(&self, u: f64) -> usize {
        // knots are few (m <= 3 for the built-in families)
        self.knots.iter().rposition(|&k| u >= k).unwrap_or(0) + 1
    }

    pub fn segment(&self, k: usize) -> DerivSegment {
        self.segments[k - 1]
    }

    /// Upper end of segment `k` in unit scale (infinite for the last one).
    pub fn segment_upper(&self, k: usize) -> f64 {
        self.knots.get(k).copied().unwrap_or(f64::INFINITY)
    }

    pub fn segment_lower(&self, k: usize) -> f64 {
        self.knots[k - 1]
    }

    /// `rho_m(u)` for `u >= 0`.
    pub fn unit_value(&self, u: f64) -> f64 {
        let k = self.segment_index(u);
        let a = self.knots[k - 1];
        let seg = self.segments[k - 1];
        self.knot_values[k - 1] + seg.intercept * (u - a) + 0.5 * seg.slope * (u * u - a * a)
    }

    /// `rho_m'(u)` with the right-limit convention; `unit_deriv(0) = 1`.
    pub fn unit_deriv(&self, u: f64) -> f64 {
        self.segments[self.segment_index(u) - 1].at(u)
    }

    /// `rho_m''(u)` on the segment holding `u` (right limit at knots).
    pub fn unit_curvature(&self, u: f64) -> f64 {
        self.segments[self.segment_index(u) - 1].slope
    }

    /// The more concave of the two one-sided curvatures at `u`.
    pub fn unit_curvature_conservative(&self, u: f64) -> f64 {
        let k = self.segment_index(u);
        let right = self.segments[k - 1].slope;
        if k > 1 && u == self.knots[k - 1] {
            right.min(self.segments[k - 2].slope)
        } else {
            right
        }
    }

    /// `rho(t; lambda) = lambda^2 rho_m(t / lambda)`.
    pub fn value(&self, t: f64, lambda: f64) -> Result<f64> {
        check_level(t, lambda)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        Ok(lambda * lambda * self.unit_value(t / lambda))
    }

    /// `d/dt rho(t; lambda) = lambda rho_m'(t / lambda)` for `t > 0`.
    pub fn deriv(&self, t: f64, lambda: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "derivative requires t > 0, got {t}; use deriv_zero_plus for the limit at 0"
            )));
        }
        check_level(t, lambda)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        Ok(lambda * self.unit_deriv(t / lambda))
    }

    /// Right limit of the derivative at 0, which equals `lambda`.
    pub fn deriv_zero_plus(&self, lambda: f64) -> f64 {
        lambda * self.segments[0].intercept
    }

    /// Second derivative at level `lambda`. The `lambda^2` scale cancels.
    pub fn curvature(&self, t: f64, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        self.unit_curvature(t / lambda)
    }

    /// `max_{t>0} -rho''(t)`, identical for every `lambda > 0`.
    pub fn max_concavity(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| -s.slope)
            .fold(0.0_f64, f64::max)
    }
}

fn check_level(t: f64, lambda: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t must be nonnegative, got {t}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Closed-form minimizer of `(b - z)^2 / 2 + rho(|b|; lambda)` for the scalar
/// problem with a unit-norm column. Valid when the scalar objective is convex
/// (`gamma > 1` for MCP, `gamma > 2` for SCAD).
pub fn threshold(pen: &QuadSplinePenalty, z: f64, lambda: f64) -> f64 {
    let az = z.abs();
    let s = z.signum();
    match pen.kind() {
        PenaltyKind::L1 => s * (az - lambda).max(0.0),
        PenaltyKind::Mcp => {
            let g = pen.gamma();
            if az <= lambda {
                0.0
            } else if az <= g * lambda {
                s * (az - lambda) / (1.0 - 1.0 / g)
            } else {
                z
            }
        }
        PenaltyKind::Scad => {
            let g = pen.gamma();
            if az <= 2.0 * lambda {
                s * (az - lambda).max(0.0)
            } else if az <= g * lambda {
                ((g - 1.0) * z - s * g * lambda) / (g - 2.0)
            } else {
                z
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn l1_basics() {
        let p = QuadSplinePenalty::l1();
        assert_eq!(p.m(), 1);
        assert_eq!(p.unit_deriv(5.0), 1.0);
        assert_eq!(p.unit_value(2.0), 2.0);
        assert_eq!(p.max_concavity(), 0.0);
        assert!(p.gamma().is_infinite());
        assert_eq!(p.value(3.0, 0.5).unwrap(), 1.5);
    }

    #[test]
    fn mcp_matches_integral_definition() {
        let p = QuadSplinePenalty::mcp(2.0).unwrap();
        assert_abs_diff_eq!(p.unit_deriv(1.0), 0.5, epsilon = 1e-15);
        assert_eq!(p.unit_deriv(3.0), 0.0);
        // lambda * int_0^t (1 - x / (gamma lambda))^+ dx at lambda = 1 and 2
        let integrand = |lam: f64| move |x: f64| lam * (1.0 - x / (2.0 * lam)).max(0.0);
        let v1 = simpson(integrand(1.0), 0.0, 2.0, 2000);
        assert_abs_diff_eq!(p.unit_value(2.0), v1, epsilon = 1e-10);
        assert_abs_diff_eq!(p.unit_value(2.0), 1.0, epsilon = 1e-15);
        let v2 = simpson(integrand(2.0), 0.0, 4.0, 2000);
        assert_abs_diff_eq!(p.value(4.0, 2.0).unwrap(), v2, epsilon = 1e-10);
        assert_abs_diff_eq!(p.value(4.0, 2.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(
            QuadSplinePenalty::mcp(3.7)
                .unwrap()
                .value(0.0, 1.0)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn scad_derivative_and_concavity() {
        let p = QuadSplinePenalty::scad(3.7).unwrap();
        assert_eq!(p.unit_deriv(0.5), 1.0);
        assert_abs_diff_eq!(p.unit_deriv(2.0), 1.7 / 2.7, epsilon = 1e-15);
        assert_abs_diff_eq!(p.max_concavity(), 1.0 / 2.7, epsilon = 1e-15);
        assert_abs_diff_eq!(
            QuadSplinePenalty::scad(2.5).unwrap().max_concavity(),
            1.0 / 1.5,
            epsilon = 1e-15
        );
        assert_eq!(p.deriv(10.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn mcp_concavity_is_inverse_gamma() {
        let p = QuadSplinePenalty::mcp(3.7).unwrap();
        assert_abs_diff_eq!(p.max_concavity(), 1.0 / 3.7, epsilon = 1e-15);
        assert_abs_diff_eq!(p.deriv_zero_plus(0.3), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(QuadSplinePenalty::mcp(0.0).is_err());
        assert!(QuadSplinePenalty::mcp(-1.0).is_err());
        assert!(QuadSplinePenalty::scad(2.0).is_err());
        assert!(QuadSplinePenalty::scad(1.5).is_err());
        let p = QuadSplinePenalty::l1();
        assert!(p.value(-1.0, 1.0).is_err());
        assert!(p.deriv(0.0, 1.0).is_err());
        assert!(p.deriv(-2.0, 1.0).is_err());
    }

    #[test]
    fn zero_level_is_degenerate_but_defined() {
        let p = QuadSplinePenalty::scad(3.7).unwrap();
        assert_eq!(p.value(2.0, 0.0).unwrap(), 0.0);
        assert_eq!(p.deriv(2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn right_limit_at_knots() {
        let p = QuadSplinePenalty::scad(3.7).unwrap();
        assert_eq!(p.segment_index(1.0), 2);
        assert_eq!(p.segment_index(0.999), 1);
        assert_eq!(p.segment_index(3.7), 3);
        assert_eq!(p.unit_curvature(1.0), -1.0 / 2.7);
        assert_eq!(p.unit_curvature_conservative(1.0), -1.0 / 2.7);
        assert_eq!(p.unit_curvature_conservative(3.7), -1.0 / 2.7);
        assert_eq!(p.unit_curvature(3.7), 0.0);
    }

    #[test]
    fn minimax_property() {
        for g in [1.5, 2.5, 3.7, 10.0] {
            let mcp = QuadSplinePenalty::mcp(g).unwrap();
            assert_abs_diff_eq!(mcp.max_concavity(), 1.0 / g, epsilon = 1e-15);
        }
        for g in [2.1, 2.5, 3.7, 10.0] {
            let scad = QuadSplinePenalty::scad(g).unwrap();
            assert!(scad.max_concavity() > 1.0 / g);
        }
    }

    fn penalties() -> Vec<QuadSplinePenalty> {
        vec![
            QuadSplinePenalty::l1(),
            QuadSplinePenalty::mcp(0.7).unwrap(),
            QuadSplinePenalty::mcp(3.7).unwrap(),
            QuadSplinePenalty::scad(2.5).unwrap(),
            QuadSplinePenalty::scad(3.7).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn scaling_identity(t in 0.0f64..10.0, lambda in 0.01f64..10.0) {
            for p in penalties() {
                let lhs = p.value(t, lambda).unwrap();
                let rhs = lambda * lambda * p.value(t / lambda, 1.0).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }

        #[test]
        fn derivative_matches_finite_differences(t in 0.01f64..10.0, lambda in 0.1f64..5.0) {
            for p in penalties() {
                let u = t / lambda;
                let h = 1e-5;
                if p.knots().iter().any(|&k| (u - k).abs() < 2.0 * h / lambda) {
                    continue;
                }
                let fd = (p.value(t + h, lambda).unwrap() - p.value(t - h, lambda).unwrap()) / (2.0 * h);
                prop_assert!((fd - p.deriv(t, lambda).unwrap()).abs() <= 1e-6);
            }
        }

        #[test]
        fn threshold_constraints(t in 0.0f64..50.0, lambda in 0.01f64..5.0) {
            for p in penalties().into_iter().filter(|p| p.kind() != PenaltyKind::L1) {
                prop_assert!((p.deriv_zero_plus(lambda) - lambda).abs() < 1e-15);
                let tt = p.gamma() * lambda + t;
                prop_assert_eq!(p.deriv(tt, lambda).unwrap(), 0.0);
            }
        }

        #[test]
        fn monotone_value_and_derivative(a in 0.001f64..10.0, d in 0.0f64..5.0, lambda in 0.1f64..3.0) {
            for p in penalties() {
                let b = a + d;
                prop_assert!(p.value(b, lambda).unwrap() >= p.value(a, lambda).unwrap() - 1e-12);
                if p.kind() != PenaltyKind::L1 {
                    prop_assert!(p.deriv(b, lambda).unwrap() <= p.deriv(a, lambda).unwrap() + 1e-12);
                    prop_assert!(p.deriv(b, lambda).unwrap() >= 0.0);
                }
            }
        }

        #[test]
        fn value_is_continuous_at_knots(lambda in 0.1f64..3.0) {
            for p in penalties() {
                for &k in p.knots() {
                    let t = k * lambda;
                    let left = p.value((t - 1e-9).max(0.0), lambda).unwrap();
                    let right = p.value(t + 1e-9, lambda).unwrap();
                    prop_assert!((left - right).abs() < 1e-8);
                }
            }
        }
    }
}
