//! Main-branch tracking of the solution set of the penalized KKT system.
//!
//! With `tau = 1 / lambda`, `z = tau z*` and `b = tau beta` the KKT system reads
//!
//! ```text
//! tau z*_j - chi_j' b = sgn(b_j) rho_m'(|b_j|)   b_j != 0
//! |tau z*_j - chi_j' b| <= 1                      b_j  = 0
//! ```
//!
//! where `chi_j` is the j-th row of the Gram matrix. Inside a facet (fixed
//! signs and spline segments) the equality rows are affine in `(tau, b)`, so
//! the solution set is a line. The tracker starts at the origin, walks each
//! line until the first coordinate leaves its facet, and continues into the
//! neighbouring facet with the orientation that moves away from the face it
//! entered through. `tau` is allowed to decrease.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::design::StandardizedDesign;
use crate::error::{Error, Result};
use crate::kkt::{rescaled_kkt_report, KktReport, DEFAULT_KKT_TOL};
use crate::linalg::{null_vector, principal, solve_refined};
use crate::penalty::QuadSplinePenalty;

/// Boundary quantities closer than this are treated as simultaneous events.
pub const EVENT_TOL: f64 = 1e-10;
/// Magnitude of the deterministic perturbation applied to `z*` after a degenerate junction.
pub const JITTER: f64 = 1e-9;
/// Largest `tau * max_j |z*_j|` at which events are still resolved; beyond it
/// the path ends on its current ray.
pub const TAU_HORIZON: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub max_steps: usize,
    /// Sup-norm tolerance on `z* - G beta` for declaring a zero-penalty fit.
    pub fit_tol: f64,
    /// Stop once `tau` exceeds this value (the path is not tracked further).
    pub tau_max: Option<f64>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            max_steps: 10_000,
            fit_tol: 1e-9,
            tau_max: None,
        }
    }
}

impl PathOptions {
    /// Options that stop tracking once `lambda` drops below `lambda_min`.
    pub fn down_to(lambda_min: f64) -> Self {
        PathOptions {
            tau_max: Some(1.0 / lambda_min),
            ..Default::default()
        }
    }
}

/// Per-coordinate facet label: 0 when inactive, `+-k` for sign and 1-based spline segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FacetState(pub Vec<i8>);

impl FacetState {
    fn zeros(p: usize) -> Self {
        FacetState(vec![0; p])
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(j, _)| j)
    }

    pub fn num_active(&self) -> usize {
        self.0.iter().filter(|&&e| e != 0).count()
    }

    /// Classifies `b` against the knots of `pen`.
    pub fn classify(b: &[f64], pen: &QuadSplinePenalty) -> Self {
        FacetState(
            b.iter()
                .map(|&v| {
                    if v == 0.0 {
                        0
                    } else {
                        (v.signum() * pen.segment_index(v.abs()) as f64) as i8
                    }
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathEvent {
    Origin,
    Activate {
        j: usize,
    },
    Deactivate {
        j: usize,
    },
    /// Coordinate `j` moved into spline segment `segment` (1-based).
    KnotCross {
        j: usize,
        segment: usize,
    },
    TerminateFit,
    TerminateCap,
    /// Tracking stopped at the configured `tau_max`.
    TerminateLimit,
}

impl PathEvent {
    /// Coordinate the event refers to, if any.
    pub fn coordinate(&self) -> Option<usize> {
        match *self {
            PathEvent::Activate { j }
            | PathEvent::Deactivate { j }
            | PathEvent::KnotCross { j, .. } => Some(j),
            _ => None,
        }
    }

    fn priority(&self) -> u8 {
        match self {
            PathEvent::Deactivate { .. } => 0,
            PathEvent::KnotCross { .. } => 1,
            _ => 2,
        }
    }
}

/// Labels use 1-based coordinates and no commas: `activate:3`, `knot_cross:3:2`.
impl fmt::Display for PathEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PathEvent::Origin => write!(f, "origin"),
            PathEvent::Activate { j } => write!(f, "activate:{}", j + 1),
            PathEvent::Deactivate { j } => write!(f, "deactivate:{}", j + 1),
            PathEvent::KnotCross { j, segment } => write!(f, "knot_cross:{}:{}", j + 1, segment),
            PathEvent::TerminateFit => write!(f, "terminate_fit"),
            PathEvent::TerminateCap => write!(f, "terminate_cap"),
            PathEvent::TerminateLimit => write!(f, "terminate_limit"),
        }
    }
}

impl std::str::FromStr for PathEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let idx = |k: usize| -> Result<usize> {
            parts
                .get(k)
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::Parse(format!("bad event label `{s}`")))
        };
        Ok(match parts[0] {
            "origin" => PathEvent::Origin,
            "activate" => PathEvent::Activate { j: idx(1)? - 1 },
            "deactivate" => PathEvent::Deactivate { j: idx(1)? - 1 },
            "knot_cross" => PathEvent::KnotCross {
                j: idx(1)? - 1,
                segment: idx(2)?,
            },
            "terminate_fit" => PathEvent::TerminateFit,
            "terminate_cap" => PathEvent::TerminateCap,
            "terminate_limit" => PathEvent::TerminateLimit,
            _ => return Err(Error::Parse(format!("bad event label `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBreakpoint {
    pub step: usize,
    pub tau: f64,
    pub b: Vec<f64>,
    /// Facet of the segment ending at this breakpoint.
    pub facet: FacetState,
    pub event: PathEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Fit,
    Cap,
    Limit,
}

#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub breakpoints: Vec<PathBreakpoint>,
    pub termination: Termination,
    /// Number of facet transitions (activate, deactivate, knot crossing).
    pub steps_used: usize,
    /// For `Termination::Fit`: `db / dtau` along the final unbounded ray.
    pub tail: Option<Vec<f64>>,
    /// Whether the final ray attains `z* = G beta` (zero-penalty optimality).
    pub perfect_fit: bool,
    /// Whether `z*` had to be perturbed to get past a degenerate junction.
    pub jittered: bool,
    pub penalty: QuadSplinePenalty,
    pub z_star: DVector<f64>,
    pub gram: Arc<DMatrix<f64>>,
}

impl SolutionPath {
    pub fn p(&self) -> usize {
        self.z_star.len()
    }

    /// Largest `tau` reached by a breakpoint (infinite with an unbounded final ray).
    pub fn tau_reach(&self) -> f64 {
        if self.tail.is_some() {
            f64::INFINITY
        } else {
            self.breakpoints.iter().map(|bp| bp.tau).fold(0.0, f64::max)
        }
    }

    /// Whether `tau` ever decreases along the path.
    pub fn tau_monotone(&self) -> bool {
        self.breakpoints.windows(2).all(|w| w[1].tau >= w[0].tau)
    }

    /// Facets traversed by the segments, in order.
    pub fn visited_facets(&self) -> Vec<&FacetState> {
        let mut out: Vec<&FacetState> = self.breakpoints[1..]
            .iter()
            .filter(|bp| !matches!(bp.event, PathEvent::TerminateFit | PathEvent::TerminateCap))
            .map(|bp| &bp.facet)
            .collect();
        if let Some(last) = self.breakpoints.last() {
            if last.event == PathEvent::TerminateFit {
                out.push(&last.facet);
            }
        }
        out
    }

    /// Every point where the path meets `tau = 1 / lambda`, as rescaled `b`.
    pub fn crossings(&self, tau: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for w in self.breakpoints.windows(2) {
            let (a, c) = (&w[0], &w[1]);
            let (lo, hi) = if a.tau <= c.tau {
                (a.tau, c.tau)
            } else {
                (c.tau, a.tau)
            };
            if tau < lo || tau > hi {
                continue;
            }
            if a.tau == c.tau {
                out.push(a.b.clone());
                out.push(c.b.clone());
                continue;
            }
            let w = (tau - a.tau) / (c.tau - a.tau);
            if w == 0.0 {
                out.push(a.b.clone());
            } else if w == 1.0 {
                out.push(c.b.clone());
            } else {
                out.push(
                    a.b.iter()
                        .zip(&c.b)
                        .zip(&c.facet.0)
                        .map(|((x, y), &e)| if e == 0 { 0.0 } else { x + w * (y - x) })
                        .collect(),
                );
            }
        }
        if let (Some(tail), Some(last)) = (&self.tail, self.breakpoints.last()) {
            if tau > last.tau {
                let dt = tau - last.tau;
                out.push(
                    last.b
                        .iter()
                        .zip(tail)
                        .zip(&last.facet.0)
                        .map(|((x, d), &e)| if e == 0 { 0.0 } else { x + dt * d })
                        .collect(),
                );
            }
        }
        out
    }

    /// Rescaled KKT report of a point on this path.
    pub fn kkt_at(&self, b: &[f64], tau: f64, tol: f64) -> Result<KktReport> {
        rescaled_kkt_report(&self.gram, &self.z_star, b, tau, &self.penalty, tol)
    }
}

/// Coefficients at one penalty level, selected from the path.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub lambda: f64,
    /// Coefficients on the standardized scale.
    pub beta: Vec<f64>,
    pub active: Vec<usize>,
    pub kkt: KktReport,
    pub sigma_hat: Option<f64>,
    /// Number of path points at this level; more than one only without global convexity.
    pub crossings: usize,
}

impl FitResult {
    pub fn l1_norm(&self) -> f64 {
        self.beta.iter().map(|v| v.abs()).sum()
    }
}

/// Computes the main branch of the solution path for `(d, y, pen)`.
pub fn compute_path(
    d: &StandardizedDesign,
    y: &[f64],
    pen: &QuadSplinePenalty,
    opts: &PathOptions,
) -> Result<SolutionPath> {
    let z = d.z_star(y)?;
    compute_path_from_gram(d.gram_shared(), z, pen, opts)
}

/// Same as [`compute_path`] from precomputed `X'X/n` and `X'y/n`.
pub fn compute_path_from_gram(
    gram: Arc<DMatrix<f64>>,
    z_star: DVector<f64>,
    pen: &QuadSplinePenalty,
    opts: &PathOptions,
) -> Result<SolutionPath> {
    let p = gram.nrows();
    if gram.ncols() != p || z_star.len() != p {
        return Err(Error::DimensionMismatch {
            what: "z* length",
            expected: p,
            actual: z_star.len(),
        });
    }
    if opts.max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be positive".into()));
    }
    let first = Tracker::new(&gram, &z_star, pen, opts).run();
    let (traced, jittered) = match first {
        Ok(t) => (t, false),
        Err(reason) => {
            let mut perturbed = z_star.clone();
            for (j, v) in perturbed.iter_mut().enumerate() {
                *v += JITTER * jitter_unit(j);
            }
            match Tracker::new(&gram, &perturbed, pen, opts).run() {
                Ok(t) => (t, true),
                Err(again) => {
                    return Err(Error::Degenerate(format!(
                        "{reason}; after jitter: {again}"
                    )));
                }
            }
        }
    };
    Ok(SolutionPath {
        breakpoints: traced.breakpoints,
        termination: traced.termination,
        steps_used: traced.steps,
        tail: traced.tail,
        perfect_fit: traced.perfect_fit,
        jittered,
        penalty: pen.clone(),
        z_star,
        gram,
    })
}

/// Deterministic values in `[-1, 1)` from the golden-ratio sequence.
fn jitter_unit(j: usize) -> f64 {
    let g = 0.618_033_988_749_894_9_f64;
    2.0 * ((j as f64 + 1.0) * g).fract() - 1.0
}

/// Chooses the sparsest path point at `lambda`, breaking ties by smallest l1 norm.
pub fn solve_at_lambda(path: &SolutionPath, lambda: f64) -> Result<FitResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let tau = 1.0 / lambda;
    let points = path.crossings(tau);
    let best = points
        .iter()
        .map(|b| {
            let nnz = b.iter().filter(|&&v| v != 0.0).count();
            let l1: f64 = b.iter().map(|v| v.abs()).sum();
            (nnz, l1, b)
        })
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let Some((_, _, b)) = best else {
        return Err(Error::BelowPathRange {
            lambda,
            min_lambda: 1.0 / path.tau_reach(),
        });
    };
    let beta: Vec<f64> = b.iter().map(|v| v / tau).collect();
    let active = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    let kkt = path.kkt_at(b, tau, DEFAULT_KKT_TOL)?;
    Ok(FitResult {
        lambda,
        beta,
        active,
        kkt,
        sigma_hat: None,
        crossings: points.len(),
    })
}

/// Maps [`solve_at_lambda`] over a grid; failures stay per grid point.
pub fn path_to_coefficients(path: &SolutionPath, lambda_grid: &[f64]) -> Vec<Result<FitResult>> {
    lambda_grid
        .iter()
        .map(|&l| solve_at_lambda(path, l))
        .collect()
}

/// Computes the path down to `lambda` and returns the fit there.
pub fn fit_at_lambda(
    d: &StandardizedDesign,
    y: &[f64],
    pen: &QuadSplinePenalty,
    lambda: f64,
) -> Result<FitResult> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let opts = PathOptions::down_to(lambda * (1.0 - 1e-12));
    let path = compute_path(d, y, pen, &opts)?;
    solve_at_lambda(&path, lambda)
}

/// How the current facet was entered; fixes the orientation of its segment.
#[derive(Debug, Clone, Copy)]
enum Entry {
    Origin,
    /// `b_j` must move away from 0 (activation) or up from a knot.
    Away {
        j: usize,
    },
    /// `|b_j|` must move down from a knot.
    Down {
        j: usize,
    },
    /// `r_j` must move back inside from `sign`.
    Released {
        j: usize,
        sign: f64,
    },
}

struct Traced {
    breakpoints: Vec<PathBreakpoint>,
    termination: Termination,
    steps: usize,
    tail: Option<Vec<f64>>,
    perfect_fit: bool,
}

struct Tracker<'a> {
    gram: &'a DMatrix<f64>,
    z: &'a DVector<f64>,
    pen: &'a QuadSplinePenalty,
    opts: &'a PathOptions,
}

struct Candidate {
    t: f64,
    rate: f64,
    event: PathEvent,
    sign: f64,
}

impl<'a> Tracker<'a> {
    fn new(
        gram: &'a DMatrix<f64>,
        z: &'a DVector<f64>,
        pen: &'a QuadSplinePenalty,
        opts: &'a PathOptions,
    ) -> Self {
        Tracker { gram, z, pen, opts }
    }

    /// Solves the facet equations together with the event equation for
    /// `(tau, b_A)`, which pins the breakpoint more accurately than
    /// re-solving at a fixed `tau` when the facet matrix is ill-conditioned.
    fn breakpoint_solve(
        &self,
        active: &[usize],
        mat: &DMatrix<f64>,
        offset: &dyn Fn(usize) -> f64,
        event: PathEvent,
        target: f64,
    ) -> Option<(f64, Vec<f64>)> {
        let k = active.len();
        let mut sys = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (a, &j) in active.iter().enumerate() {
            sys[(a, 0)] = -self.z[j];
            sys.view_mut((a, 1), (1, k)).copy_from(&mat.row(a));
            rhs[a] = -offset(j);
        }
        match event {
            PathEvent::Deactivate { j } | PathEvent::KnotCross { j, .. } => {
                let a = active.iter().position(|&l| l == j)?;
                sys[(k, a + 1)] = 1.0;
            }
            PathEvent::Activate { j } => {
                sys[(k, 0)] = self.z[j];
                for (a, &l) in active.iter().enumerate() {
                    sys[(k, a + 1)] = -self.gram[(j, l)];
                }
            }
            _ => return None,
        }
        rhs[k] = target;
        let sol = solve_refined(&sys, &rhs)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some((sol[0], sol.rows(1, k).iter().copied().collect()))
    }

    fn run(&self) -> std::result::Result<Traced, String> {
        let p = self.z.len();
        let m = self.pen.m();
        let mut tau = 0.0;
        let mut b = vec![0.0; p];
        let mut facet = FacetState::zeros(p);
        let mut entry = Entry::Origin;
        let mut visited: HashSet<FacetState> = HashSet::new();
        visited.insert(facet.clone());
        let mut bps = vec![PathBreakpoint {
            step: 0,
            tau,
            b: b.clone(),
            facet: facet.clone(),
            event: PathEvent::Origin,
        }];
        let mut steps = 0;
        let horizon = TAU_HORIZON / self.z.amax().max(f64::MIN_POSITIVE);

        loop {
            let active: Vec<usize> = facet.active().collect();
            let sign = |j: usize| (facet.0[j] as f64).signum();
            let seg = |j: usize| facet.0[j].unsigned_abs() as usize;

            // facet system M b_A = tau z_A - s_A * a_A
            let mut mat = principal(self.gram, &active);
            for (a, &j) in active.iter().enumerate() {
                mat[(a, a)] += self.pen.segment(seg(j)).slope;
            }
            let z_a = DVector::from_iterator(active.len(), active.iter().map(|&j| self.z[j]));
            let (mut dtau, mut db_a, regular) = if active.is_empty() {
                (1.0, DVector::zeros(0), true)
            } else if let Some(v) = solve_refined(&mat, &z_a) {
                (1.0, v, true)
            } else {
                let mut k = DMatrix::zeros(active.len(), active.len() + 1);
                k.column_mut(0).copy_from(&z_a);
                k.view_mut((0, 1), (active.len(), active.len()))
                    .copy_from(&(-&mat));
                let v = null_vector(&k, 1e-12)
                    .ok_or_else(|| format!("facet at step {steps} does not determine a line"))?;
                (v[0], v.rows(1, active.len()).into_owned(), false)
            };

            let mut db = vec![0.0; p];
            for (a, &j) in active.iter().enumerate() {
                db[j] = db_a[a];
            }
            // residual r_j = tau z_j - chi_j' b and its rate along the direction
            let resid_rate = |j: usize, dt: f64, db: &[f64]| -> f64 {
                dt * self.z[j]
                    - active
                        .iter()
                        .map(|&l| self.gram[(j, l)] * db[l])
                        .sum::<f64>()
            };

            let q = match entry {
                Entry::Origin => dtau,
                Entry::Away { j } => sign(j) * db[j],
                Entry::Down { j } => -sign(j) * db[j],
                Entry::Released { j, sign: s } => -s * resid_rate(j, dtau, &db),
            };
            let scale = dtau.abs().max(db_a.amax()).max(1e-300);
            if q.abs() <= 1e-13 * scale {
                return Err(format!("orientation undetermined at step {steps}"));
            }
            if q < 0.0 {
                dtau = -dtau;
                db_a.neg_mut();
                db.iter_mut().for_each(|v| *v = -*v);
            }

            // zero-penalty optimality of the facet's asymptote
            let perfect_fit = dtau > 0.0 && {
                let beta_inf: Vec<f64> = db.iter().map(|v| v / dtau).collect();
                (0..p).all(|j| {
                    let fitted: f64 = active
                        .iter()
                        .map(|&l| self.gram[(j, l)] * beta_inf[l])
                        .sum();
                    (self.z[j] - fitted).abs() <= self.opts.fit_tol
                })
            };

            let mut cands: Vec<Candidate> = Vec::new();
            for &j in &active {
                let s = sign(j);
                let k = seg(j);
                let rate = s * db[j];
                let mag = b[j].abs();
                if rate > 0.0 && k < m {
                    let t = (self.pen.segment_upper(k) - mag) / rate;
                    cands.push(Candidate {
                        t: t.max(0.0),
                        rate,
                        event: PathEvent::KnotCross { j, segment: k + 1 },
                        sign: s,
                    });
                } else if rate < 0.0 {
                    let t = (mag - self.pen.segment_lower(k)) / -rate;
                    let event = if k == 1 {
                        PathEvent::Deactivate { j }
                    } else {
                        PathEvent::KnotCross { j, segment: k - 1 }
                    };
                    cands.push(Candidate {
                        t: t.max(0.0),
                        rate: -rate,
                        event,
                        sign: s,
                    });
                }
            }
            if !perfect_fit {
                for j in 0..p {
                    if facet.0[j] != 0 {
                        continue;
                    }
                    let r = tau * self.z[j]
                        - active
                            .iter()
                            .map(|&l| self.gram[(j, l)] * b[l])
                            .sum::<f64>();
                    let rate = resid_rate(j, dtau, &db);
                    let (t, s) = if rate > 0.0 {
                        ((1.0 - r) / rate, 1.0)
                    } else if rate < 0.0 {
                        ((-1.0 - r) / rate, -1.0)
                    } else {
                        continue;
                    };
                    if let Entry::Released { j: e, sign } = entry {
                        // the face just left is not an exit
                        if e == j && s == sign && t <= EVENT_TOL {
                            continue;
                        }
                    }
                    cands.push(Candidate {
                        t: t.max(0.0),
                        rate: rate.abs(),
                        event: PathEvent::Activate { j },
                        sign: s,
                    });
                }
            }

            let mut t_min = cands.iter().map(|c| c.t).fold(f64::INFINITY, f64::min);
            if dtau > 0.0 && tau + t_min * dtau > horizon {
                // rounding in tau z - G b exceeds the event tolerances out here
                t_min = f64::INFINITY;
            }
            let limit_t = match self.opts.tau_max {
                Some(tm) if dtau > 0.0 => (tm - tau) / dtau,
                _ => f64::INFINITY,
            };

            if t_min.is_infinite() && (limit_t.is_infinite() || perfect_fit) {
                if dtau <= 0.0 {
                    return Err(format!("path leaves facet at step {steps} without an exit"));
                }
                let tail: Vec<f64> = db.iter().map(|v| v / dtau).collect();
                bps.push(PathBreakpoint {
                    step: steps,
                    tau,
                    b: b.clone(),
                    facet: facet.clone(),
                    event: PathEvent::TerminateFit,
                });
                return Ok(Traced {
                    breakpoints: bps,
                    termination: Termination::Fit,
                    steps,
                    tail: Some(tail),
                    perfect_fit,
                });
            }

            if limit_t < t_min {
                let t = limit_t.max(0.0);
                tau += t * dtau;
                for &j in &active {
                    b[j] += t * db[j];
                }
                bps.push(PathBreakpoint {
                    step: steps,
                    tau,
                    b: b.clone(),
                    facet: facet.clone(),
                    event: PathEvent::TerminateLimit,
                });
                return Ok(Traced {
                    breakpoints: bps,
                    termination: Termination::Limit,
                    steps,
                    tail: None,
                    perfect_fit: false,
                });
            }

            // simultaneous events: boundary quantities within EVENT_TOL at t_min
            let chosen = cands
                .iter()
                .filter(|c| (c.t - t_min) * c.rate <= EVENT_TOL)
                .min_by(|a, c| {
                    a.event
                        .priority()
                        .cmp(&c.event.priority())
                        .then(a.event.coordinate().cmp(&c.event.coordinate()))
                })
                .expect("t_min is attained");
            let event = chosen.event;
            let ev_sign = chosen.sign;
            let t = t_min;

            tau += t * dtau;
            for &j in &active {
                b[j] += t * db[j];
            }
            let knot_of = |j: usize, segment: usize| {
                if segment > seg(j) {
                    self.pen.segment_lower(segment)
                } else {
                    self.pen.segment_upper(segment)
                }
            };
            let target = match event {
                PathEvent::Deactivate { .. } => 0.0,
                PathEvent::KnotCross { j, segment } => ev_sign * knot_of(j, segment),
                _ => ev_sign,
            };
            let corrected = self.breakpoint_solve(
                &active,
                &mat,
                &|j| sign(j) * self.pen.segment(seg(j)).intercept,
                event,
                target,
            );
            let accepted = corrected.filter(|(t_new, b_new)| {
                let tol = 1e-6;
                (t_new - tau).abs() <= tol * tau.abs().max(1.0)
                    && active
                        .iter()
                        .zip(b_new.iter())
                        .all(|(&j, v)| (v - b[j]).abs() <= tol * b[j].abs().max(1.0))
            });
            if let Some((t_new, b_new)) = accepted {
                tau = t_new;
                for (a, &j) in active.iter().enumerate() {
                    b[j] = b_new[a];
                }
            } else if regular && !active.is_empty() {
                // re-solve the facet equations at the new tau to stop drift
                let rhs = DVector::from_iterator(
                    active.len(),
                    active
                        .iter()
                        .map(|&j| tau * self.z[j] - sign(j) * self.pen.segment(seg(j)).intercept),
                );
                if let Some(exact) = solve_refined(&mat, &rhs) {
                    for (a, &j) in active.iter().enumerate() {
                        b[j] = exact[a];
                    }
                }
            }
            match event {
                PathEvent::Deactivate { j } => b[j] = 0.0,
                PathEvent::KnotCross { j, segment } => b[j] = ev_sign * knot_of(j, segment),
                _ => {}
            }

            steps += 1;
            bps.push(PathBreakpoint {
                step: steps,
                tau,
                b: b.clone(),
                facet: facet.clone(),
                event,
            });

            entry = match event {
                PathEvent::Activate { j } => {
                    facet.0[j] = ev_sign as i8;
                    Entry::Away { j }
                }
                PathEvent::Deactivate { j } => {
                    facet.0[j] = 0;
                    Entry::Released { j, sign: ev_sign }
                }
                PathEvent::KnotCross { j, segment } => {
                    let up = segment > seg(j);
                    facet.0[j] = (ev_sign * segment as f64) as i8;
                    if up {
                        Entry::Away { j }
                    } else {
                        Entry::Down { j }
                    }
                }
                _ => unreachable!("only facet transitions are candidates"),
            };
            if !visited.insert(facet.clone()) {
                return Err(format!("facet revisited at step {steps}"));
            }

            if steps >= self.opts.max_steps {
                bps.push(PathBreakpoint {
                    step: steps,
                    tau,
                    b: b.clone(),
                    facet: facet.clone(),
                    event: PathEvent::TerminateCap,
                });
                return Ok(Traced {
                    breakpoints: bps,
                    termination: Termination::Cap,
                    steps,
                    tail: None,
                    perfect_fit: false,
                });
            }
        }
    }
}
