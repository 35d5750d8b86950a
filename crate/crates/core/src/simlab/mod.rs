//! Replicated experiments on the Gaussian linear model `y = X beta + eps`.
//!
//! Each replication draws its own design and noise from a ChaCha stream keyed
//! by `(seed, rep_index)`, so results do not depend on scheduling. Replications
//! run in parallel and are aggregated in replication order.

mod config;
mod cv;

pub use config::{default_ratio_grid, ratio_grid, Method, SimConfig, SupportLayout};
pub use cv::{cross_validate, fold_assignment, CvResult};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::design::StandardizedDesign;
use crate::error::Result;
use crate::path::{compute_path, solve_at_lambda, PathOptions, Termination};
use crate::selection::{
    ar1_covariance, lambda_unit, model_error, oracle_lse, selection_metrics, ModelTruth,
};

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct SimData {
    pub design: StandardizedDesign,
    pub y: Vec<f64>,
    pub truth: ModelTruth,
}

fn rep_rng(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

/// Draws AR(1) Gaussian design rows, standardizes the columns and draws `y`.
pub fn generate_data(cfg: &SimConfig, rep_index: u64) -> Result<SimData> {
    cfg.validate()?;
    let mut rng = rep_rng(cfg.seed, rep_index);
    let (n, p) = (cfg.n, cfg.p);
    let r = cfg.design_correlation;
    let innov = (1.0 - r * r).sqrt();
    let mut raw = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            let v = if j == 0 { e } else { r * prev + innov * e };
            raw[(i, j)] = v;
            prev = v;
        }
    }
    let design = StandardizedDesign::standardize(&raw)?;
    let mut beta = vec![0.0; p];
    for j in cfg.support_layout.indices(p, cfg.d_o) {
        beta[j] = cfg.beta_star;
    }
    let signal = design.x() * nalgebra::DVector::from_column_slice(&beta);
    let y = signal
        .iter()
        .map(|s| {
            s + cfg.sigma * {
                let e: f64 = StandardNormal.sample(&mut rng);
                e
            }
        })
        .collect();
    Ok(SimData {
        design,
        y,
        truth: ModelTruth::new(beta, cfg.sigma),
    })
}

/// Aggregated metrics for one method at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub method: Method,
    /// `lambda / sqrt(log(p)/n)`.
    pub lambda_ratio: f64,
    /// Mean of `(beta_hat - beta)' Sigma (beta_hat - beta)` with the population AR(1) covariance.
    pub mean_me: f64,
    /// Same with the empirical Gram matrix `X'X/n` of each replication.
    pub mean_me_gram: f64,
    pub mc_stderr_me: f64,
    pub mean_tm: f64,
    pub cs_rate: f64,
    pub sign_rate: f64,
    pub false_inclusion_rate: f64,
    pub steps_mean: f64,
    /// Replications aggregated into this record.
    pub replications: usize,
    /// Replications whose path did not reach this level.
    pub failures: usize,
    /// Replications in the unbiasedness region (`A_hat = A_o`, `min |oracle_j| > gamma lambda`).
    pub oracle_region_count: usize,
    /// Largest `max_j |beta_hat_j - oracle_j|` over those replications.
    pub oracle_region_max_gap: f64,
}

/// Records plus per-method path failures.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<MetricsRecord>,
    /// `(method, paths that hit the step cap or failed)`.
    pub path_failures: Vec<(Method, usize)>,
}

impl ExperimentReport {
    pub fn record(&self, method: Method, lambda_ratio: f64) -> Option<&MetricsRecord> {
        self.records
            .iter()
            .find(|r| r.method == method && (r.lambda_ratio - lambda_ratio).abs() < 1e-12)
    }

    pub fn method_records(&self, method: Method) -> impl Iterator<Item = &MetricsRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }
}

#[derive(Debug, Clone, Copy)]
struct PointOutcome {
    me: f64,
    me_gram: f64,
    tm: usize,
    cs: bool,
    sign: bool,
    false_inclusion: bool,
    oracle_gap: Option<f64>,
}

#[derive(Debug, Clone)]
struct MethodOutcome {
    steps: Option<usize>,
    incomplete: bool,
    points: Vec<Option<PointOutcome>>,
}

fn run_replication(
    cfg: &SimConfig,
    rep: usize,
    covariance: &DMatrix<f64>,
) -> Result<Vec<MethodOutcome>> {
    let data = generate_data(cfg, rep as u64)?;
    let unit = lambda_unit(cfg.p, cfg.n);
    let lambda_min = cfg.lambda_grid[0] * unit;
    let oracle = oracle_lse(&data.design, &data.y, &data.truth.support).ok();
    let oracle_min = oracle.as_ref().map(|o| {
        data.truth
            .support
            .iter()
            .map(|&j| o[j].abs())
            .fold(f64::INFINITY, f64::min)
    });

    cfg.methods
        .iter()
        .map(|&method| {
            let gamma = cfg.gamma_for(method);
            let pen = method.penalty(gamma)?;
            let opts = PathOptions::down_to(lambda_min * (1.0 - 1e-9));
            let path = match compute_path(&data.design, &data.y, &pen, &opts) {
                Ok(path) => path,
                Err(_) => {
                    return Ok(MethodOutcome {
                        steps: None,
                        incomplete: true,
                        points: vec![None; cfg.lambda_grid.len()],
                    })
                }
            };
            let points = cfg
                .lambda_grid
                .iter()
                .map(|&ratio| {
                    let lambda = ratio * unit;
                    let fit = solve_at_lambda(&path, lambda).ok()?;
                    let me = model_error(&fit.beta, &data.truth.beta, covariance).ok()?;
                    let me_gram =
                        model_error(&fit.beta, &data.truth.beta, data.design.gram()).ok()?;
                    let sel = selection_metrics(&fit.beta, &data.truth);
                    let oracle_gap = match (&oracle, oracle_min) {
                        (Some(o), Some(omin))
                            if method != Method::Lasso && sel.cs && omin > gamma * lambda =>
                        {
                            Some(
                                fit.beta
                                    .iter()
                                    .zip(o)
                                    .map(|(a, b)| (a - b).abs())
                                    .fold(0.0, f64::max),
                            )
                        }
                        _ => None,
                    };
                    Some(PointOutcome {
                        me,
                        me_gram,
                        tm: sel.tm,
                        cs: sel.cs,
                        sign: sel.sign_consistent,
                        false_inclusion: sel.false_inclusion,
                        oracle_gap,
                    })
                })
                .collect();
            Ok(MethodOutcome {
                steps: Some(path.steps_used),
                incomplete: path.termination == Termination::Cap,
                points,
            })
        })
        .collect()
}

/// Runs `cfg.replications` replications and aggregates per method and grid point.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let covariance = ar1_covariance(cfg.p, cfg.design_correlation);
    let outcomes: Vec<Vec<MethodOutcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep, &covariance))
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, &outcomes))
}

fn aggregate(cfg: &SimConfig, outcomes: &[Vec<MethodOutcome>]) -> ExperimentReport {
    let mut records = Vec::with_capacity(cfg.methods.len() * cfg.lambda_grid.len());
    let mut path_failures = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let steps: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o[mi].steps.map(|s| s as f64))
            .collect();
        let steps_mean = mean(&steps);
        path_failures.push((method, outcomes.iter().filter(|o| o[mi].incomplete).count()));
        for (gi, &ratio) in cfg.lambda_grid.iter().enumerate() {
            let pts: Vec<PointOutcome> = outcomes.iter().filter_map(|o| o[mi].points[gi]).collect();
            let k = pts.len();
            let me: Vec<f64> = pts.iter().map(|p| p.me).collect();
            let mean_me = mean(&me);
            let var = if k > 1 {
                me.iter().map(|v| (v - mean_me).powi(2)).sum::<f64>() / (k - 1) as f64
            } else {
                0.0
            };
            let rate = |f: fn(&PointOutcome) -> bool| {
                if k == 0 {
                    f64::NAN
                } else {
                    pts.iter().filter(|p| f(p)).count() as f64 / k as f64
                }
            };
            let gaps: Vec<f64> = pts.iter().filter_map(|p| p.oracle_gap).collect();
            records.push(MetricsRecord {
                method,
                lambda_ratio: ratio,
                mean_me,
                mean_me_gram: mean(&pts.iter().map(|p| p.me_gram).collect::<Vec<_>>()),
                mc_stderr_me: (var / k.max(1) as f64).sqrt(),
                mean_tm: mean(&pts.iter().map(|p| p.tm as f64).collect::<Vec<_>>()),
                cs_rate: rate(|p| p.cs),
                sign_rate: rate(|p| p.sign),
                false_inclusion_rate: rate(|p| p.false_inclusion),
                steps_mean,
                replications: k,
                failures: outcomes.len() - k,
                oracle_region_count: gaps.len(),
                oracle_region_max_gap: gaps.iter().copied().fold(0.0, f64::max),
            });
        }
    }
    ExperimentReport {
        records,
        path_failures,
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SimConfig {
        let mut cfg = SimConfig::new(50, 12, 3, 1.5, 3.7);
        cfg.replications = 6;
        cfg.lambda_grid = vec![0.5, 1.0, 2.0];
        cfg
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_cfg();
        let a = generate_data(&cfg, 3).unwrap();
        let b = generate_data(&cfg, 3).unwrap();
        assert_eq!(a.design.x(), b.design.x());
        assert_eq!(a.y, b.y);
        let c = generate_data(&cfg, 4).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn generation_shapes() {
        let cfg = small_cfg();
        let d = generate_data(&cfg, 0).unwrap();
        assert_eq!(d.design.x().shape(), (50, 12));
        assert_eq!(d.y.len(), 50);
        assert_eq!(d.truth.d_o(), 3);
        assert_eq!(d.truth.beta_star(), 1.5);
    }

    #[test]
    fn independent_design_has_small_correlations() {
        let mut cfg = SimConfig::new(400, 6, 2, 1.0, 3.0);
        cfg.design_correlation = 0.0;
        let mut inside = 0;
        let mut total = 0;
        for rep in 0..20 {
            let d = generate_data(&cfg, rep).unwrap();
            let g = d.design.gram();
            for i in 0..6 {
                for j in 0..i {
                    total += 1;
                    if g[(i, j)].abs() <= 4.0 / (400f64).sqrt() {
                        inside += 1;
                    }
                }
            }
        }
        assert!(inside as f64 >= 0.99 * total as f64, "{inside}/{total}");
    }

    #[test]
    fn record_count_and_determinism() {
        let cfg = small_cfg();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.records.len(), 9);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        for r in &a.records {
            assert_eq!(r.replications + r.failures, 6);
            for v in [r.cs_rate, r.sign_rate, r.false_inclusion_rate] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn huge_lambda_selects_nothing() {
        let mut cfg = small_cfg();
        cfg.lambda_grid = vec![1e3];
        let rep = run_experiment(&cfg).unwrap();
        let cov = ar1_covariance(12, 0.5);
        let zero_me = model_error(
            &[0.0; 12],
            &generate_data(&cfg, 0).unwrap().truth.beta,
            &cov,
        )
        .unwrap();
        for r in &rep.records {
            assert_eq!(r.mean_tm, 3.0);
            assert!((r.mean_me - zero_me).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_ignores_execution_order() {
        let cfg = small_cfg();
        let cov = ar1_covariance(cfg.p, cfg.design_correlation);
        let forward: Vec<_> = (0..cfg.replications)
            .map(|r| run_replication(&cfg, r, &cov).unwrap())
            .collect();
        let mut backward: Vec<(usize, Vec<MethodOutcome>)> = (0..cfg.replications)
            .rev()
            .map(|r| (r, run_replication(&cfg, r, &cov).unwrap()))
            .collect();
        backward.sort_by_key(|(r, _)| *r);
        let backward: Vec<_> = backward.into_iter().map(|(_, o)| o).collect();
        assert_eq!(
            aggregate(&cfg, &forward).records,
            aggregate(&cfg, &backward).records
        );
    }
}
