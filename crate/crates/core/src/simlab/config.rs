use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::penalty::QuadSplinePenalty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Lasso,
    Mcp,
    Scad,
}

impl Method {
    pub fn penalty(self, gamma: f64) -> Result<QuadSplinePenalty> {
        match self {
            Method::Lasso => Ok(QuadSplinePenalty::l1()),
            Method::Mcp => QuadSplinePenalty::mcp(gamma),
            Method::Scad => QuadSplinePenalty::scad(gamma),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lasso => "lasso",
            Method::Mcp => "mcp",
            Method::Scad => "scad",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lasso" | "l1" => Ok(Method::Lasso),
            "mcp" | "mc+" => Ok(Method::Mcp),
            "scad" => Ok(Method::Scad),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportLayout {
    FirstDo,
    EvenlySpaced,
}

impl SupportLayout {
    pub fn indices(self, p: usize, d_o: usize) -> Vec<usize> {
        match self {
            SupportLayout::FirstDo => (0..d_o).collect(),
            SupportLayout::EvenlySpaced => (0..d_o).map(|k| k * p / d_o.max(1)).collect(),
        }
    }
}

impl FromStr for SupportLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "first_d_o" => Ok(SupportLayout::FirstDo),
            "evenly_spaced" => Ok(SupportLayout::EvenlySpaced),
            other => Err(Error::Parse(format!("unknown support layout `{other}`"))),
        }
    }
}

impl fmt::Display for SupportLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SupportLayout::FirstDo => "first_d_o",
            SupportLayout::EvenlySpaced => "evenly_spaced",
        })
    }
}

/// `points` evenly spaced ratios `lambda / sqrt(log(p)/n)` from `lo` to `hi`.
pub fn ratio_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Default grid: 30 ratios from 0.25 to 3.0.
pub fn default_ratio_grid() -> Vec<f64> {
    ratio_grid(0.25, 3.0, 30)
}

/// One simulation setting of the Gaussian linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub d_o: usize,
    pub beta_star: f64,
    pub gamma: f64,
    pub sigma: f64,
    /// AR(1) correlation `r` of the design rows, `Sigma_jk = r^|j-k|`.
    pub design_correlation: f64,
    pub support_layout: SupportLayout,
    pub replications: usize,
    pub seed: u64,
    /// Ascending ratios `lambda / sqrt(log(p)/n)`.
    pub lambda_grid: Vec<f64>,
    pub methods: Vec<Method>,
    /// Per-method concavity override; defaults to `gamma`.
    pub method_gamma: Vec<(Method, f64)>,
}

impl SimConfig {
    pub fn new(n: usize, p: usize, d_o: usize, beta_star: f64, gamma: f64) -> Self {
        SimConfig {
            n,
            p,
            d_o,
            beta_star,
            gamma,
            sigma: 1.0,
            design_correlation: 0.5,
            support_layout: SupportLayout::FirstDo,
            replications: 1000,
            seed: 20080801,
            lambda_grid: default_ratio_grid(),
            methods: vec![Method::Lasso, Method::Mcp, Method::Scad],
            method_gamma: Vec::new(),
        }
    }

    pub fn gamma_for(&self, method: Method) -> f64 {
        self.method_gamma
            .iter()
            .find(|(m, _)| *m == method)
            .map(|&(_, g)| g)
            .unwrap_or(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 || self.p < 2 {
            return bad(format!(
                "need n >= 1 and p >= 2, got n = {}, p = {}",
                self.n, self.p
            ));
        }
        if self.d_o > self.p {
            return bad(format!("d_o = {} exceeds p = {}", self.d_o, self.p));
        }
        if !(self.beta_star > 0.0) || !(self.sigma > 0.0) {
            return bad("beta_star and sigma must be positive".into());
        }
        if !(0.0..1.0).contains(&self.design_correlation) {
            return bad(format!(
                "design_correlation must lie in [0, 1), got {}",
                self.design_correlation
            ));
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&v| !(v > 0.0)) {
            return bad("lambda_grid must be nonempty and positive".into());
        }
        if self.lambda_grid.windows(2).any(|w| w[1] < w[0]) {
            return bad("lambda_grid must be ascending".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        for &m in &self.methods {
            m.penalty(self.gamma_for(m))?;
        }
        Ok(())
    }

    /// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
    /// unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::new(50, 12, 3, 1.5, 3.7);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: `{key}` expects a number", lineno + 1))
                })
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>().map_err(|_| {
                    Error::Parse(format!("line {}: `{key}` expects an integer", lineno + 1))
                })
            };
            match key {
                "n" => cfg.n = int(value)?,
                "p" => cfg.p = int(value)?,
                "d_o" => cfg.d_o = int(value)?,
                "beta_star" => cfg.beta_star = num(value)?,
                "gamma" => cfg.gamma = num(value)?,
                "sigma" => cfg.sigma = num(value)?,
                "design_correlation" => cfg.design_correlation = num(value)?,
                "support_layout" => cfg.support_layout = value.parse()?,
                "replications" => cfg.replications = int(value)?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| {
                        Error::Parse(format!(
                            "line {}: `seed` expects a 64-bit integer",
                            lineno + 1
                        ))
                    })?
                }
                "lambda_grid" => {
                    cfg.lambda_grid = value
                        .split(',')
                        .map(|v| num(v.trim()))
                        .collect::<Result<_>>()?;
                }
                "methods" => {
                    cfg.methods = value.split(',').map(|v| v.parse()).collect::<Result<_>>()?;
                }
                "mcp_gamma" => cfg.method_gamma.push((Method::Mcp, num(value)?)),
                "scad_gamma" => cfg.method_gamma.push((Method::Scad, num(value)?)),
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
