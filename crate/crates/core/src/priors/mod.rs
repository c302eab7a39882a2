//! Prior families, equivalent-prior-sample construction, summaries,
//! densities and samplers.

mod file;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaCdf, ContinuousCDF, Gamma as GammaCdf};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::condmodels::{BetaRegParams, CatLogisticParams, CondError, CondParams, NetworkParams, LOG_ZERO};
use crate::netspec::{NetworkSpec, Typology};

pub use file::{parse_priors, write_priors};

/// Shape and rate of the default τ prior.
pub const DEFAULT_TAU_SHAPE: f64 = 89.4917;
pub const DEFAULT_TAU_RATE: f64 = 2.0304;

const Z975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("negative or non-finite EPS input")]
    NegativeInput,
    #[error("assessment has {pi} entries but {q} counts")]
    LengthMismatch { pi: usize, q: usize },
    #[error("assessed probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("a Dirichlet prior needs at least two positive concentrations")]
    DegenerateDirichlet,
    #[error("assessed mean {0} must lie strictly inside (-1.5, 1.5)")]
    MuOutOfRange(f64),
    #[error("equivalent sample size must be positive, got {0}")]
    BadCount(f64),
    #[error("Gamma shape and rate must be positive")]
    BadGamma,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{var}`: {message}")]
    Block { var: String, message: String },
    #[error(transparent)]
    Cond(#[from] CondError),
}

/// Prior of one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorEntry {
    /// Zero concentrations mark structural zeros.
    Dirichlet { alpha: Vec<f64> },
    /// Prior of the unit-scale value `(μ + 1.5) / 3`.
    Beta { a: f64, b: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Point mass. For μ parameters the point is on the unit scale.
    Dirac { value: f64 },
    StdNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSummary {
    pub mean: f64,
    pub sd: f64,
    pub qi_low: f64,
    pub qi_high: f64,
}

impl PriorSummary {
    fn point(v: f64) -> Self {
        Self {
            mean: v,
            sd: 0.0,
            qi_low: v,
            qi_high: v,
        }
    }
}

pub fn dirichlet_from_eps(pi_hat: &[f64], q_hat: &[f64]) -> Result<PriorEntry, PriorError> {
    if pi_hat.len() != q_hat.len() {
        return Err(PriorError::LengthMismatch {
            pi: pi_hat.len(),
            q: q_hat.len(),
        });
    }
    if pi_hat.iter().chain(q_hat).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(PriorError::NegativeInput);
    }
    let sum: f64 = pi_hat.iter().sum();
    if (sum - 1.0).abs() > 1e-3 {
        return Err(PriorError::NotNormalized(sum));
    }
    let alpha: Vec<f64> = pi_hat.iter().zip(q_hat).map(|(p, q)| p * q).collect();
    if alpha.iter().filter(|&&a| a > 0.0).count() < 2 {
        return Err(PriorError::DegenerateDirichlet);
    }
    Ok(PriorEntry::Dirichlet { alpha })
}

/// Beta prior of `(μ + 1.5) / 3` from an assessed rescaled mean.
pub fn beta_from_eps(mu_hat: f64, q_hat: f64) -> Result<PriorEntry, PriorError> {
    if !(mu_hat > -1.5 && mu_hat < 1.5) {
        return Err(PriorError::MuOutOfRange(mu_hat));
    }
    if !(q_hat > 0.0 && q_hat.is_finite()) {
        return Err(PriorError::BadCount(q_hat));
    }
    let u = (mu_hat + 1.5) / 3.0;
    Ok(PriorEntry::Beta {
        a: u * q_hat,
        b: (1.0 - u) * q_hat,
    })
}

pub fn default_tau_prior() -> PriorEntry {
    PriorEntry::Gamma {
        shape: DEFAULT_TAU_SHAPE,
        rate: DEFAULT_TAU_RATE,
    }
}

fn beta_summary(a: f64, b: f64) -> PriorSummary {
    let s = a + b;
    let d = BetaCdf::new(a, b).expect("positive shapes");
    PriorSummary {
        mean: a / s,
        sd: (a * b / (s * s * (s + 1.0))).sqrt(),
        qi_low: d.inverse_cdf(0.025),
        qi_high: d.inverse_cdf(0.975),
    }
}

/// Summaries of every scalar component of the entry (one per Dirichlet
/// component, otherwise a single one).
pub fn prior_summary(p: &PriorEntry) -> Vec<PriorSummary> {
    match p {
        PriorEntry::Dirichlet { alpha } => {
            let a0: f64 = alpha.iter().sum();
            alpha
                .iter()
                .map(|&a| {
                    if a == 0.0 {
                        PriorSummary::point(0.0)
                    } else {
                        beta_summary(a, a0 - a)
                    }
                })
                .collect()
        }
        PriorEntry::Beta { a, b } => vec![beta_summary(*a, *b)],
        PriorEntry::Gamma { shape, rate } => {
            let d = GammaCdf::new(*shape, *rate).expect("positive parameters");
            vec![PriorSummary {
                mean: shape / rate,
                sd: shape.sqrt() / rate,
                qi_low: d.inverse_cdf(0.025),
                qi_high: d.inverse_cdf(0.975),
            }]
        }
        PriorEntry::Dirac { value } => vec![PriorSummary::point(*value)],
        PriorEntry::StdNormal => vec![PriorSummary {
            mean: 0.0,
            sd: 1.0,
            qi_low: -Z975,
            qi_high: Z975,
        }],
    }
}

/// Equal-tail 95% interval of each scalar component.
pub fn prior_interval(p: &PriorEntry) -> Vec<(f64, f64)> {
    prior_summary(p).into_iter().map(|s| (s.qi_low, s.qi_high)).collect()
}

/// Log-density at `value` (length 1 except for Dirichlet). Point masses have
/// log-density 0 at their point. Out-of-support values give [`LOG_ZERO`].
pub fn prior_logdensity(p: &PriorEntry, value: &[f64]) -> f64 {
    match p {
        PriorEntry::Dirichlet { alpha } => {
            if value.len() != alpha.len() {
                return LOG_ZERO;
            }
            let mut lp = 0.0;
            let mut a0 = 0.0;
            for (&a, &v) in alpha.iter().zip(value) {
                if a == 0.0 {
                    if v != 0.0 {
                        return LOG_ZERO;
                    }
                    continue;
                }
                if !(v > 0.0) {
                    return LOG_ZERO;
                }
                lp += (a - 1.0) * v.ln() - ln_gamma(a);
                a0 += a;
            }
            if (value.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return LOG_ZERO;
            }
            lp + ln_gamma(a0)
        }
        PriorEntry::Beta { a, b } => {
            let u = value[0];
            if !(u > 0.0 && u < 1.0) {
                return LOG_ZERO;
            }
            (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - crate::condmodels::ln_beta(*a, *b)
        }
        PriorEntry::Gamma { shape, rate } => {
            let t = value[0];
            if !(t > 0.0) {
                return LOG_ZERO;
            }
            shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * t.ln() - rate * t
        }
        PriorEntry::Dirac { value: v } => {
            if (value[0] - v).abs() <= 1e-12 {
                0.0
            } else {
                LOG_ZERO
            }
        }
        PriorEntry::StdNormal => -0.5 * value[0] * value[0] - 0.5 * (2.0 * std::f64::consts::PI).ln(),
    }
}

pub fn prior_sample<R: Rng + ?Sized>(p: &PriorEntry, rng: &mut R) -> Vec<f64> {
    match p {
        PriorEntry::Dirichlet { alpha } => sample_dirichlet(alpha, rng),
        PriorEntry::Beta { a, b } => {
            let x = GammaDist::new(*a, 1.0).unwrap().sample(rng);
            let y = GammaDist::new(*b, 1.0).unwrap().sample(rng);
            vec![x / (x + y)]
        }
        PriorEntry::Gamma { shape, rate } => vec![GammaDist::new(*shape, 1.0 / rate).unwrap().sample(rng)],
        PriorEntry::Dirac { value } => vec![*value],
        PriorEntry::StdNormal => vec![rng.sample(StandardNormal)],
    }
}

/// Dirichlet draw via normalized Gammas; zero concentrations stay exactly 0.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out: Vec<f64> = alpha
        .iter()
        .map(|&a| if a > 0.0 { GammaDist::new(a, 1.0).unwrap().sample(rng) } else { 0.0 })
        .collect();
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        for v in &mut out {
            *v /= s;
        }
    } else {
        // every gamma draw underflowed; fall back to the largest concentration
        let k = alpha
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(k, _)| k);
        out[k] = 1.0;
    }
    out
}

/// Priors of one variable's parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarPrior {
    Categorical {
        /// One Dirichlet per π row.
        rows: Vec<PriorEntry>,
        /// `None` when η is fixed at zero.
        eta: Option<PriorEntry>,
    },
    Continuous {
        mu: Vec<PriorEntry>,
        tau: PriorEntry,
    },
}

/// Priors for every variable, in network order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub vars: Vec<VarPrior>,
}

/// Default assessments for variables without elicited priors.
pub mod defaults {
    /// Baseline row: neutral with probability 0.95 from 10 equivalent cases.
    pub const BASELINE_NEUTRAL: f64 = 0.95;
    pub const BASELINE_Q: f64 = 10.0;
    /// Dummy rows: neutral with probability 0.3 from 5 equivalent cases.
    pub const ROW_NEUTRAL: f64 = 0.3;
    pub const ROW_Q: f64 = 5.0;
    /// μ rows: ±1 from 5 equivalent cases.
    pub const MU_Q: f64 = 5.0;
}

impl PriorSpec {
    /// Weakly informative priors: mostly-neutral baseline, dummy rows leaning
    /// non-neutral, μ0 fixed at the neutral value and μi at the pathological
    /// reference value on the side the child's scale allows.
    pub fn defaults(spec: &NetworkSpec) -> Self {
        let vars = (0..spec.len()).map(|i| Self::default_for(spec, i)).collect();
        Self { vars }
    }

    pub(crate) fn default_for(spec: &NetworkSpec, i: usize) -> VarPrior {
        let v = spec.var(i);
        let n = spec.layout(i).width;
        match &v.typology {
            Typology::Continuous(scale) => {
                let target = if scale.has_hp() { 1.0 } else { -1.0 };
                let mut mu = vec![PriorEntry::Dirac { value: 0.5 }];
                for _ in 0..n {
                    mu.push(beta_from_eps(target, defaults::MU_Q).expect("valid default"));
                }
                VarPrior::Continuous {
                    mu,
                    tau: default_tau_prior(),
                }
            }
            t => {
                let k = t.n_categories().unwrap();
                let s = (k - 1) as f64;
                let row = |p0: f64, q: f64| {
                    let mut pi = vec![(1.0 - p0) / s; k];
                    pi[0] = p0;
                    dirichlet_from_eps(&pi, &vec![q; k]).expect("valid default")
                };
                let mut rows = vec![row(defaults::BASELINE_NEUTRAL, defaults::BASELINE_Q)];
                for _ in 0..n {
                    rows.push(row(defaults::ROW_NEUTRAL, defaults::ROW_Q));
                }
                let eta = (!crate::condmodels::eta_fixed_zero(spec, i)).then_some(PriorEntry::StdNormal);
                VarPrior::Categorical { rows, eta }
            }
        }
    }

    /// Checks that every block matches the network's dimensions.
    pub fn check(&self, spec: &NetworkSpec) -> Result<(), PriorError> {
        if self.vars.len() != spec.len() {
            return Err(PriorError::Block {
                var: String::new(),
                message: format!("{} prior blocks for {} variables", self.vars.len(), spec.len()),
            });
        }
        for (i, vp) in self.vars.iter().enumerate() {
            let v = spec.var(i);
            let n = spec.layout(i).width;
            let bad = |message: String| PriorError::Block {
                var: v.name.clone(),
                message,
            };
            match (vp, &v.typology) {
                (VarPrior::Categorical { rows, eta }, t) if t.is_categorical() => {
                    let k = t.n_categories().unwrap();
                    if rows.len() != n + 1 {
                        return Err(bad(format!("{} rows, expected {}", rows.len(), n + 1)));
                    }
                    for (r, e) in rows.iter().enumerate() {
                        match e {
                            PriorEntry::Dirichlet { alpha } if alpha.len() == k => {
                                if alpha[0] == 0.0 {
                                    return Err(bad(format!("row {r}: the neutral category cannot be a structural zero")));
                                }
                            }
                            _ => return Err(bad(format!("row {r} needs a Dirichlet over {k} categories"))),
                        }
                    }
                    let fixed = crate::condmodels::eta_fixed_zero(spec, i);
                    match (fixed, eta) {
                        (true, None) | (false, Some(PriorEntry::StdNormal)) => {}
                        _ => return Err(bad("eta prior does not match the parent count".into())),
                    }
                }
                (VarPrior::Continuous { mu, tau }, Typology::Continuous(_)) => {
                    if mu.len() != n + 1 {
                        return Err(bad(format!("{} mu entries, expected {}", mu.len(), n + 1)));
                    }
                    for (r, e) in mu.iter().enumerate() {
                        match e {
                            PriorEntry::Beta { .. } => {}
                            PriorEntry::Dirac { value } if *value > 0.0 && *value < 1.0 => {}
                            _ => return Err(bad(format!("mu {r} needs a Beta or an interior point mass"))),
                        }
                    }
                    if !matches!(tau, PriorEntry::Gamma { .. }) {
                        return Err(bad("tau needs a Gamma prior".into()));
                    }
                }
                _ => return Err(bad("prior family does not match the typology".into())),
            }
        }
        Ok(())
    }

    /// Parameters at the prior means; point masses at their points.
    pub fn mean_params(&self, spec: &NetworkSpec) -> Result<NetworkParams, PriorError> {
        let mut blocks = Vec::with_capacity(spec.len());
        for vp in &self.vars {
            blocks.push(match vp {
                VarPrior::Categorical { rows, eta } => {
                    let mut pi = Vec::new();
                    let mut structural = Vec::new();
                    for e in rows {
                        let PriorEntry::Dirichlet { alpha } = e else { unreachable!() };
                        let a0: f64 = alpha.iter().sum();
                        pi.push(alpha.iter().map(|a| a / a0).collect::<Vec<_>>());
                        structural.push(alpha.iter().map(|&a| a == 0.0).collect::<Vec<_>>());
                    }
                    let s = pi[0].len() - 1;
                    let eta = eta.as_ref().map(|_| vec![0.0; s]);
                    CondParams::Categorical(CatLogisticParams::new(pi, eta, Some(structural))?)
                }
                VarPrior::Continuous { mu, tau } => {
                    let mu0_degenerate = is_neutral_point(&mu[0]);
                    let mu: Vec<f64> = mu
                        .iter()
                        .map(|e| 3.0 * prior_summary(e)[0].mean - 1.5)
                        .map(|m| if m.abs() < 1e-15 { 0.0 } else { m })
                        .collect();
                    CondParams::Beta(BetaRegParams::new(mu, mu0_degenerate, prior_summary(tau)[0].mean)?)
                }
            });
        }
        Ok(NetworkParams { blocks })
    }

    /// Structural-zero mask of a categorical block.
    pub fn structural_mask(&self, var: usize) -> Option<Vec<Vec<bool>>> {
        match &self.vars[var] {
            VarPrior::Categorical { rows, .. } => Some(
                rows.iter()
                    .map(|e| match e {
                        PriorEntry::Dirichlet { alpha } => alpha.iter().map(|&a| a == 0.0).collect(),
                        _ => Vec::new(),
                    })
                    .collect(),
            ),
            VarPrior::Continuous { .. } => None,
        }
    }
}

/// Whether a μ prior is the point mass at the neutral value.
pub fn is_neutral_point(e: &PriorEntry) -> bool {
    matches!(e, PriorEntry::Dirac { value } if *value == 0.5)
}
