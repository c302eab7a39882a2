//! Metropolis-within-Gibbs fitting with missing-value imputation, chain
//! storage, convergence diagnostics and the D-statistic.

pub mod chainio;
mod dataset;
pub mod diagnostics;
mod dstat;
mod sampler;
mod spectrum;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condmodels::{BetaRegParams, CatLogisticParams, CondError, CondParams, NetworkParams};
use crate::netspec::NetworkSpec;
use crate::numeric::{mean_sd, quantile_sorted};
use crate::priors::{PriorEntry, PriorError, PriorSpec, VarPrior};

pub use dataset::{load_csv, read_csv, simulate, DataError, Dataset, LoadOptions};
pub use diagnostics::{
    diagnose_chain, geweke, heidelberger_welch, raftery_lewis, DiagnosticsReport, GewekeResult, HeidelbergerWelch,
    ParamDiagnostics, RafteryLewis, TestOutcome,
};
pub use dstat::{d_statistic, d_statistic_histogram, d_statistics, DHistogram, D_BIN_EDGES};
pub use sampler::Progress;
pub use spectrum::spectrum0;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("iterations ({iterations}) must exceed burn-in ({burn_in}) and thin must be at least 1")]
    Schedule { iterations: u64, burn_in: u64, thin: u64 },
    #[error("zero posterior density at initialization: record {record}, variable `{variable}`")]
    Initialization { record: usize, variable: String },
    #[error("dataset has {got} columns, network has {expected} variables")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Cond(#[from] CondError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Concentration of the row-wise Dirichlet proposal.
    pub dirichlet_concentration: f64,
    /// Smallest Dirichlet proposal weight of any component.
    pub dirichlet_floor: f64,
    /// Random-walk scale of logit((μ + 1.5) / 3).
    pub mu_step: f64,
    /// Random-walk scale of ln τ.
    pub tau_step: f64,
    /// Random-walk scale of η.
    pub eta_step: f64,
    /// Random-walk scale of missing continuous cells on the logit axis.
    pub cell_step: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            dirichlet_concentration: 200.0,
            dirichlet_floor: 0.5,
            mu_step: 1.0,
            tau_step: 0.1,
            eta_step: 0.5,
            cell_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub chains: u32,
    pub proposals: ProposalConfig,
    /// Tune proposal scales towards 20-45% acceptance during burn-in.
    pub adapt: bool,
    /// Keep retained draws of every missing cell.
    pub keep_imputations: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 55_000,
            burn_in: 30_000,
            thin: 5,
            seed: 1,
            chains: 1,
            proposals: ProposalConfig::default(),
            adapt: true,
            keep_imputations: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        if self.iterations <= self.burn_in || self.thin == 0 {
            return Err(McmcError::Schedule {
                iterations: self.iterations,
                burn_in: self.burn_in,
                thin: self.thin,
            });
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        ((self.iterations - self.burn_in) / self.thin) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Pi { row: usize, cat: usize },
    Eta { cat: usize },
    /// Stored on the unit scale `(μ + 1.5) / 3`.
    Mu { index: usize },
    Tau,
}

/// One scalar parameter of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDesc {
    pub name: String,
    pub var: usize,
    pub kind: ParamKind,
}

/// Scalar parameters in chain order.
pub fn param_layout(spec: &NetworkSpec, priors: &PriorSpec) -> Vec<ParamDesc> {
    let mut out = Vec::new();
    for (v, vp) in priors.vars.iter().enumerate() {
        let name = &spec.var(v).name;
        match vp {
            VarPrior::Categorical { rows, eta } => {
                let k = spec.var(v).typology.n_categories().unwrap();
                for r in 0..rows.len() {
                    for y in 0..k {
                        out.push(ParamDesc {
                            name: format!("{name}/pi[{r},{y}]"),
                            var: v,
                            kind: ParamKind::Pi { row: r, cat: y },
                        });
                    }
                }
                if eta.is_some() {
                    for y in 1..k {
                        out.push(ParamDesc {
                            name: format!("{name}/eta[{y}]"),
                            var: v,
                            kind: ParamKind::Eta { cat: y },
                        });
                    }
                }
            }
            VarPrior::Continuous { mu, .. } => {
                for i in 0..mu.len() {
                    out.push(ParamDesc {
                        name: format!("{name}/mu[{i}]"),
                        var: v,
                        kind: ParamKind::Mu { index: i },
                    });
                }
                out.push(ParamDesc {
                    name: format!("{name}/tau"),
                    var: v,
                    kind: ParamKind::Tau,
                });
            }
        }
    }
    out
}

/// Marginal prior of one scalar parameter.
pub fn marginal_prior(priors: &PriorSpec, d: &ParamDesc) -> PriorEntry {
    match (&priors.vars[d.var], d.kind) {
        (VarPrior::Categorical { rows, .. }, ParamKind::Pi { row, cat }) => match &rows[row] {
            PriorEntry::Dirichlet { alpha } => {
                let a0: f64 = alpha.iter().sum();
                if alpha[cat] == 0.0 {
                    PriorEntry::Dirac { value: 0.0 }
                } else {
                    PriorEntry::Beta {
                        a: alpha[cat],
                        b: a0 - alpha[cat],
                    }
                }
            }
            other => other.clone(),
        },
        (VarPrior::Categorical { .. }, ParamKind::Eta { .. }) => PriorEntry::StdNormal,
        (VarPrior::Continuous { mu, .. }, ParamKind::Mu { index }) => mu[index].clone(),
        (VarPrior::Continuous { tau, .. }, ParamKind::Tau) => tau.clone(),
        _ => PriorEntry::Dirac { value: f64::NAN },
    }
}

/// Whether the parameter can move (its marginal prior is not a point mass).
pub fn is_free(priors: &PriorSpec, d: &ParamDesc) -> bool {
    !matches!(marginal_prior(priors, d), PriorEntry::Dirac { .. })
}

/// Reads one scalar parameter out of a parameter set.
pub fn param_value(params: &NetworkParams, d: &ParamDesc) -> f64 {
    match (&params.blocks[d.var], d.kind) {
        (CondParams::Categorical(p), ParamKind::Pi { row, cat }) => p.row(row)[cat],
        (CondParams::Categorical(p), ParamKind::Eta { cat }) => p.eta()[cat - 1],
        (CondParams::Beta(p), ParamKind::Mu { index }) => (p.mu[index] + 1.5) / 3.0,
        (CondParams::Beta(p), ParamKind::Tau) => p.tau,
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitAcceptance {
    pub name: String,
    /// Acceptance rate over the retained phase.
    pub rate: f64,
    /// Final proposal scale.
    pub scale: f64,
}

/// Retained draws of the missing cells, one column per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputations {
    /// `(record, variable)` of each column.
    pub cells: Vec<(usize, usize)>,
    pub draws: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub params: Vec<ParamDesc>,
    /// One column of retained draws per parameter.
    pub draws: Vec<Vec<f64>>,
    pub imputations: Option<Imputations>,
    pub acceptance: Vec<UnitAcceptance>,
    pub config: McmcConfig,
    pub seed: u64,
    pub chain_index: u32,
}

impl Chain {
    pub fn n_draws(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .map(|i| self.draws[i].as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub qi_low: f64,
    pub qi_high: f64,
}

/// Sample mean, sd and equal-tail 95% interval of every parameter.
pub fn posterior_summary(chain: &Chain) -> Vec<ParamSummary> {
    chain
        .params
        .iter()
        .zip(&chain.draws)
        .map(|(p, d)| summarize(&p.name, d))
        .collect()
}

pub fn summarize(name: &str, draws: &[f64]) -> ParamSummary {
    let (mean, sd) = mean_sd(draws);
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.to_string(),
        mean,
        sd,
        qi_low: quantile_sorted(&sorted, 0.025),
        qi_high: quantile_sorted(&sorted, 0.975),
    }
}

/// Parameters at the posterior means of a chain.
pub fn posterior_mean_params(spec: &NetworkSpec, priors: &PriorSpec, chain: &Chain) -> Result<NetworkParams, McmcError> {
    let mut params = priors.mean_params(spec)?;
    let means: Vec<f64> = chain.draws.iter().map(|d| mean_sd(d).0).collect();
    let mut rows: Vec<Vec<Vec<f64>>> = params
        .blocks
        .iter()
        .map(|b| match b {
            CondParams::Categorical(p) => (0..p.n_rows()).map(|r| p.row(r).to_vec()).collect(),
            CondParams::Beta(_) => Vec::new(),
        })
        .collect();
    let mut etas: Vec<Vec<f64>> = params
        .blocks
        .iter()
        .map(|b| b.as_cat().map(|p| p.eta().to_vec()).unwrap_or_default())
        .collect();
    for (d, &m) in chain.params.iter().zip(&means) {
        match (&mut params.blocks[d.var], d.kind) {
            (CondParams::Categorical(_), ParamKind::Pi { row, cat }) => rows[d.var][row][cat] = m,
            (CondParams::Categorical(_), ParamKind::Eta { cat }) => etas[d.var][cat - 1] = m,
            (CondParams::Beta(p), ParamKind::Mu { index }) => {
                if !(index == 0 && p.mu0_degenerate) {
                    p.mu[index] = 3.0 * m - 1.5;
                }
            }
            (CondParams::Beta(p), ParamKind::Tau) => p.tau = m,
            _ => {}
        }
    }
    for (v, b) in params.blocks.iter_mut().enumerate() {
        if let CondParams::Categorical(p) = b {
            let structural = (0..p.n_rows()).map(|r| p.structural_row(r).to_vec()).collect();
            let eta = (!p.eta_fixed_zero()).then(|| etas[v].clone());
            let pi = rows[v]
                .iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|x| x / s).collect()
                })
                .collect();
            *p = CatLogisticParams::new(pi, eta, Some(structural))?;
        }
        if let CondParams::Beta(p) = b {
            *p = BetaRegParams::new(p.mu.clone(), p.mu0_degenerate, p.tau)?;
        }
    }
    Ok(params)
}

/// Runs one chain on stream `chain_index` of the configured seed.
pub fn run_chain(
    spec: &NetworkSpec,
    init: Option<&NetworkParams>,
    priors: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    chain_index: u32,
    progress: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<Chain, McmcError> {
    cfg.validate()?;
    priors.check(spec)?;
    if data.n_records() > 0 && data.column_count() != spec.len() {
        return Err(McmcError::Shape {
            expected: spec.len(),
            got: data.column_count(),
        });
    }
    let init = match init {
        Some(p) => {
            p.check(spec)?;
            p.clone()
        }
        None => priors.mean_params(spec)?,
    };
    sampler::Sampler::new(spec, priors, data, cfg, init, chain_index)?.run(progress)
}

/// Runs `cfg.chains` independent chains in parallel.
pub fn run_chains(
    spec: &NetworkSpec,
    priors: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    progress: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<Vec<Chain>, McmcError> {
    (0..cfg.chains.max(1))
        .into_par_iter()
        .map(|c| run_chain(spec, None, priors, data, cfg, c, progress))
        .collect()
}
