//! Conditional models: the mixture categorical-logistic model for categorical
//! children and the reparameterized Beta regression for continuous children.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::netspec::{NetworkSpec, Typology, Value};

/// Log of a structural-zero probability.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Replacement for non-structural zeros in the baseline row.
pub const ZERO_REPLACEMENT: f64 = 1e-7;

/// Floor applied to Beta shapes in density evaluation.
pub const SHAPE_FLOOR: f64 = 1e-10;

static SHAPE_FLOOR_HITS: AtomicU64 = AtomicU64::new(0);

/// How many times a Beta shape was floored since process start.
pub fn shape_floor_hits() -> u64 {
    SHAPE_FLOOR_HITS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CondError {
    #[error("log of non-structural zero pi[{row}][{col}]")]
    ParamDomain { row: usize, col: usize },
    #[error("pi row {row} is not a probability vector (sum {sum})")]
    BadRow { row: usize, sum: f64 },
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("value {0} outside the support (-1.5, 1.5)")]
    Support(f64),
    #[error("category {0} out of range")]
    Category(u32),
    #[error("mu[{index}] = {value} outside (-1.5, 1.5)")]
    Mu { index: usize, value: f64 },
    #[error("tau must be positive and finite, got {0}")]
    Tau(f64),
    #[error("parameter family does not match the variable's typology")]
    FamilyMismatch,
}

/// Parameters of the categorical-logistic mixture for a child with `s`
/// non-neutral categories and `n` dummy parent entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CatLogisticRepr", into = "CatLogisticRepr")]
pub struct CatLogisticParams {
    k: usize,
    rows: usize,
    pi: Vec<f64>,
    structural: Vec<bool>,
    eta: Vec<f64>,
    eta_fixed_zero: bool,
    log_ratio: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CatLogisticRepr {
    pi: Vec<Vec<f64>>,
    eta: Vec<f64>,
    eta_fixed_zero: bool,
    #[serde(default)]
    structural: Vec<Vec<bool>>,
}

impl TryFrom<CatLogisticRepr> for CatLogisticParams {
    type Error = CondError;
    fn try_from(r: CatLogisticRepr) -> Result<Self, CondError> {
        let eta = if r.eta_fixed_zero { None } else { Some(r.eta) };
        let structural = if r.structural.is_empty() { None } else { Some(r.structural) };
        CatLogisticParams::new(r.pi, eta, structural)
    }
}

impl From<CatLogisticParams> for CatLogisticRepr {
    fn from(p: CatLogisticParams) -> Self {
        let has_structural = p.structural.iter().any(|&b| b);
        CatLogisticRepr {
            pi: (0..p.rows).map(|i| p.row(i).to_vec()).collect(),
            structural: if has_structural {
                (0..p.rows).map(|i| p.structural[i * p.k..(i + 1) * p.k].to_vec()).collect()
            } else {
                Vec::new()
            },
            eta: p.eta.clone(),
            eta_fixed_zero: p.eta_fixed_zero,
        }
    }
}

impl CatLogisticParams {
    /// `pi` has one row per dummy entry plus the baseline row 0; `eta` of
    /// `None` fixes every η at zero. `structural` marks entries that are
    /// exactly zero by construction.
    pub fn new(
        pi: Vec<Vec<f64>>,
        eta: Option<Vec<f64>>,
        structural: Option<Vec<Vec<bool>>>,
    ) -> Result<Self, CondError> {
        let rows = pi.len();
        let k = pi.first().map_or(0, Vec::len);
        if rows == 0 || k < 2 {
            return Err(CondError::Dimension { expected: 2, got: k });
        }
        let s = k - 1;
        let eta_fixed_zero = eta.is_none();
        let eta = eta.unwrap_or_else(|| vec![0.0; s]);
        if eta.len() != s {
            return Err(CondError::Dimension {
                expected: s,
                got: eta.len(),
            });
        }
        let mut mask = vec![false; rows * k];
        if let Some(st) = structural {
            if st.len() != rows {
                return Err(CondError::Dimension {
                    expected: rows,
                    got: st.len(),
                });
            }
            for (i, r) in st.iter().enumerate() {
                if r.len() != k {
                    return Err(CondError::Dimension { expected: k, got: r.len() });
                }
                mask[i * k..(i + 1) * k].copy_from_slice(r);
            }
        }
        let mut out = Self {
            k,
            rows,
            pi: vec![0.0; rows * k],
            structural: mask,
            eta,
            eta_fixed_zero,
            log_ratio: vec![0.0; rows * k],
        };
        for (i, r) in pi.iter().enumerate() {
            if r.len() != k {
                return Err(CondError::Dimension { expected: k, got: r.len() });
            }
            out.set_row(i, r)?;
        }
        Ok(out)
    }

    /// Non-neutral count `s`.
    pub fn s(&self) -> usize {
        self.k - 1
    }

    /// Number of π rows (`n + 1`).
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pi[i * self.k..(i + 1) * self.k]
    }

    pub fn structural_row(&self, i: usize) -> &[bool] {
        &self.structural[i * self.k..(i + 1) * self.k]
    }

    pub fn is_structural(&self, i: usize, y: usize) -> bool {
        self.structural[i * self.k + y]
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn eta_fixed_zero(&self) -> bool {
        self.eta_fixed_zero
    }

    /// Replaces row `i`. Structural entries are forced to 0; in the baseline
    /// row the remaining zeros are replaced by [`ZERO_REPLACEMENT`].
    pub fn set_row(&mut self, i: usize, row: &[f64]) -> Result<(), CondError> {
        let k = self.k;
        if row.len() != k {
            return Err(CondError::Dimension { expected: k, got: row.len() });
        }
        let mask = &self.structural[i * k..(i + 1) * k];
        let mut buf: Vec<f64> = row
            .iter()
            .zip(mask)
            .map(|(&p, &st)| if st { 0.0 } else { p })
            .collect();
        let sum: f64 = buf.iter().sum();
        if buf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(CondError::BadRow { row: i, sum });
        }
        if i == 0 {
            for (p, &st) in buf.iter_mut().zip(mask) {
                if !st && *p == 0.0 {
                    *p = ZERO_REPLACEMENT;
                }
            }
        }
        let sum: f64 = buf.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            for p in &mut buf {
                *p /= sum;
            }
        }
        let p0 = buf[0];
        for y in 0..k {
            self.log_ratio[i * k + y] = if y == 0 {
                0.0
            } else if buf[y] == 0.0 || p0 == 0.0 {
                // marks an undefined ratio; resolved against x_i at use
                f64::NAN
            } else {
                (buf[y] / p0).ln()
            };
        }
        self.pi[i * k..(i + 1) * k].copy_from_slice(&buf);
        Ok(())
    }

    pub fn set_eta(&mut self, eta: &[f64]) {
        debug_assert!(!self.eta_fixed_zero);
        self.eta.copy_from_slice(eta);
    }

    /// Writes unnormalized logits into `out`; `Ok(false)` means the baseline
    /// branch applies and `out` holds row 0.
    fn logits_into(&self, x: &[f64], out: &mut [f64]) -> Result<bool, CondError> {
        let k = self.k;
        let sum: f64 = x.iter().sum();
        if sum <= 0.0 {
            out.copy_from_slice(self.row(0));
            return Ok(false);
        }
        out[0] = 0.0;
        for y in 1..k {
            out[y] = (1.0 - sum) * self.eta[y - 1];
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let r = i + 1;
            if self.pi[r * k] == 0.0 {
                return Err(CondError::ParamDomain { row: r, col: 0 });
            }
            for y in 1..k {
                let lr = self.log_ratio[r * k + y];
                if lr.is_nan() {
                    if self.structural[r * k + y] && xi > 0.0 {
                        out[y] = LOG_ZERO;
                    } else {
                        return Err(CondError::ParamDomain { row: r, col: y });
                    }
                } else {
                    out[y] += xi * lr;
                }
            }
        }
        Ok(true)
    }

    /// Fills `out` (length `s + 1`) with the conditional probabilities.
    pub fn probs_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), CondError> {
        self.check_x(x)?;
        if !self.logits_into(x, out)? {
            return Ok(());
        }
        let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in out.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in out.iter_mut() {
            *v /= z;
        }
        Ok(())
    }

    /// Fills `out` with log-probabilities.
    pub fn log_probs_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), CondError> {
        self.check_x(x)?;
        if !self.logits_into(x, out)? {
            for v in out.iter_mut() {
                *v = if *v == 0.0 { LOG_ZERO } else { v.ln() };
            }
            return Ok(());
        }
        let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + out.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for v in out.iter_mut() {
            *v -= lse;
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<(), CondError> {
        if x.len() + 1 != self.rows {
            return Err(CondError::Dimension {
                expected: self.rows - 1,
                got: x.len(),
            });
        }
        Ok(())
    }
}

pub fn catlog_probs(p: &CatLogisticParams, x: &[f64]) -> Result<Vec<f64>, CondError> {
    let mut out = vec![0.0; p.s() + 1];
    p.probs_into(x, &mut out)?;
    Ok(out)
}

pub fn catlog_logdensity(p: &CatLogisticParams, x: &[f64], y: u32) -> Result<f64, CondError> {
    if y as usize > p.s() {
        return Err(CondError::Category(y));
    }
    let mut out = vec![0.0; p.s() + 1];
    p.log_probs_into(x, &mut out)?;
    Ok(out[y as usize])
}

/// Parameters of the Beta regression for a continuous child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRegParams {
    pub mu: Vec<f64>,
    pub mu0_degenerate: bool,
    pub tau: f64,
}

#[inline]
fn link(mu: f64) -> f64 {
    ((mu + 1.5) / (1.5 - mu)).ln()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl BetaRegParams {
    pub fn new(mu: Vec<f64>, mu0_degenerate: bool, tau: f64) -> Result<Self, CondError> {
        let p = Self {
            mu,
            mu0_degenerate,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CondError> {
        if self.mu.is_empty() {
            return Err(CondError::Dimension { expected: 1, got: 0 });
        }
        for (i, &m) in self.mu.iter().enumerate() {
            if !(m > -1.5 && m < 1.5) || (i == 0 && self.mu0_degenerate && m != 0.0) {
                return Err(CondError::Mu { index: i, value: m });
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(CondError::Tau(self.tau));
        }
        Ok(())
    }

    /// The linear predictor on the logit scale of the unit mean.
    #[inline]
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len() + 1, self.mu.len());
        let mut z = 0.0;
        let mut sum = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                z += xi * link(self.mu[i + 1]);
                sum += xi;
            }
        }
        if !self.mu0_degenerate {
            z += (1.0 - sum) * link(self.mu[0]);
        }
        z
    }

    /// Shapes of the unit-scale Beta, floored at [`SHAPE_FLOOR`].
    #[inline]
    pub fn shapes(&self, x: &[f64]) -> (f64, f64) {
        let z = self.linear_predictor(x);
        let mut a = sigmoid(z) * self.tau;
        let mut b = sigmoid(-z) * self.tau;
        if a < SHAPE_FLOOR || b < SHAPE_FLOOR {
            SHAPE_FLOOR_HITS.fetch_add(1, Ordering::Relaxed);
            a = a.max(SHAPE_FLOOR);
            b = b.max(SHAPE_FLOOR);
        }
        (a, b)
    }
}

pub fn betareg_mean(p: &BetaRegParams, x: &[f64]) -> f64 {
    3.0 * sigmoid(p.linear_predictor(x)) - 1.5
}

pub fn betareg_variance(p: &BetaRegParams, x: &[f64]) -> f64 {
    let e = betareg_mean(p, x);
    (e + 1.5) * (1.5 - e) / (1.0 + p.tau)
}

/// Log ln B(a, b).
#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log-density of a rescaled value `y`, on the rescaled axis.
pub fn betareg_logdensity(p: &BetaRegParams, x: &[f64], y: f64) -> Result<f64, CondError> {
    if !(y > -1.5 && y < 1.5) {
        return Err(CondError::Support(y));
    }
    let (a, b) = p.shapes(x);
    Ok(beta_logpdf_rescaled(a, b, y))
}

/// ln of the Beta(a, b) density of `(y + 1.5) / 3`, including the `1/3` Jacobian.
#[inline]
pub fn beta_logpdf_rescaled(a: f64, b: f64, y: f64) -> f64 {
    let u = (y + 1.5) / 3.0;
    let v = (1.5 - y) / 3.0;
    (a - 1.0) * u.ln() + (b - 1.0) * v.ln() - ln_beta(a, b) - 3f64.ln()
}

/// Keeps a rescaled draw strictly inside the open support.
#[inline]
pub fn clamp_support(y: f64) -> f64 {
    const EDGE: f64 = 1.5 - 1e-12;
    y.clamp(-EDGE, EDGE)
}

/// Draws a rescaled value from Beta(a, b) mapped to (-1.5, 1.5).
pub fn sample_beta_rescaled<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u = Beta::new(a, b).map(|d| d.sample(rng)).unwrap_or(a / (a + b));
    clamp_support(3.0 * u - 1.5)
}

/// Draws an index from a probability vector by inversion.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Conditional-model parameters of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CondParams {
    Categorical(CatLogisticParams),
    Beta(BetaRegParams),
}

impl CondParams {
    pub fn as_cat(&self) -> Option<&CatLogisticParams> {
        match self {
            CondParams::Categorical(p) => Some(p),
            CondParams::Beta(_) => None,
        }
    }

    pub fn as_beta(&self) -> Option<&BetaRegParams> {
        match self {
            CondParams::Beta(p) => Some(p),
            CondParams::Categorical(_) => None,
        }
    }
}

/// Draws a value of a variable given its dummy vector.
pub fn sample_value<R: Rng + ?Sized>(
    typology: &Typology,
    params: &CondParams,
    x: &[f64],
    rng: &mut R,
) -> Result<Value, CondError> {
    match (typology, params) {
        (Typology::Continuous(_), CondParams::Beta(p)) => {
            let (a, b) = p.shapes(x);
            Ok(Value::Real(sample_beta_rescaled(a, b, rng)))
        }
        (t, CondParams::Categorical(p)) if t.is_categorical() => {
            let probs = catlog_probs(p, x)?;
            Ok(Value::Cat(sample_categorical(&probs, rng) as u32))
        }
        _ => Err(CondError::FamilyMismatch),
    }
}

/// η is fixed at zero when the variable has fewer than two parent variables.
pub fn eta_fixed_zero(spec: &NetworkSpec, var: usize) -> bool {
    spec.parents(var).len() < 2
}

/// One parameter block per variable, in network order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub blocks: Vec<CondParams>,
}

impl NetworkParams {
    /// Checks block families and dimensions against the network.
    pub fn check(&self, spec: &NetworkSpec) -> Result<(), CondError> {
        if self.blocks.len() != spec.len() {
            return Err(CondError::Dimension {
                expected: spec.len(),
                got: self.blocks.len(),
            });
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let n = spec.layout(i).width;
            let v = spec.var(i);
            match (b, &v.typology) {
                (CondParams::Categorical(p), t) if t.is_categorical() => {
                    if p.n_rows() != n + 1 {
                        return Err(CondError::Dimension {
                            expected: n + 1,
                            got: p.n_rows(),
                        });
                    }
                    if p.s() + 1 != t.n_categories().unwrap_or(0) {
                        return Err(CondError::Dimension {
                            expected: t.n_categories().unwrap_or(0),
                            got: p.s() + 1,
                        });
                    }
                }
                (CondParams::Beta(p), Typology::Continuous(_)) => {
                    if p.mu.len() != n + 1 {
                        return Err(CondError::Dimension {
                            expected: n + 1,
                            got: p.mu.len(),
                        });
                    }
                    p.validate()?;
                }
                _ => return Err(CondError::FamilyMismatch),
            }
        }
        Ok(())
    }
}
