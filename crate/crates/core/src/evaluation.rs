//! Discrimination scores for disease rankings: Concordance Index with
//! percentile bootstrap intervals, and the evaluable-disease rule.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{diagnose, DiscretizedNet, Evidence, InferenceError};
use crate::mcmc::Dataset;
use crate::netspec::{CNode, NetworkSpec, Value};
use crate::numeric::quantile_sorted;
use crate::rng::stream;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("concordance is undefined with {n0} controls and {n1} cases")]
    SingleClass { n0: usize, n1: usize },
    #[error("{risks} risks for {labels} labels")]
    Length { risks: usize, labels: usize },
    #[error("risk {0} outside [0, 1]")]
    RiskDomain(f64),
    #[error("bootstrap needs at least one replicate")]
    NoReplicates,
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Predicted risks with binary outcomes (`true` = disease present).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCohort {
    risks: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredCohort {
    pub fn new(risks: Vec<f64>, labels: Vec<bool>) -> Result<Self, EvalError> {
        if risks.len() != labels.len() {
            return Err(EvalError::Length {
                risks: risks.len(),
                labels: labels.len(),
            });
        }
        if let Some(&r) = risks.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(EvalError::RiskDomain(r));
        }
        Ok(Self { risks, labels })
    }

    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    pub fn risks(&self) -> &[f64] {
        &self.risks
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// `(controls, cases)`.
    pub fn counts(&self) -> (usize, usize) {
        let n1 = self.labels.iter().filter(|&&l| l).count();
        (self.labels.len() - n1, n1)
    }
}

/// Twice the concordant-pair count plus the tied pairs, from a sort by
/// risk. Returns `(numerator, n0 * n1)`; C = numerator / (2 n0 n1).
fn half_units(risks: &[f64], labels: &[bool], idx: &mut [usize]) -> (u64, u64) {
    idx.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]));
    let mut controls_below: u64 = 0;
    let mut num: u64 = 0;
    let (mut n0, mut n1) = (0u64, 0u64);
    let mut i = 0;
    while i < idx.len() {
        let r = risks[idx[i]];
        let (mut g0, mut g1) = (0u64, 0u64);
        let mut j = i;
        while j < idx.len() && risks[idx[j]] == r {
            if labels[idx[j]] {
                g1 += 1;
            } else {
                g0 += 1;
            }
            j += 1;
        }
        num += 2 * g1 * controls_below + g1 * g0;
        controls_below += g0;
        n0 += g0;
        n1 += g1;
        i = j;
    }
    (num, n0 * n1)
}

/// Fraction of (case, control) pairs where the case has the higher risk;
/// ties count one half.
pub fn concordance_index(c: &ScoredCohort) -> Result<f64, EvalError> {
    let (n0, n1) = c.counts();
    if n0 == 0 || n1 == 0 {
        return Err(EvalError::SingleClass { n0, n1 });
    }
    let mut idx: Vec<usize> = (0..c.len()).collect();
    let (num, pairs) = half_units(&c.risks, &c.labels, &mut idx);
    Ok(num as f64 / (2 * pairs) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub replicates: usize,
}

/// Percentile 95% interval from `b` whole-cohort resamples. Replicate `i`
/// uses substream `i` of `seed`; single-class resamples are redrawn.
pub fn bootstrap_ci(c: &ScoredCohort, b: usize, seed: u64) -> Result<BootstrapCi, EvalError> {
    let estimate = concordance_index(c)?;
    if b == 0 {
        return Err(EvalError::NoReplicates);
    }
    let n = c.len();
    let mut reps: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut risks = vec![0.0; n];
            let mut labels = vec![false; n];
            let mut idx: Vec<usize> = (0..n).collect();
            loop {
                for k in 0..n {
                    let j = rng.random_range(0..n);
                    risks[k] = c.risks[j];
                    labels[k] = c.labels[j];
                }
                let n1 = labels.iter().filter(|&&l| l).count();
                if n1 == 0 || n1 == n {
                    continue;
                }
                let (num, pairs) = half_units(&risks, &labels, &mut idx);
                return num as f64 / (2 * pairs) as f64;
            }
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        estimate,
        lo: quantile_sorted(&reps, 0.025),
        hi: quantile_sorted(&reps, 0.975),
        replicates: b,
    })
}

/// Pathology variables observed in more than a quarter of the records with
/// more than 5% non-neutral values among the observed ones.
pub fn select_evaluable_diseases(spec: &NetworkSpec, data: &Dataset) -> Vec<usize> {
    let n = data.n_records();
    if n == 0 {
        return Vec::new();
    }
    (0..spec.len())
        .filter(|&v| spec.var(v).cnode == CNode::VD)
        .filter(|&v| {
            let obs = data.observed_count(v);
            obs > 0
                && obs as f64 / n as f64 > 0.25
                && data.non_neutral_count(v) as f64 / obs as f64 > 0.05
        })
        .collect()
}

/// Evidence from the observed cells of one record, restricted to `scope`.
/// Dataset columns must follow the network's variable order.
pub fn record_evidence(net: &DiscretizedNet, data: &Dataset, record: usize, scope: &[usize]) -> Evidence {
    let mut ev = Evidence::new();
    for &v in scope {
        match data.get(record, v) {
            Some(Value::Cat(k)) => ev.set(v, k as usize),
            Some(Value::Real(y)) => {
                if let Some(e) = &net.var(v).edges {
                    ev.set(v, crate::inference::bin_of(e, y));
                }
            }
            None => {}
        }
    }
    ev
}

/// One row of an evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub disease: String,
    pub scope: String,
    pub n0: usize,
    pub n1: usize,
    pub estimate: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub bootstrap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            seed: 1,
            bootstrap: 2000,
        }
    }
}

/// Scores each disease over the records where it is observed, using the
/// findings in `scope` (minus the disease itself) as evidence.
pub fn evaluate(
    net: &DiscretizedNet,
    data: &Dataset,
    diseases: &[usize],
    scope_name: &str,
    scope: &[usize],
    cfg: &EvalConfig,
) -> Result<Vec<EvalRow>, EvalError> {
    let mut rows = Vec::with_capacity(diseases.len());
    for &d in diseases {
        let neutral = net.var(d).neutral_state();
        let scored: Vec<(f64, bool)> = (0..data.n_records())
            .into_par_iter()
            .filter_map(|r| {
                let label = match data.get(r, d)? {
                    Value::Cat(k) => k as usize != neutral,
                    Value::Real(y) => crate::inference::bin_of(net.var(d).edges.as_ref()?, y) != neutral,
                };
                let scope: Vec<usize> = scope.iter().copied().filter(|&v| v != d).collect();
                let ev = record_evidence(net, data, r, &scope);
                let seed = cfg.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                Some(diagnose(net, &ev, Some(&[d]), cfg.n_samples, seed).map(|dg| {
                    let p = dg.ranking.first().map_or(0.0, |x| x.probability);
                    (p.clamp(0.0, 1.0), label)
                }))
            })
            .collect::<Result<_, _>>()?;
        let cohort = ScoredCohort::new(
            scored.iter().map(|s| s.0).collect(),
            scored.iter().map(|s| s.1).collect(),
        )?;
        let (n0, n1) = cohort.counts();
        let ci = if n0 > 0 && n1 > 0 {
            Some(bootstrap_ci(&cohort, cfg.bootstrap, cfg.seed)?)
        } else {
            None
        };
        rows.push(EvalRow {
            disease: net.var(d).name.clone(),
            scope: scope_name.to_string(),
            n0,
            n1,
            estimate: ci.as_ref().map(|c| c.estimate),
            lo: ci.as_ref().map(|c| c.lo),
            hi: ci.as_ref().map(|c| c.hi),
        });
    }
    Ok(rows)
}

/// Evaluation rows as CSV with a header line.
pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["disease", "scope", "n0", "n1", "estimate", "lo", "hi"])
        .expect("in-memory write");
    let f = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.disease.clone(),
            r.scope.clone(),
            r.n0.to_string(),
            r.n1.to_string(),
            f(r.estimate),
            f(r.lo),
            f(r.hi),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
