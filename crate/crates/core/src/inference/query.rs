use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiscretizedNet, Evidence, InferenceError};
use crate::netspec::CNode;
use crate::rng::stream;

/// Largest joint state count exact enumeration will visit.
pub const EXACT_STATE_LIMIT: f64 = 5e7;

/// Likelihood-weighting samples are split into this many substreams,
/// independent of the worker count.
const SHARDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    LikelihoodWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Ok,
    /// The evidence has probability zero under the network.
    ImpossibleEvidence,
    /// Every sample had zero weight: the evidence is impossible or too rare
    /// for the sample size.
    Undersampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub variable: String,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub method: Method,
    pub status: QueryStatus,
    /// Empty unless the status is `Ok`.
    pub marginals: Vec<Marginal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    /// Probability of the evidence (exact method only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence_probability: Option<f64>,
}

impl QueryResult {
    pub fn marginal(&self, name: &str) -> Option<&[f64]> {
        self.marginals
            .iter()
            .find(|m| m.variable == name)
            .map(|m| m.probs.as_slice())
    }

    pub fn is_ok(&self) -> bool {
        self.status == QueryStatus::Ok
    }
}

fn check_queries(net: &DiscretizedNet, ev: &Evidence, queries: &[usize]) -> Result<(), InferenceError> {
    for &q in queries {
        if q >= net.len() {
            return Err(InferenceError::UnknownVariable(format!("#{q}")));
        }
    }
    for (v, s) in ev.iter() {
        if v >= net.len() {
            return Err(InferenceError::UnknownVariable(format!("#{v}")));
        }
        if s >= net.var(v).n_states {
            return Err(InferenceError::BadFinding {
                var: net.var(v).name.clone(),
                message: format!("state {s} out of range"),
            });
        }
    }
    Ok(())
}

fn normalized(net: &DiscretizedNet, queries: &[usize], acc: Vec<Vec<f64>>, total: f64) -> Vec<Marginal> {
    queries
        .iter()
        .zip(acc)
        .map(|(&q, a)| Marginal {
            variable: net.var(q).name.clone(),
            probs: a.into_iter().map(|x| x / total).collect(),
        })
        .collect()
}

struct Enumerator<'a> {
    net: &'a DiscretizedNet,
    order: &'a [usize],
    observed: &'a [Option<usize>],
    queries: &'a [usize],
    state: Vec<usize>,
    acc: Vec<Vec<f64>>,
    total: f64,
}

impl Enumerator<'_> {
    fn visit(&mut self, depth: usize, w: f64) {
        if w == 0.0 {
            return;
        }
        if depth == self.order.len() {
            self.total += w;
            for (qi, &q) in self.queries.iter().enumerate() {
                self.acc[qi][self.state[q]] += w;
            }
            return;
        }
        let v = self.order[depth];
        if let Some(s) = self.observed[v] {
            self.state[v] = s;
            let p = self.net.row(v, &self.state)[s];
            self.visit(depth + 1, w * p);
        } else {
            for s in 0..self.net.var(v).n_states {
                self.state[v] = s;
                let p = self.net.row(v, &self.state)[s];
                self.visit(depth + 1, w * p);
            }
        }
    }
}

/// Exact marginals of `queries` given `ev` by enumerating the joint over
/// the ancestors of queried and observed variables.
pub fn exact_posterior(net: &DiscretizedNet, ev: &Evidence, queries: &[usize]) -> Result<QueryResult, InferenceError> {
    check_queries(net, ev, queries)?;
    let observed = ev.dense(net.len());
    let order = net.relevant(queries.iter().copied().chain(ev.iter().map(|(v, _)| v)));
    let states: f64 = order
        .iter()
        .filter(|&&v| observed[v].is_none())
        .map(|&v| net.var(v).n_states as f64)
        .product();
    if states > EXACT_STATE_LIMIT {
        return Err(InferenceError::StateSpace {
            states,
            limit: EXACT_STATE_LIMIT,
        });
    }
    let mut en = Enumerator {
        net,
        order: &order,
        observed: &observed,
        queries,
        state: vec![0; net.len()],
        acc: queries.iter().map(|&q| vec![0.0; net.var(q).n_states]).collect(),
        total: 0.0,
    };
    en.visit(0, 1.0);
    let total = en.total;
    let ok = total > 0.0;
    Ok(QueryResult {
        method: Method::Exact,
        status: if ok { QueryStatus::Ok } else { QueryStatus::ImpossibleEvidence },
        marginals: if ok { normalized(net, queries, en.acc, total) } else { Vec::new() },
        n_samples: None,
        ess: None,
        evidence_probability: Some(total),
    })
}

#[inline]
fn draw(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Likelihood-weighted marginals from `n_samples` ancestral samples with
/// the evidence clamped. Deterministic under `seed`.
pub fn lw_posterior(
    net: &DiscretizedNet,
    ev: &Evidence,
    queries: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<QueryResult, InferenceError> {
    if n_samples == 0 {
        return Err(InferenceError::NoSamples);
    }
    check_queries(net, ev, queries)?;
    let observed = ev.dense(net.len());
    let order = net.relevant(queries.iter().copied().chain(ev.iter().map(|(v, _)| v)));

    let shards: Vec<(f64, f64, Vec<Vec<f64>>)> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = n_samples / SHARDS + usize::from(shard < n_samples % SHARDS);
            let mut rng = stream(seed, shard as u64);
            let mut state = vec![0usize; net.len()];
            let mut acc: Vec<Vec<f64>> = queries.iter().map(|&q| vec![0.0; net.var(q).n_states]).collect();
            let (mut sw, mut sw2) = (0.0, 0.0);
            for _ in 0..count {
                let mut w = 1.0;
                for &v in &order {
                    let row = net.row(v, &state);
                    match observed[v] {
                        Some(s) => {
                            state[v] = s;
                            w *= row[s];
                        }
                        None => state[v] = draw(row, rng.random::<f64>()),
                    }
                }
                if w > 0.0 {
                    sw += w;
                    sw2 += w * w;
                    for (qi, &q) in queries.iter().enumerate() {
                        acc[qi][state[q]] += w;
                    }
                }
            }
            (sw, sw2, acc)
        })
        .collect();

    let mut sw = 0.0;
    let mut sw2 = 0.0;
    let mut acc: Vec<Vec<f64>> = queries.iter().map(|&q| vec![0.0; net.var(q).n_states]).collect();
    for (w, w2, a) in shards {
        sw += w;
        sw2 += w2;
        for (dst, src) in acc.iter_mut().zip(a) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    let ok = sw > 0.0;
    Ok(QueryResult {
        method: Method::LikelihoodWeighting,
        status: if ok { QueryStatus::Ok } else { QueryStatus::Undersampled },
        marginals: if ok { normalized(net, queries, acc, sw) } else { Vec::new() },
        n_samples: Some(n_samples),
        ess: Some(if ok { sw * sw / sw2 } else { 0.0 }),
        evidence_probability: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDisease {
    pub variable: String,
    /// Posterior probability of any non-neutral state.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub ranking: Vec<RankedDisease>,
    pub status: QueryStatus,
    pub n_samples: usize,
    pub ess: f64,
}

/// Ranks diseases by posterior probability of a non-neutral value. The
/// default disease set is every pathology variable.
pub fn diagnose(
    net: &DiscretizedNet,
    ev: &Evidence,
    diseases: Option<&[usize]>,
    n_samples: usize,
    seed: u64,
) -> Result<Diagnosis, InferenceError> {
    let default: Vec<usize>;
    let diseases = match diseases {
        Some(d) => d,
        None => {
            default = (0..net.len()).filter(|&v| net.var(v).cnode == CNode::VD).collect();
            &default
        }
    };
    let res = lw_posterior(net, ev, diseases, n_samples, seed)?;
    let mut ranking: Vec<RankedDisease> = res
        .marginals
        .iter()
        .zip(diseases)
        .map(|(m, &v)| RankedDisease {
            variable: m.variable.clone(),
            probability: (1.0 - m.probs[net.var(v).neutral_state()]).max(0.0),
        })
        .collect();
    ranking.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.variable.cmp(&b.variable)));
    Ok(Diagnosis {
        ranking,
        status: res.status,
        n_samples,
        ess: res.ess.unwrap_or(0.0),
    })
}
