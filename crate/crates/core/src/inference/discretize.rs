use super::{DiscreteVar, DiscretizedNet, InferenceError};
use crate::condmodels::{catlog_probs, CondParams, NetworkParams};
use crate::netspec::{NetworkSpec, Typology};
use crate::numeric::beta_cdf;

/// Bins per continuous variable.
pub const BINS: usize = 5;

/// Equal-width bin edges over a rescaled domain.
pub fn bin_edges(lo: f64, hi: f64) -> Vec<f64> {
    let w = (hi - lo) / BINS as f64;
    (0..=BINS)
        .map(|i| if i == BINS { hi } else { lo + w * i as f64 })
        .collect()
}

/// Builds CPTs at the given parameters. Parents take their category, or
/// the midpoint of their bin; continuous children get the Beta mass of
/// each bin, renormalized over the variable's domain.
pub fn discretize(spec: &NetworkSpec, params: &NetworkParams) -> Result<DiscretizedNet, InferenceError> {
    params.check(spec)?;
    let n = spec.len();
    let edges: Vec<Option<Vec<f64>>> = (0..n)
        .map(|v| spec.var(v).rescaled_domain().map(|(lo, hi)| bin_edges(lo, hi)))
        .collect();
    let n_states: Vec<usize> = (0..n)
        .map(|v| spec.var(v).typology.n_categories().unwrap_or(BINS))
        .collect();

    let mut vars = Vec::with_capacity(n);
    let mut state = vec![0.0; n];
    for v in 0..n {
        let def = spec.var(v);
        let parents = spec.parents(v).to_vec();
        let lay = spec.layout(v);
        let mut x = vec![0.0; lay.width];
        let configs: usize = parents.iter().map(|&p| n_states[p]).product();
        let k = n_states[v];
        let mut cpt = Vec::with_capacity(configs * k);
        let mut tuple = vec![0usize; parents.len()];
        for _ in 0..configs {
            for (&p, &s) in parents.iter().zip(&tuple) {
                state[p] = match &edges[p] {
                    Some(e) => 0.5 * (e[s] + e[s + 1]),
                    None => s as f64,
                };
            }
            lay.fill(&state, &mut x);
            let row = match (&def.typology, &params.blocks[v]) {
                (Typology::Continuous(_), CondParams::Beta(bp)) => {
                    let (a, b) = bp.shapes(&x);
                    let e = edges[v].as_ref().unwrap();
                    let cdf: Vec<f64> = e.iter().map(|&y| beta_cdf(a, b, (y + 1.5) / 3.0)).collect();
                    let total = cdf[BINS] - cdf[0];
                    if !(total > 0.0) || !total.is_finite() {
                        return Err(InferenceError::NonNormalizable {
                            var: def.name.clone(),
                            parents: tuple.clone(),
                        });
                    }
                    let mut row: Vec<f64> = cdf.windows(2).map(|w| ((w[1] - w[0]) / total).max(0.0)).collect();
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|p| *p /= s);
                    row
                }
                (_, CondParams::Categorical(cp)) => catlog_probs(cp, &x)?,
                _ => return Err(InferenceError::Cond(crate::condmodels::CondError::FamilyMismatch)),
            };
            cpt.extend(row);
            // odometer, last parent fastest
            for j in (0..tuple.len()).rev() {
                tuple[j] += 1;
                if tuple[j] < n_states[parents[j]] {
                    break;
                }
                tuple[j] = 0;
            }
        }
        vars.push(DiscreteVar {
            name: def.name.clone(),
            cnode: def.cnode,
            n_states: k,
            parents,
            cpt,
            edges: edges[v].clone(),
            scale: def.typology.scale().copied(),
            labels: def.labels.clone(),
        });
    }
    DiscretizedNet::new(vars)
}
