#![allow(dead_code)]

use hybridnet::mcmc::{is_free, param_layout, param_value, Chain};
use hybridnet::netspec::parse_network;
use hybridnet::numeric::quantile_sorted;
use hybridnet::rng::Rng;
use hybridnet::mcmc::simulate;
use hybridnet::netspec::inverse_rescale;
use hybridnet::rng::stream;
use hybridnet::{Typology, Value};
use hybridnet::{BetaRegParams, CatLogisticParams, CondParams, Dataset, NetworkParams, NetworkSpec, PriorEntry, PriorSpec, VarPrior};
use rand::Rng as _;

pub const SYNTHETIC_NET: &str = r#"
var "A" : VD : binary
var "B" : VD : multi(2)
var "C" : VD : binary
parents "C" : "A", "B"
var "D" : VMM : multi(2)
parents "D" : "C"
var "E" : VMM : cont(0, 1, 2, 3)
parents "E" : "A", "C"
"#;

pub fn synthetic_spec() -> NetworkSpec {
    parse_network(SYNTHETIC_NET).unwrap()
}

fn cat(pi: Vec<Vec<f64>>, eta: Option<Vec<f64>>) -> CondParams {
    CondParams::Categorical(CatLogisticParams::new(pi, eta, None).unwrap())
}

/// Parameters the synthetic records are generated from.
pub fn theta_star() -> NetworkParams {
    NetworkParams {
        blocks: vec![
            cat(vec![vec![0.6, 0.4]], None),
            cat(vec![vec![0.5, 0.3, 0.2]], None),
            cat(
                vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.6, 0.4], vec![0.2, 0.8]],
                Some(vec![0.5]),
            ),
            cat(vec![vec![0.8, 0.15, 0.05], vec![0.2, 0.3, 0.5]], None),
            CondParams::Beta(BetaRegParams::new(vec![0.0, 0.9, -0.7], true, 40.0).unwrap()),
        ],
    }
}

/// Flat Dirichlet rows, uniform μ, vague Gamma τ.
pub fn synthetic_priors(spec: &NetworkSpec) -> PriorSpec {
    let mut p = PriorSpec::defaults(spec);
    for vp in &mut p.vars {
        match vp {
            VarPrior::Categorical { rows, .. } => {
                for r in rows.iter_mut() {
                    if let PriorEntry::Dirichlet { alpha } = r {
                        alpha.iter_mut().for_each(|a| *a = 1.0);
                    }
                }
            }
            VarPrior::Continuous { mu, tau } => {
                for m in mu.iter_mut().skip(1) {
                    *m = PriorEntry::Beta { a: 1.0, b: 1.0 };
                }
                *tau = PriorEntry::Gamma { shape: 2.0, rate: 0.05 };
            }
        }
    }
    p
}

/// Hides each cell independently with probability `frac`.
pub fn mask(ds: &mut Dataset, frac: f64, rng: &mut Rng) {
    for v in 0..ds.column_count() {
        for r in 0..ds.n_records() {
            if rng.random::<f64>() < frac {
                ds.set(r, v, None);
            }
        }
    }
}

/// (covered, total) over free parameters of the chain.
pub fn coverage(spec: &NetworkSpec, priors: &PriorSpec, truth: &NetworkParams, chain: &Chain) -> (usize, usize) {
    let layout = param_layout(spec, priors);
    let mut covered = 0;
    let mut total = 0;
    for (d, col) in layout.iter().zip(&chain.draws) {
        if !is_free(priors, d) {
            continue;
        }
        let mut s = col.clone();
        s.sort_by(f64::total_cmp);
        let t = param_value(truth, d);
        total += 1;
        if t >= quantile_sorted(&s, 0.025) && t <= quantile_sorted(&s, 0.975) {
            covered += 1;
        }
    }
    (covered, total)
}

use hybridnet::inference::{bin_edges, DiscreteVar, DiscretizedNet, Evidence};
use hybridnet::netspec::CNode;

fn dirichlet_row(k: usize, rng: &mut Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// Random discrete network of `n` variables mixing binary, three-state and
/// five-bin variables, up to three parents each, joint size at most `max_joint`.
pub fn random_dnet(n: usize, max_joint: f64, rng: &mut Rng) -> DiscretizedNet {
    let mut vars: Vec<DiscreteVar> = Vec::new();
    let mut joint = 1.0;
    for i in 0..n {
        let mut k = [2usize, 2, 3, 5][rng.random_range(0..4)];
        while joint * k as f64 > max_joint && k > 2 {
            k = if k == 5 { 3 } else { 2 };
        }
        joint *= k as f64;
        let mut parents: Vec<usize> = Vec::new();
        if i > 0 {
            let np = rng.random_range(0..=3.min(i));
            while parents.len() < np {
                let p = rng.random_range(0..i);
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        let configs: usize = parents.iter().map(|&p| vars[p].n_states).product();
        let cpt: Vec<f64> = (0..configs).flat_map(|_| dirichlet_row(k, rng)).collect();
        vars.push(DiscreteVar {
            name: format!("X{i}"),
            cnode: if i % 3 == 0 { CNode::VD } else { CNode::VMM },
            n_states: k,
            parents,
            cpt,
            edges: (k == 5).then(|| bin_edges(-1.5, 1.5)),
            scale: None,
            labels: Vec::new(),
        });
    }
    DiscretizedNet::new(vars).unwrap()
}

/// Observes up to `max_obs` variables at states drawn from the joint, so the
/// evidence is possible.
pub fn random_evidence(net: &DiscretizedNet, max_obs: usize, rng: &mut Rng) -> Evidence {
    let mut state = vec![0usize; net.len()];
    for &v in net.topological_order() {
        let def = net.var(v);
        let configs: Vec<usize> = def.parents.iter().map(|&p| net.var(p).n_states).collect();
        let mut idx = 0;
        for (j, &p) in def.parents.iter().enumerate() {
            idx = idx * configs[j] + state[p];
        }
        let row = &def.cpt[idx * def.n_states..(idx + 1) * def.n_states];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        state[v] = def.n_states - 1;
        for (s, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                state[v] = s;
                break;
            }
        }
    }
    let mut ev = Evidence::new();
    let n_obs = rng.random_range(0..=max_obs.min(net.len()));
    while ev.len() < n_obs {
        let v = rng.random_range(0..net.len());
        ev.set(v, state[v]);
    }
    ev
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

use hybridnet::evaluation::ScoredCohort;

/// O(n0 n1) pair count, ties one half.
pub fn brute_concordance(risks: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &ri) in risks.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &rj) in risks.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if ri > rj {
                num += 1.0;
            } else if ri == rj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Cohort of `n` patients, each a case with probability 1/2, with risks
/// coarsened to `levels` distinct values so ties are common.
pub fn random_cohort(n: usize, levels: u32, rng: &mut Rng) -> ScoredCohort {
    loop {
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let risks = labels
            .iter()
            .map(|&l| {
                let shift = if l { 0.15 } else { 0.0 };
                let r: f64 = (rng.random::<f64>() * 0.85 + shift).min(1.0);
                (r * levels as f64).round() / levels as f64
            })
            .collect();
        return ScoredCohort::new(risks, labels).unwrap();
    }
}

/// Cases ~ N(mu, 1), controls ~ N(0, 1) pushed through the logistic
/// function; population C = Phi(mu / sqrt 2).
pub fn binormal_cohort(n0: usize, n1: usize, mu: f64, rng: &mut Rng) -> ScoredCohort {
    use rand_distr::{Distribution, StandardNormal};
    let logistic = |z: f64| 1.0 / (1.0 + (-z).exp());
    let mut risks = Vec::with_capacity(n0 + n1);
    let mut labels = Vec::with_capacity(n0 + n1);
    for i in 0..n0 + n1 {
        let case = i >= n0;
        let z: f64 = StandardNormal.sample(rng);
        risks.push(logistic(z + if case { mu } else { 0.0 }));
        labels.push(case);
    }
    ScoredCohort::new(risks, labels).unwrap()
}

/// Records simulated from θ* as CSV text in original units.
pub fn synthetic_csv(n: usize) -> String {
    let spec = synthetic_spec();
    let ds = simulate(&spec, &theta_star(), n, &mut stream(3, 0)).unwrap();
    let mut out = String::from("A,B,C,D,E\n");
    for r in 0..n {
        let cells: Vec<String> = (0..spec.len())
            .map(|v| match (ds.get(r, v).unwrap(), &spec.var(v).typology) {
                (Value::Cat(k), _) => k.to_string(),
                (Value::Real(y), Typology::Continuous(s)) => format!("{}", inverse_rescale(y, s).unwrap()),
                _ => unreachable!(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
