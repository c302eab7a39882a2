mod common;

use common::*;
use hybridnet::condmodels::{ln_beta, CondParams};
use hybridnet::inference::{
    diagnose, discretize, exact_posterior, lw_posterior, DiscreteVar, DiscretizedNet, Evidence, EvidenceInput,
    InferenceError, QueryStatus,
};
use hybridnet::netspec::{parse_network, CNode};
use hybridnet::numeric::{gauss_legendre, integrate};
use hybridnet::rng::stream;
use hybridnet::{BetaRegParams, CatLogisticParams, NetworkParams, PriorSpec};

fn root(name: &str, probs: Vec<f64>) -> DiscreteVar {
    DiscreteVar {
        name: name.into(),
        cnode: CNode::VD,
        n_states: probs.len(),
        parents: vec![],
        cpt: probs,
        edges: None,
        scale: None,
        labels: vec![],
    }
}

fn chain_ab() -> DiscretizedNet {
    let a = root("A", vec![0.9, 0.1]);
    let b = DiscreteVar {
        name: "B".into(),
        cnode: CNode::VMM,
        n_states: 2,
        parents: vec![0],
        cpt: vec![0.8, 0.2, 0.3, 0.7],
        edges: None,
        scale: None,
        labels: vec!["no".into(), "yes".into()],
    };
    DiscretizedNet::new(vec![a, b]).unwrap()
}

#[test]
fn single_root_no_evidence() {
    let net = DiscretizedNet::new(vec![root("A", vec![0.9, 0.1])]).unwrap();
    let r = exact_posterior(&net, &Evidence::new(), &[0]).unwrap();
    assert_eq!(r.marginal("A").unwrap(), &[0.9, 0.1]);
}

#[test]
fn bayes_rule_by_hand() {
    let net = chain_ab();
    let mut ev = Evidence::new();
    ev.set(1, 1);
    let r = exact_posterior(&net, &ev, &[0, 1]).unwrap();
    // P(A=1 | B=1) = 0.1*0.7 / (0.9*0.2 + 0.1*0.7)
    let want = 0.07 / (0.18 + 0.07);
    let a = r.marginal("A").unwrap();
    assert!((a[1] - want).abs() < 1e-15);
    assert_eq!(r.marginal("B").unwrap(), &[0.0, 1.0]);
    assert!((r.evidence_probability.unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn structural_zero_evidence_is_impossible() {
    let a = root("A", vec![1.0, 0.0]);
    let net = DiscretizedNet::new(vec![a]).unwrap();
    let mut ev = Evidence::new();
    ev.set(0, 1);
    let r = exact_posterior(&net, &ev, &[0]).unwrap();
    assert_eq!(r.status, QueryStatus::ImpossibleEvidence);
    assert!(r.marginals.is_empty());
    let r = lw_posterior(&net, &ev, &[0], 1000, 1).unwrap();
    assert_eq!(r.status, QueryStatus::Undersampled);
    assert_eq!(r.ess, Some(0.0));
}

#[test]
fn lw_root_marginal_within_binomial_band() {
    let net = chain_ab();
    let n = 100_000;
    let r = lw_posterior(&net, &Evidence::new(), &[0], n, 4).unwrap();
    let p = r.marginal("A").unwrap()[1];
    let sd = (0.1 * 0.9 / n as f64).sqrt();
    assert!((p - 0.1).abs() < 3.0 * sd, "{p}");
    assert!((r.ess.unwrap() - n as f64).abs() < 1e-6);
    let again = lw_posterior(&net, &Evidence::new(), &[0], n, 4).unwrap();
    assert_eq!(r, again);
}

#[test]
fn lw_matches_exact_on_random_nets() {
    let mut rng = stream(2024, 0);
    for case in 0..6 {
        let net = random_dnet(10, 2e5, &mut rng);
        let ev = random_evidence(&net, 3, &mut rng);
        let queries: Vec<usize> = (0..net.len()).filter(|&v| ev.get(v).is_none()).collect();
        let exact = exact_posterior(&net, &ev, &queries).unwrap();
        let lw = lw_posterior(&net, &ev, &queries, 200_000, case).unwrap();
        for (a, b) in exact.marginals.iter().zip(&lw.marginals) {
            let tv = total_variation(&a.probs, &b.probs);
            assert!(tv <= 0.01, "case {case} {}: tv {tv}", a.variable);
        }
    }
}

#[test]
fn state_space_guard() {
    let mut vars = Vec::new();
    for i in 0..26 {
        vars.push(root(&format!("R{i}"), vec![0.5, 0.5]));
    }
    let net = DiscretizedNet::new(vars).unwrap();
    let q: Vec<usize> = (0..26).collect();
    assert!(matches!(
        exact_posterior(&net, &Evidence::new(), &q),
        Err(InferenceError::StateSpace { .. })
    ));
    // pruning keeps small queries cheap
    assert!(exact_posterior(&net, &Evidence::new(), &[3]).is_ok());
}

#[test]
fn unqueried_leaf_relabeling_is_invisible() {
    let mut rng = stream(77, 0);
    let net = random_dnet(8, 1e5, &mut rng);
    let ev = random_evidence(&net, 2, &mut rng);
    let q: Vec<usize> = (0..3).filter(|&v| ev.get(v).is_none()).collect();
    let mut vars = net.variables().to_vec();
    vars.push(DiscreteVar {
        name: "leaf".into(),
        cnode: CNode::VMM,
        n_states: 2,
        parents: vec![0],
        cpt: vec![0.5, 0.5, 0.1, 0.9],
        edges: None,
        scale: None,
        labels: vec![],
    });
    let with_leaf = DiscretizedNet::new(vars.clone()).unwrap();
    let mut vars2 = vars;
    vars2.last_mut().unwrap().cpt = vec![0.9, 0.1, 0.4, 0.6];
    vars2.last_mut().unwrap().name = "renamed".into();
    let relabeled = DiscretizedNet::new(vars2).unwrap();
    for n in [&with_leaf, &relabeled] {
        assert_eq!(exact_posterior(&net, &ev, &q).unwrap(), exact_posterior(n, &ev, &q).unwrap());
        assert_eq!(lw_posterior(&net, &ev, &q, 5000, 3).unwrap(), lw_posterior(n, &ev, &q, 5000, 3).unwrap());
    }
}

#[test]
fn own_observation_gives_degenerate_marginal() {
    let mut rng = stream(5, 0);
    let net = random_dnet(6, 1e5, &mut rng);
    let mut ev = random_evidence(&net, 0, &mut rng);
    ev.set(4, 1);
    let r = exact_posterior(&net, &ev, &[4]).unwrap();
    let m = r.marginal("X4").unwrap();
    assert_eq!(m[1], 1.0);
    assert!(m.iter().enumerate().all(|(s, &p)| s == 1 || p == 0.0));
}

const HYBRID: &str = r#"
var "P" : VD : binary
var "Q" : VD : multi(2)
var "HR" : VMM : cont(20, 60, 100, 220)
parents "HR" : "P", "Q"
var "S" : VMM : binary
parents "S" : "HR"
"#;

#[test]
fn binary_child_binary_parent_rows_are_pi_rows() {
    let spec = parse_network("var \"A\" : VD : binary\nvar \"B\" : VMM : binary\nparents \"B\" : \"A\"\n").unwrap();
    let params = NetworkParams {
        blocks: vec![
            CondParams::Categorical(CatLogisticParams::new(vec![vec![0.7, 0.3]], None, None).unwrap()),
            CondParams::Categorical(
                CatLogisticParams::new(vec![vec![0.95, 0.05], vec![0.2, 0.8]], None, None).unwrap(),
            ),
        ],
    };
    let net = discretize(&spec, &params).unwrap();
    assert_eq!(net.var(0).cpt, vec![0.7, 0.3]);
    assert_eq!(net.var(1).cpt, vec![0.95, 0.05, 0.2, 0.8]);
}

#[test]
fn neutral_middle_bin_mass_at_prior_mean_tau() {
    let spec = parse_network("var \"X\" : VMM : cont(0, 1, 2, 3)\n").unwrap();
    let tau = 89.4917 / 2.0304;
    let params = NetworkParams {
        blocks: vec![CondParams::Beta(BetaRegParams::new(vec![0.0], true, tau).unwrap())],
    };
    let net = discretize(&spec, &params).unwrap();
    let row = &net.var(0).cpt;
    // scipy.stats.beta over unit (0.4, 0.6) with a = b = tau / 2
    assert!((row[2] - 0.8177329291050288).abs() < 1e-9, "{row:?}");
    // the n-range (-0.5, 0.5) carries the 0.95-0.99 mass
    let n_range = hybridnet::numeric::beta_cdf(tau / 2.0, tau / 2.0, 2.0 / 3.0)
        - hybridnet::numeric::beta_cdf(tau / 2.0, tau / 2.0, 1.0 / 3.0);
    assert!((n_range - 0.9765305179847744).abs() < 1e-9);
    assert_eq!(net.var(0).neutral_state(), 2);
}

#[test]
fn continuous_rows_match_quadrature() {
    let spec = parse_network(HYBRID).unwrap();
    let priors = PriorSpec::defaults(&spec);
    let params = priors.mean_params(&spec).unwrap();
    let net = discretize(&spec, &params).unwrap();
    let hr = spec.index_of("HR").unwrap();
    let bp = params.blocks[hr].as_beta().unwrap();
    let gl = gauss_legendre(64);
    let edges = net.var(hr).edges.clone().unwrap();
    let mut row_idx = 0;
    for p in 0..2 {
        for q in 0..3 {
            let x = [p as f64, (q == 1) as u8 as f64, (q == 2) as u8 as f64];
            let (a, b) = bp.shapes(&x);
            let dens = |y: f64| {
                let u = (y + 1.5) / 3.0;
                ((a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - ln_beta(a, b)).exp() / 3.0
            };
            let masses: Vec<f64> = edges.windows(2).map(|w| integrate(w[0], w[1], &gl, dens)).collect();
            let total: f64 = masses.iter().sum();
            let row = &net.var(hr).cpt[row_idx * 5..row_idx * 5 + 5];
            for (m, r) in masses.iter().zip(row) {
                assert!((m / total - r).abs() < 1e-6, "{p},{q}: {m} vs {r}");
            }
            row_idx += 1;
        }
    }
    for v in net.variables() {
        for row in v.cpt.chunks(v.n_states) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn categorical_network_joint_matches_direct_evaluation() {
    let spec = parse_network(
        r#"
var "A" : VD : binary
var "B" : VD : multi(2)
var "C" : VMM : multi(3)
parents "C" : "A", "B"
"#,
    )
    .unwrap();
    let priors = PriorSpec::defaults(&spec);
    let params = priors.mean_params(&spec).unwrap();
    let net = discretize(&spec, &params).unwrap();
    let c = params.blocks[2].as_cat().unwrap();
    for a in 0..2 {
        for b in 0..3 {
            let x = [a as f64, (b == 1) as u8 as f64, (b == 2) as u8 as f64];
            let direct = hybridnet::condmodels::catlog_probs(c, &x).unwrap();
            let idx = a * 3 + b;
            assert_eq!(&net.var(2).cpt[idx * 4..idx * 4 + 4], direct.as_slice());
        }
    }
}

#[test]
fn evidence_json_forms() {
    let spec = parse_network(HYBRID).unwrap();
    let priors = PriorSpec::defaults(&spec);
    let net = discretize(&spec, &priors.mean_params(&spec).unwrap()).unwrap();
    let plain = Evidence::from_json(&net, r#"{"HR": 120, "P": 1}"#).unwrap();
    let fixture = Evidence::from_json(
        &net,
        r#"{"findings": [{"variable": "HR", "value": 120}, {"variable": "P", "value": "1"}], "unmapped": ["dyspnoea"]}"#,
    )
    .unwrap();
    assert_eq!(plain, fixture);
    // 120 bpm rescales to 0.625, the fourth bin
    assert_eq!(plain.get(2), Some(3));
    // out-of-scale raw values are clamped
    let e = Evidence::from_json(&net, r#"{"HR": 500}"#).unwrap();
    assert_eq!(e.get(2), Some(4));
    assert!(matches!(
        Evidence::from_json(&net, r#"{"Nope": 1}"#),
        Err(InferenceError::UnknownVariable(_))
    ));
    assert!(matches!(
        Evidence::from_json(&net, r#"{"Q": 3}"#),
        Err(InferenceError::BadFinding { .. })
    ));
    let input: EvidenceInput = serde_json::from_str(r#"{"P": 0}"#).unwrap();
    assert_eq!(input.pairs().len(), 1);
}

#[test]
fn diagnose_ranks_and_conditions() {
    let spec = parse_network(HYBRID).unwrap();
    let priors = PriorSpec::defaults(&spec);
    let net = discretize(&spec, &priors.mean_params(&spec).unwrap()).unwrap();
    let d = diagnose(&net, &Evidence::new(), None, 20_000, 1).unwrap();
    assert_eq!(d.ranking.len(), 2);
    assert!(d.ranking[0].probability >= d.ranking[1].probability);
    let exact = exact_posterior(&net, &Evidence::new(), &[0, 1]).unwrap();
    for r in &d.ranking {
        let exact_p = 1.0 - exact.marginal(&r.variable).unwrap()[0];
        assert!((r.probability - exact_p).abs() < 0.01);
    }

    let mut ev = Evidence::new();
    ev.set(0, 1);
    let d = diagnose(&net, &ev, None, 5000, 1).unwrap();
    let p = d.ranking.iter().find(|r| r.variable == "P").unwrap();
    assert_eq!(p.probability, 1.0);
}

#[test]
fn json_round_trip_revalidates() {
    let net = chain_ab();
    let text = net.to_json();
    assert_eq!(DiscretizedNet::from_json(&text).unwrap(), net);
    let broken = text.replace("0.8", "0.9");
    assert!(DiscretizedNet::from_json(&broken).is_err());
}
