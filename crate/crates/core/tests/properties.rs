mod common;

use proptest::prelude::*;

use common::{brute_concordance, random_dnet, random_evidence, synthetic_spec, theta_star};
use hybridnet::evaluation::{concordance_index, ScoredCohort};
use hybridnet::inference::{discretize, exact_posterior};
use hybridnet::netspec::{inverse_rescale, rescale, ContinuousScale};
use hybridnet::rng::stream;
use hybridnet::{BetaRegParams, CondParams};

fn scale() -> impl Strategy<Value = ContinuousScale> {
    (-100.0..100.0f64, 0.0..10.0f64, 0.1..10.0f64, 0.0..10.0f64)
        .prop_filter("one side range", |(_, a, _, c)| *a > 0.0 || *c > 0.0)
        .prop_map(|(l2, a, b, c)| ContinuousScale::new(l2, l2 + a, l2 + a + b, l2 + a + b + c).unwrap())
}

proptest! {
    #[test]
    fn rescale_round_trips(s in scale(), u in 0.001..0.999f64) {
        let (lo, hi) = s.rescaled_domain();
        let y = lo + u * (hi - lo);
        let Ok(raw) = inverse_rescale(y, &s) else { return Ok(()) };
        let back = rescale(raw, &s).unwrap();
        prop_assert!((back - y).abs() < 1e-9, "{y} -> {raw} -> {back}");
    }

    #[test]
    fn concordance_matches_pair_counting(
        pts in prop::collection::vec((0u8..6, any::<bool>()), 2..60)
    ) {
        let risks: Vec<f64> = pts.iter().map(|p| p.0 as f64 / 5.0).collect();
        let labels: Vec<bool> = pts.iter().map(|p| p.1).collect();
        let both = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
        let c = ScoredCohort::new(risks.clone(), labels.clone()).and_then(|c| concordance_index(&c));
        if both {
            prop_assert_eq!(c.unwrap(), brute_concordance(&risks, &labels));
        } else {
            prop_assert!(c.is_err());
        }
    }

    #[test]
    fn beta_cpt_rows_are_distributions(m1 in -1.4..1.4f64, m2 in -1.4..1.4f64, tau in 0.5..400.0f64) {
        let spec = synthetic_spec();
        let mut params = theta_star();
        params.blocks[4] = CondParams::Beta(BetaRegParams::new(vec![0.0, m1, m2], true, tau).unwrap());
        let net = discretize(&spec, &params).unwrap();
        for v in net.variables() {
            for row in v.cpt.chunks(v.n_states) {
                prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_marginals_sum_to_one(seed in 0u64..10_000) {
        let mut rng = stream(seed, 0);
        let net = random_dnet(6, 5e3, &mut rng);
        let ev = random_evidence(&net, 2, &mut rng);
        let all: Vec<usize> = (0..net.len()).collect();
        if let Ok(r) = exact_posterior(&net, &ev, &all) {
            for m in &r.marginals {
                prop_assert!((m.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
