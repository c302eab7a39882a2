use std::path::PathBuf;

use hybridnet::inference::{diagnose, discretize, Evidence, EvidenceInput, QueryStatus};
use hybridnet::netspec::parse_network;
use hybridnet::PriorSpec;
use serde::Deserialize;

fn root() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

#[derive(Deserialize)]
struct Mapping {
    diseases: Vec<Entry>,
}

#[derive(Deserialize)]
struct Entry {
    label: String,
    variable: String,
}

#[test]
fn demo_cases_produce_rankings() {
    let spec = parse_network(&std::fs::read_to_string(root().join("models/cardiopulmonary.net")).unwrap()).unwrap();
    let params = PriorSpec::defaults(&spec).mean_params(&spec).unwrap();
    let net = discretize(&spec, &params).unwrap();
    let map: Mapping =
        serde_json::from_str(&std::fs::read_to_string(root().join("fixtures/cases/diseases.json")).unwrap()).unwrap();
    let diseases: Vec<usize> = map
        .diseases
        .iter()
        .map(|d| net.index_of(&d.variable).unwrap_or_else(|| panic!("{} -> {}", d.label, d.variable)))
        .collect();
    assert_eq!(diseases.len(), 9);

    for k in 1..=6 {
        let text = std::fs::read_to_string(root().join(format!("fixtures/cases/case{k}.json"))).unwrap();
        let input: EvidenceInput = serde_json::from_str(&text).unwrap();
        let n_findings = input.pairs().len();
        let ev = Evidence::from_input(&net, &input).unwrap_or_else(|e| panic!("case {k}: {e}"));
        assert_eq!(ev.len(), n_findings, "case {k}");
        let d = diagnose(&net, &ev, Some(&diseases), 20_000, k).unwrap();
        assert_eq!(d.status, QueryStatus::Ok, "case {k}");
        assert_eq!(d.ranking.len(), 9);
        assert!(d.ranking.windows(2).all(|w| w[0].probability >= w[1].probability));
        assert!(d.ranking.iter().all(|r| (0.0..=1.0).contains(&r.probability)));
    }
}
