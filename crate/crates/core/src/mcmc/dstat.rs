use serde::{Deserialize, Serialize};

use super::{marginal_prior, Chain};
use crate::priors::{prior_interval, PriorEntry, PriorSpec};

/// Upper edges of the first four D-statistic bins; the last bin is open.
pub const D_BIN_EDGES: [f64; 4] = [0.01, 0.5, 0.925, 0.975];

/// Fraction of draws inside the equal-tail 95% interval of a scalar prior
/// (bounds included). A point mass counts draws within 1e-12 of its point.
pub fn d_statistic(prior: &PriorEntry, draws: &[f64]) -> f64 {
    if draws.is_empty() {
        return f64::NAN;
    }
    let inside = match prior {
        PriorEntry::Dirac { value } => draws.iter().filter(|&&d| (d - value).abs() <= 1e-12).count(),
        p => {
            let (lo, hi) = prior_interval(p)[0];
            draws.iter().filter(|&&d| d >= lo && d <= hi).count()
        }
    };
    inside as f64 / draws.len() as f64
}

/// D-statistic of every parameter in a chain, against its marginal prior.
pub fn d_statistics(chain: &Chain, priors: &PriorSpec) -> Vec<(String, f64)> {
    chain
        .params
        .iter()
        .zip(&chain.draws)
        .map(|(d, x)| (d.name.clone(), d_statistic(&marginal_prior(priors, d), x)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DHistogram {
    pub edges: [f64; 4],
    /// Counts for `< 0.01`, `[0.01, 0.5)`, `[0.5, 0.925)`, `[0.925, 0.975]`
    /// and `> 0.975`.
    pub counts: [usize; 5],
}

pub fn d_statistic_histogram(values: &[f64]) -> DHistogram {
    let mut counts = [0; 5];
    for &d in values {
        let bin = if d < D_BIN_EDGES[0] {
            0
        } else if d < D_BIN_EDGES[1] {
            1
        } else if d < D_BIN_EDGES[2] {
            2
        } else if d <= D_BIN_EDGES[3] {
            3
        } else {
            4
        };
        counts[bin] += 1;
    }
    DHistogram {
        edges: D_BIN_EDGES,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let p = PriorEntry::Beta { a: 2.0, b: 2.0 };
        assert_eq!(d_statistic(&p, &[0.5, 0.4, 0.6]), 1.0);
        assert_eq!(d_statistic(&p, &[0.999, 0.9999]), 0.0);
        assert_eq!(d_statistic(&PriorEntry::Dirac { value: 0.5 }, &[0.5, 0.5 + 1e-13, 0.6]), 2.0 / 3.0);
    }

    #[test]
    fn bins() {
        let h = d_statistic_histogram(&[0.0, 0.01, 0.5, 0.925, 0.975, 0.98]);
        assert_eq!(h.counts, [1, 1, 1, 2, 1]);
        assert_eq!(h.edges, [0.01, 0.5, 0.925, 0.975]);
    }
}
