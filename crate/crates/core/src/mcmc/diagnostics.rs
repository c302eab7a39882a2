//! Convergence tests on single series: Geweke, Heidelberger-Welch and
//! Raftery-Lewis, with the conventional default settings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use super::{is_free, spectrum0, Chain};
use crate::numeric::quantile_sorted;
use crate::priors::PriorSpec;

/// Shortest series any test will look at.
pub const MIN_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Pass,
    Fail,
    /// Too short or degenerate to decide.
    Inconclusive,
}

impl TestOutcome {
    fn from_bool(b: bool) -> Self {
        if b {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Self::Pass
    }
}

fn qnorm(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeResult {
    pub z: f64,
    pub outcome: TestOutcome,
    /// Constant series: z is 0 by convention and the test passes.
    pub degenerate: bool,
}

/// Geweke's comparison of the means of the first `frac_a` and the last
/// `frac_b` of a series; passes at |z| < 1.96.
pub fn geweke(x: &[f64], frac_a: f64, frac_b: f64) -> GewekeResult {
    let n = x.len();
    if n < MIN_LENGTH {
        return GewekeResult {
            z: f64::NAN,
            outcome: TestOutcome::Inconclusive,
            degenerate: false,
        };
    }
    if x.iter().all(|&v| v == x[0]) {
        return GewekeResult {
            z: 0.0,
            outcome: TestOutcome::Pass,
            degenerate: true,
        };
    }
    // series times are 1..=n
    let span = (n - 1) as f64;
    let a_end = (1.0 + frac_a * span).ceil() as usize;
    let b_start = (n as f64 - frac_b * span).floor() as usize;
    let a = &x[..a_end];
    let b = &x[b_start - 1..];
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let diff = mean(a) - mean(b);
    let denom = (spectrum0(a) / a.len() as f64 + spectrum0(b) / b.len() as f64).sqrt();
    let z = if denom > 0.0 {
        diff / denom
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    GewekeResult {
        z,
        outcome: TestOutcome::from_bool(z.abs() < 1.96),
        degenerate: false,
    }
}

/// Modified Bessel function of the second kind, from its integral
/// representation by the trapezoid rule.
fn bessel_k(nu: f64, x: f64) -> f64 {
    let upper = (1.0 + 60.0 / x).acosh() + 2.0;
    let steps = 4000;
    let h = upper / steps as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut s = 0.5 * (f(0.0) + f(upper));
    for i in 1..steps {
        s += f(i as f64 * h);
    }
    s * h
}

/// Distribution function of the Cramer-von Mises statistic.
pub fn pcramer(q: f64) -> f64 {
    let log_eps = (1e-5f64).ln();
    let mut total = 0.0;
    for k in 0..4 {
        let kf = k as f64;
        let z = gamma(kf + 0.5) * (4.0 * kf + 1.0).sqrt()
            / (gamma(kf + 1.0) * std::f64::consts::PI.powf(1.5) * q.sqrt());
        let u = (4.0 * kf + 1.0).powi(2) / (16.0 * q);
        if u > -log_eps {
            continue;
        }
        total += z * (-u).exp() * bessel_k(0.25, u);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeidelbergerWelch {
    pub stationarity: TestOutcome,
    /// First retained index of the accepted segment.
    pub start: Option<usize>,
    /// Cramer-von Mises p-value of the accepted (or last tried) segment.
    pub p_value: f64,
    /// Relative half-width test on the accepted segment.
    pub halfwidth: TestOutcome,
    pub mean: f64,
    pub halfwidth_value: f64,
}

impl HeidelbergerWelch {
    fn inconclusive() -> Self {
        Self {
            stationarity: TestOutcome::Inconclusive,
            start: None,
            p_value: f64::NAN,
            halfwidth: TestOutcome::Inconclusive,
            mean: f64::NAN,
            halfwidth_value: f64::NAN,
        }
    }

    pub fn passed(&self) -> bool {
        self.stationarity.passed() && self.halfwidth.passed()
    }
}

/// Heidelberger-Welch stationarity test, discarding up to 40% of the
/// series in 10% steps, followed by the half-width test with accuracy `eps`.
pub fn heidelberger_welch(x: &[f64], alpha: f64, eps: f64) -> HeidelbergerWelch {
    let n_all = x.len();
    if n_all < MIN_LENGTH {
        return HeidelbergerWelch::inconclusive();
    }
    let nf = n_all as f64;
    let s0 = spectrum0(&x[(nf / 2.0).ceil() as usize - 1..]);
    if !(s0 > 0.0) {
        return HeidelbergerWelch::inconclusive();
    }

    let mut start = 0usize;
    let mut p_value = f64::NAN;
    let mut converged = false;
    let mut i = 0;
    loop {
        let t = 1.0 + i as f64 * nf / 10.0;
        if t > nf / 2.0 {
            break;
        }
        start = t.ceil() as usize - 1;
        let y = &x[start..];
        let n = y.len() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        let mut cum = 0.0;
        let mut stat = 0.0;
        for (j, &v) in y.iter().enumerate() {
            cum += v;
            let b = cum - ybar * (j + 1) as f64;
            stat += b * b / (n * s0);
        }
        stat /= n;
        let p = pcramer(stat);
        p_value = 1.0 - p;
        if p < 1.0 - alpha {
            converged = true;
            break;
        }
        i += 1;
    }
    if !converged {
        return HeidelbergerWelch {
            stationarity: TestOutcome::Fail,
            start: None,
            p_value,
            ..HeidelbergerWelch::inconclusive()
        };
    }
    let y = &x[start..];
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let hw = qnorm(1.0 - alpha / 2.0) * (spectrum0(y) / n).sqrt();
    let halfwidth = if hw.is_finite() && ybar != 0.0 {
        TestOutcome::from_bool((hw / ybar).abs() <= eps)
    } else {
        TestOutcome::Inconclusive
    };
    HeidelbergerWelch {
        stationarity: TestOutcome::Pass,
        start: Some(start),
        p_value,
        halfwidth,
        mean: ybar,
        halfwidth_value: hw,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RafteryLewis {
    /// Total length needed to estimate the quantile to the requested accuracy.
    pub required: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    /// Length needed under independence.
    pub nmin: u64,
    /// Ratio `required / nmin`.
    pub dependence: Option<f64>,
    pub outcome: TestOutcome,
}

/// Raftery-Lewis run-length estimate for the `q` quantile to within `r`
/// with probability `s`; passes when the series is at least that long.
pub fn raftery_lewis(x: &[f64], q: f64, r: f64, s: f64) -> RafteryLewis {
    let eps = 0.001;
    let phi = qnorm((s + 1.0) / 2.0);
    let nmin = (q * (1.0 - q) * phi * phi / (r * r)).ceil() as u64;
    let inconclusive = RafteryLewis {
        required: None,
        burn_in: None,
        thin: None,
        nmin,
        dependence: None,
        outcome: TestOutcome::Inconclusive,
    };
    let n = x.len();
    if n < MIN_LENGTH || (n as u64) < nmin {
        return inconclusive;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quant = quantile_sorted(&sorted, q);
    let dichot: Vec<usize> = x.iter().map(|&v| (v <= quant) as usize).collect();

    let mut kthin = 0usize;
    let test = loop {
        kthin += 1;
        let t: Vec<usize> = dichot.iter().copied().step_by(kthin).collect();
        let m = t.len();
        if m < 3 {
            return inconclusive;
        }
        let mut tab = [[[0.0f64; 2]; 2]; 2];
        for w in t.windows(3) {
            tab[w[0]][w[1]][w[2]] += 1.0;
        }
        let levels_present = (0..2).all(|l| t.contains(&l));
        if !levels_present {
            return inconclusive;
        }
        let mut g2 = 0.0;
        for i1 in 0..2 {
            for i2 in 0..2 {
                for i3 in 0..2 {
                    let c = tab[i1][i2][i3];
                    if c != 0.0 {
                        let row = tab[i1][i2][0] + tab[i1][i2][1];
                        let col = tab[0][i2][i3] + tab[1][i2][i3];
                        let mid = tab[0][i2][0] + tab[0][i2][1] + tab[1][i2][0] + tab[1][i2][1];
                        let fitted = row * col / mid;
                        g2 += 2.0 * c * (c / fitted).ln();
                    }
                }
            }
        }
        if g2 - 2.0 * ((m - 2) as f64).ln() < 0.0 {
            break t;
        }
    };

    let mut tr = [[0.0f64; 2]; 2];
    for w in test.windows(2) {
        tr[w[0]][w[1]] += 1.0;
    }
    let alpha = tr[0][1] / (tr[0][0] + tr[0][1]);
    let beta = tr[1][0] / (tr[1][0] + tr[1][1]);
    if !(alpha + beta > 0.0) {
        return inconclusive;
    }
    let k = kthin as f64;
    let temp_burn = (eps * (alpha + beta) / alpha.max(beta)).ln() / (1.0 - alpha - beta).abs().ln();
    let nburn = (temp_burn.ceil() * k).max(0.0) as u64;
    let temp_prec = (2.0 - alpha - beta) * alpha * beta * phi * phi / ((alpha + beta).powi(3) * r * r);
    let nkeep = (temp_prec * k).ceil() as u64;
    let required = nburn + nkeep;
    RafteryLewis {
        required: Some(required),
        burn_in: Some(nburn),
        thin: Some(kthin as u64),
        nmin,
        dependence: Some(required as f64 / nmin as f64),
        outcome: TestOutcome::from_bool(required <= n as u64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub geweke: GewekeResult,
    pub heidelberger_welch: HeidelbergerWelch,
    pub raftery_lewis: RafteryLewis,
    /// Tests passed, out of three.
    pub passed: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub params: Vec<ParamDiagnostics>,
    /// Number of parameters passing 0, 1, 2 and 3 tests.
    pub pass_histogram: [usize; 4],
}

pub fn diagnose_series(name: &str, x: &[f64]) -> ParamDiagnostics {
    let g = geweke(x, 0.1, 0.5);
    let hw = heidelberger_welch(x, 0.05, 0.1);
    let rl = raftery_lewis(x, 0.025, 0.005, 0.95);
    let passed = g.outcome.passed() as u8 + hw.passed() as u8 + rl.outcome.passed() as u8;
    ParamDiagnostics {
        name: name.to_string(),
        geweke: g,
        heidelberger_welch: hw,
        raftery_lewis: rl,
        passed,
    }
}

/// Runs all three tests on every free parameter of a chain.
pub fn diagnose_chain(chain: &Chain, priors: &PriorSpec) -> DiagnosticsReport {
    let params: Vec<ParamDiagnostics> = chain
        .params
        .par_iter()
        .zip(&chain.draws)
        .filter(|(d, _)| is_free(priors, d))
        .map(|(d, x)| diagnose_series(&d.name, x))
        .collect();
    let mut pass_histogram = [0; 4];
    for p in &params {
        pass_histogram[p.passed as usize] += 1;
    }
    DiagnosticsReport { params, pass_histogram }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize, mean: f64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| mean + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect()
    }

    #[test]
    fn pcramer_matches_reference() {
        // scipy.special.kv based values
        for (q, p) in [
            (0.05, 0.12371906895864906),
            (0.1, 0.4151265615931934),
            (0.2, 0.7325295694592229),
            (0.461, 0.9498928727982415),
            (1.0, 0.9975395478198642),
            (2.0, 0.999987217764476),
        ] {
            assert!((pcramer(q) - p).abs() < 1e-9, "{q}: {} vs {p}", pcramer(q));
        }
    }

    #[test]
    fn bessel_reference() {
        for (x, k) in [(0.01, 6.165741264139234), (0.5, 0.9603163249318826), (2.0, 0.11537827684084918)] {
            assert!((bessel_k(0.25, x) / k - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn geweke_drift_and_constant() {
        let n = 2000;
        let drift: Vec<f64> = normals(1, n, 0.0)
            .iter()
            .enumerate()
            .map(|(i, e)| 5.0 * i as f64 / n as f64 + 0.1 * e)
            .collect();
        assert_eq!(geweke(&drift, 0.1, 0.5).outcome, TestOutcome::Fail);
        let c = geweke(&[3.0; 500], 0.1, 0.5);
        assert!(c.degenerate && c.z == 0.0 && c.outcome.passed());
        assert_eq!(geweke(&[1.0; 50], 0.1, 0.5).outcome, TestOutcome::Inconclusive);
    }

    #[test]
    fn iid_series_pass_hw_and_rl() {
        let x = normals(9, 5000, 1.0);
        let hw = heidelberger_welch(&x, 0.05, 0.1);
        assert!(hw.passed(), "{hw:?}");
        let rl = raftery_lewis(&x, 0.025, 0.005, 0.95);
        assert_eq!(rl.nmin, 3746);
        assert!(rl.outcome.passed(), "{rl:?}");
    }

    #[test]
    fn ar1_fails_rl() {
        let e = normals(5, 5000, 0.0);
        let mut x = vec![0.0; e.len()];
        for t in 1..x.len() {
            x[t] = 0.99 * x[t - 1] + e[t];
        }
        let rl = raftery_lewis(&x, 0.025, 0.005, 0.95);
        assert_eq!(rl.outcome, TestOutcome::Fail);
        assert!(rl.required.unwrap() > 5000);
    }

    #[test]
    fn constant_inconclusive() {
        let x = [0.5; 5000];
        assert_eq!(heidelberger_welch(&x, 0.05, 0.1).stationarity, TestOutcome::Inconclusive);
        assert_eq!(raftery_lewis(&x, 0.025, 0.005, 0.95).outcome, TestOutcome::Inconclusive);
        assert_eq!(raftery_lewis(&x[..200], 0.025, 0.005, 0.95).outcome, TestOutcome::Inconclusive);
    }
}
