/// Spectral density at frequency zero from an autoregressive fit.
///
/// The AR order is chosen by AIC among Yule-Walker fits up to
/// `min(n - 1, floor(10 log10 n))`. Returns 0 for a constant series and
/// NaN for fewer than two values.
pub fn spectrum0(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let max_order = ((10.0 * nf.log10()).floor() as usize).min(n - 1);

    let acov: Vec<f64> = (0..=max_order)
        .map(|lag| {
            let mut s = 0.0;
            for t in lag..n {
                s += (x[t] - mean) * (x[t - lag] - mean);
            }
            s / nf
        })
        .collect();
    if !(acov[0] > 0.0) {
        return 0.0;
    }

    // Levinson-Durbin recursion, keeping every order's coefficients
    let mut best_order = 0;
    let mut best_aic = nf * acov[0].ln();
    let mut best_phi: Vec<f64> = Vec::new();
    let mut best_var = acov[0];
    let mut phi: Vec<f64> = Vec::new();
    let mut var = acov[0];
    for k in 1..=max_order {
        let mut num = acov[k];
        for (j, p) in phi.iter().enumerate() {
            num -= p * acov[k - 1 - j];
        }
        let refl = num / var;
        let mut next = vec![0.0; k];
        for j in 0..k - 1 {
            next[j] = phi[j] - refl * phi[k - 2 - j];
        }
        next[k - 1] = refl;
        phi = next;
        var *= 1.0 - refl * refl;
        if !(var > 0.0) {
            break;
        }
        let aic = nf * var.ln() + 2.0 * k as f64;
        if aic < best_aic {
            best_aic = aic;
            best_order = k;
            best_phi = phi.clone();
            best_var = var;
        }
    }

    let var_pred = best_var * nf / (nf - (best_order as f64 + 1.0));
    let s: f64 = best_phi.iter().sum();
    var_pred / (1.0 - s).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_zero() {
        assert_eq!(spectrum0(&[2.0; 50]), 0.0);
    }

    #[test]
    fn white_noise_near_variance() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..20000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = spectrum0(&x);
        assert!((s - 1.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn ar1_spectrum() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut x = vec![0.0; 50000];
        for t in 1..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = 0.5 * x[t - 1] + e;
        }
        // 1 / (1 - 0.5)^2
        let s = spectrum0(&x);
        assert!((s - 4.0).abs() < 0.4, "{s}");
    }
}
