//! Log-domain helpers: log-sum-exp accumulation and Poisson weights with
//! rigorous upper bounds on their tails.

use statrs::function::gamma::ln_gamma;

/// `ln(e^a + e^b)` without overflow or underflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln P[N = k]` for `N ~ Poisson(rate)`.
pub fn poisson_log_pmf(rate: f64, k: usize) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let k = k as f64;
    -rate + k * rate.ln() - ln_gamma(k + 1.0)
}

/// Log of an upper bound on `Σ_{j>k} P[N = j]·j^power` for `N ~ Poisson(rate)`.
///
/// Beyond the mode the terms decay at least geometrically with ratio
/// `rate/(k+2)·((k+2)/(k+1))^power`, which yields a closed-form bound. Below
/// that point the bound falls back to the full moment `E[N^power]`.
pub fn poisson_log_tail_bound(rate: f64, k: usize, power: u32) -> f64 {
    assert!(power <= 2, "only moments up to order two are supported");
    if rate == 0.0 {
        return f64::NEG_INFINITY;
    }
    let k1 = k as f64 + 1.0;
    let k2 = k as f64 + 2.0;
    let ratio = rate / k2 * (k2 / k1).powi(power as i32);
    if ratio < 1.0 {
        poisson_log_pmf(rate, k + 1) + power as f64 * k1.ln() - (1.0 - ratio).ln()
    } else {
        match power {
            0 => 0.0,
            1 => rate.ln(),
            _ => (rate + rate * rate).ln(),
        }
    }
}

/// Smallest `k` whose Poisson tail bound beyond `k` is at most `e^{log_target}`.
pub fn poisson_cutoff(rate: f64, log_target: f64) -> usize {
    if rate == 0.0 {
        return 0;
    }
    // Start from the mean: below it the bound is the trivial one.
    let mut k = rate.floor() as usize;
    while poisson_log_tail_bound(rate, k, 0) > log_target {
        k += 1;
    }
    // Walk back down in case the bound is already tight before the mean.
    while k > 0 && poisson_log_tail_bound(rate, k - 1, 0) <= log_target {
        k -= 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tail(rate: f64, k: usize, power: u32) -> f64 {
        (k + 1..k + 4000)
            .map(|j| poisson_log_pmf(rate, j).exp() * (j as f64).powi(power as i32))
            .sum()
    }

    #[test]
    fn log_add_exp_handles_infinities() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.5), 1.5);
        assert_eq!(log_add_exp(-2.0, f64::NEG_INFINITY), -2.0);
        let v = log_add_exp(-1000.0, -1000.0);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        let s: f64 = (0..200).map(|k| poisson_log_pmf(7.5, k).exp()).sum();
        assert!((s - 1.0).abs() < 1e-13);
        assert_eq!(poisson_log_pmf(0.0, 0), 0.0);
    }

    #[test]
    fn tail_bound_dominates_exact_tail() {
        for &rate in &[0.2, 1.0, 2.0, 17.0, 300.0] {
            for k in [0usize, 1, 3, 10, 40, 400] {
                for power in 0..=2 {
                    let bound = poisson_log_tail_bound(rate, k, power).exp();
                    let exact = brute_tail(rate, k, power);
                    assert!(
                        bound >= exact * (1.0 - 1e-12),
                        "rate {rate} k {k} p {power}: {bound} < {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn cutoff_is_minimal() {
        let rate = 40.0;
        let target = (1e-10f64).ln();
        let k = poisson_cutoff(rate, target);
        assert!(poisson_log_tail_bound(rate, k, 0) <= target);
        assert!(poisson_log_tail_bound(rate, k - 1, 0) > target);
    }
}
