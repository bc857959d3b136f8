//! Cross-seed summaries with percentile-bootstrap bands.

use etdlab_core::rng::StreamRng;
use serde::Serialize;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const BOOTSTRAP_SEED: u64 = 0xE7D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// 2.5% and 97.5% percentiles of the bootstrapped mean.
    pub boot_lo: f64,
    pub boot_hi: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Summary of finite values; `None` when there are none. The input is sorted
/// first, so the result does not depend on the order of `values`.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let (boot_lo, boot_hi) = bootstrap_mean_band(&v);
    Some(Summary {
        mean,
        median: quantile_sorted(&v, 0.5),
        q25: quantile_sorted(&v, 0.25),
        q75: quantile_sorted(&v, 0.75),
        boot_lo,
        boot_hi,
    })
}

/// 95% percentile-bootstrap band for the mean of `sorted`.
pub fn bootstrap_mean_band(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    let mut rng = StreamRng::from_seed(BOOTSTRAP_SEED);
    let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| sorted[rng.below(n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (quantile_sorted(&means, 0.025), quantile_sorted(&means, 0.975))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn identical_values_give_zero_width() {
        let s = summarize(&[0.25; 12]).unwrap();
        assert_eq!((s.mean, s.median, s.q25, s.q75, s.boot_lo, s.boot_hi), (0.25, 0.25, 0.25, 0.25, 0.25, 0.25));
    }

    #[test]
    fn order_does_not_matter() {
        let a = [0.3, 1.7, 0.2, 5.0, 2.2, 0.9, 1.1];
        let mut b = a;
        b.reverse();
        assert_eq!(summarize(&a), summarize(&b));
        assert!(summarize(&[f64::NAN]).is_none());
    }

    #[test]
    fn band_brackets_mean() {
        let v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = summarize(&v).unwrap();
        assert!(s.boot_lo < s.mean && s.mean < s.boot_hi);
    }
}
