//! Nine statistics per channel, assembled into the fixed-order
//! 45-dimensional feature vector the classifier and autoencoder consume.
//!
//! All moments are population moments (divide by the series length), the
//! mode of a continuous series is the center of the fullest of 10
//! equal-width bins, and percentiles interpolate linearly at rank
//! `(p/100)(L-1)`. Constant series return 0 for skewness and kurtosis.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract_err, shape_err, Result};
use crate::fmath;
use crate::numerics::Matrix;
use crate::preprocess::CHANNELS;

/// Statistics computed per channel, in feature-vector order.
pub const FEATURE_NAMES: [&str; 9] = [
    "mean", "median", "mode", "std", "skewness", "kurtosis", "p25", "p75", "iqr",
];
/// Features per channel.
pub const FEATURES_PER_CHANNEL: usize = FEATURE_NAMES.len();
/// Total feature-vector length (signal-major: channel 0 first).
pub const FEATURE_COUNT: usize = CHANNELS * FEATURES_PER_CHANNEL;
/// Bins used by the histogram mode.
pub const MODE_BINS: usize = 10;

/// The 45 statistics of one trip, signal-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<FeatureVector> {
        if values.len() != FEATURE_COUNT {
            return Err(shape_err!(
                "feature vector needs {FEATURE_COUNT} entries, got {}",
                values.len()
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(contract_err!("feature vector has non-finite entries"));
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry for (channel, statistic index per [`FEATURE_NAMES`]).
    pub fn get(&self, channel: usize, feature: usize) -> f64 {
        self.values[channel * FEATURES_PER_CHANNEL + feature]
    }

    /// Column names for the flat layout: `long_acc_mean`, ...
    pub fn column_names() -> Vec<alloc::string::String> {
        let mut names = Vec::with_capacity(FEATURE_COUNT);
        for channel in crate::preprocess::CHANNEL_NAMES.iter() {
            for feature in FEATURE_NAMES.iter() {
                names.push(alloc::format!("{channel}_{feature}"));
            }
        }
        names
    }
}

fn require_nonempty(series: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(contract_err!("statistic of an empty series"));
    }
    Ok(())
}

/// Population mean and standard deviation (divide by L).
pub fn mean_std(series: &[f64]) -> Result<(f64, f64)> {
    require_nonempty(series)?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, fmath::sqrt(var)))
}

/// Center of the most populated of 10 equal-width bins over `[min, max]`;
/// ties break to the lowest bin, a constant series returns its value.
pub fn mode(series: &[f64]) -> Result<f64> {
    require_nonempty(series)?;
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(min);
    }
    let width = (max - min) / MODE_BINS as f64;
    let mut counts = [0usize; MODE_BINS];
    for v in series {
        let idx = (((v - min) / width) as usize).min(MODE_BINS - 1);
        counts[idx] += 1;
    }
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    Ok(min + (best as f64 + 0.5) * width)
}

fn central_moment(series: &[f64], mean: f64, order: u32) -> f64 {
    let n = series.len() as f64;
    series
        .iter()
        .map(|v| {
            let d = v - mean;
            match order {
                3 => d * d * d,
                _ => d * d * d * d,
            }
        })
        .sum::<f64>()
        / n
}

/// Third standardized population moment; 0 for a constant series.
pub fn skewness(series: &[f64]) -> Result<f64> {
    require_nonempty(series)?;
    let (mean, sigma) = mean_std(series)?;
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let m3 = central_moment(series, mean, 3);
    Ok(m3 / (sigma * sigma * sigma))
}

/// Fourth standardized population moment, no excess correction; 0 for a
/// constant series.
pub fn kurtosis(series: &[f64]) -> Result<f64> {
    require_nonempty(series)?;
    let (mean, sigma) = mean_std(series)?;
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let m4 = central_moment(series, mean, 4);
    let var = sigma * sigma;
    Ok(m4 / (var * var))
}

/// Linear-interpolation percentile at rank `(p/100)(L-1)`.
pub fn percentile(series: &[f64], p: f64) -> Result<f64> {
    require_nonempty(series)?;
    if !(0.0..=100.0).contains(&p) {
        return Err(contract_err!("percentile {p} outside [0, 100]"));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = fmath::floor(rank) as usize;
    let hi = fmath::ceil(rank) as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

/// Median, i.e. the 50th percentile.
pub fn median(series: &[f64]) -> Result<f64> {
    percentile(series, 50.0)
}

/// Interquartile range `p75 - p25`.
pub fn iqr(series: &[f64]) -> Result<f64> {
    Ok(percentile(series, 75.0)? - percentile(series, 25.0)?)
}

/// The full statistics block of one trip, signal-major, channel order as
/// recorded and statistic order per [`FEATURE_NAMES`].
pub fn extract_features(values: &Matrix) -> Result<FeatureVector> {
    if values.cols() != CHANNELS {
        return Err(shape_err!(
            "extract_features: trip has {} channels, expected {CHANNELS}",
            values.cols()
        ));
    }
    if values.rows() == 0 {
        return Err(contract_err!("extract_features: empty trip"));
    }
    let mut out = Vec::with_capacity(FEATURE_COUNT);
    let mut series = Vec::with_capacity(values.rows());
    for c in 0..CHANNELS {
        series.clear();
        series.extend((0..values.rows()).map(|r| values.get(r, c)));
        let (mean, std) = mean_std(&series)?;
        out.push(mean);
        out.push(median(&series)?);
        out.push(mode(&series)?);
        out.push(std);
        out.push(skewness(&series)?);
        out.push(kurtosis(&series)?);
        out.push(percentile(&series, 25.0)?);
        out.push(percentile(&series, 75.0)?);
        out.push(iqr(&series)?);
    }
    FeatureVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, stream_rng};
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mean_std_cases() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert!(close(m, 2.0, 1e-15));
        assert!(close(s, fmath::sqrt(2.0 / 3.0), 1e-15));
        let (_, s0) = mean_std(&[4.0; 10]).unwrap();
        assert_eq!(s0, 0.0);
        let (m1, s1) = mean_std(&[-1.0, 1.0]).unwrap();
        assert_eq!(m1, 0.0);
        assert_eq!(s1, 1.0);
        assert!(mean_std(&[]).is_err());
    }

    #[test]
    fn mode_cases() {
        assert_eq!(mode(&[3.5; 8]).unwrap(), 3.5);
        // (1, 1, 2): bins over [1, 2], width 0.1, bin 0 holds the two 1s
        assert!(close(mode(&[1.0, 1.0, 2.0]).unwrap(), 1.05, 1e-12));
        // one value per bin: tie breaks to the lowest bin center
        let grid: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(close(mode(&grid).unwrap(), 0.45, 1e-12));
    }

    #[test]
    fn skewness_cases() {
        assert!(close(skewness(&[1.0, 2.0, 3.0]).unwrap(), 0.0, 1e-15));
        let s = skewness(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert!(close(s, 2.0 / fmath::sqrt(3.0), 1e-15), "{s}");
        assert_eq!(skewness(&[7.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn kurtosis_cases() {
        assert_eq!(kurtosis(&[-1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(kurtosis(&[7.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn kurtosis_of_normal_samples_near_three() {
        let mut rng = stream_rng(99, 0);
        let series: Vec<f64> = (0..100_000).map(|_| standard_normal(&mut rng)).collect();
        let k = kurtosis(&series).unwrap();
        assert!((2.9..3.1).contains(&k), "kurtosis {k}");
    }

    #[test]
    fn percentile_cases() {
        let s = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(percentile(&s, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&s, 100.0).unwrap(), 4.0);
        assert!(close(percentile(&s, 50.0).unwrap(), 2.5, 1e-15));
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(close(percentile(&t, 25.0).unwrap(), 0.75, 1e-15));
        assert!(percentile(&s, -1.0).is_err());
        assert!(percentile(&s, 101.0).is_err());
    }

    #[test]
    fn iqr_cases() {
        assert_eq!(iqr(&[5.0; 4]).unwrap(), 0.0);
        assert!(close(iqr(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 1.5, 1e-15));
        let mut rng = stream_rng(4, 0);
        for _ in 0..50 {
            let series: Vec<f64> = (0..17).map(|_| standard_normal(&mut rng)).collect();
            assert!(iqr(&series).unwrap() >= 0.0);
        }
    }

    #[test]
    fn extract_constant_trip() {
        let c = 2.5;
        let mut m = Matrix::zeros(60, CHANNELS);
        for v in m.data_mut() {
            *v = c;
        }
        let f = extract_features(&m).unwrap();
        assert_eq!(f.values().len(), FEATURE_COUNT);
        for channel in 0..CHANNELS {
            let per = &f.values()[channel * 9..(channel + 1) * 9];
            assert_eq!(per, &[c, c, c, 0.0, 0.0, 0.0, c, c, 0.0]);
        }
    }

    #[test]
    fn extract_internal_consistency() {
        let mut rng = stream_rng(17, 0);
        let mut m = Matrix::zeros(60, CHANNELS);
        for v in m.data_mut() {
            *v = standard_normal(&mut rng);
        }
        let f = extract_features(&m).unwrap();
        for channel in 0..CHANNELS {
            let p25 = f.get(channel, 6);
            let p75 = f.get(channel, 7);
            let iqr = f.get(channel, 8);
            let med = f.get(channel, 1);
            assert!(close(iqr, p75 - p25, 1e-15));
            assert!(p25 <= med && med <= p75);
        }
    }

    #[test]
    fn shift_equivariance() {
        let mut rng = stream_rng(23, 0);
        let series: Vec<f64> = (0..60).map(|_| standard_normal(&mut rng)).collect();
        let shift = 3.7;
        let shifted: Vec<f64> = series.iter().map(|v| v + shift).collect();
        let (m0, s0) = mean_std(&series).unwrap();
        let (m1, s1) = mean_std(&shifted).unwrap();
        assert!(close(m1, m0 + shift, 1e-12));
        assert!(close(s1, s0, 1e-12));
        assert!(close(
            median(&shifted).unwrap(),
            median(&series).unwrap() + shift,
            1e-12
        ));
        assert!(close(
            mode(&shifted).unwrap(),
            mode(&series).unwrap() + shift,
            1e-12
        ));
        assert!(close(
            percentile(&shifted, 25.0).unwrap(),
            percentile(&series, 25.0).unwrap() + shift,
            1e-12
        ));
        assert!(close(
            skewness(&shifted).unwrap(),
            skewness(&series).unwrap(),
            1e-9
        ));
        assert!(close(
            kurtosis(&shifted).unwrap(),
            kurtosis(&series).unwrap(),
            1e-9
        ));
        assert!(close(iqr(&shifted).unwrap(), iqr(&series).unwrap(), 1e-12));
    }

    #[test]
    fn column_names_shape() {
        let names = FeatureVector::column_names();
        assert_eq!(names.len(), FEATURE_COUNT);
        assert_eq!(names[0], "long_acc_mean");
        assert_eq!(names[44], "roll_iqr");
    }
}
