//! Raw-signal conditioning: 1000 Hz -> 1 Hz downsampling, trailing
//! moving-average filtering, one-minute truncation, and MinMax scaling.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract_err, shape_err, Result};
use crate::label::DrivingClass;
use crate::numerics::Matrix;

/// Number of signal channels in a trip.
pub const CHANNELS: usize = 5;
/// Column names, in recording order.
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["long_acc", "lat_acc", "pitch", "yaw", "roll"];
/// Samples per second in raw recordings.
pub const RAW_RATE: usize = 1000;
/// Rows in a processed trip (one minute at 1 Hz).
pub const TRIP_LEN: usize = 60;
/// Moving-average window, in samples at 1 Hz.
pub const MA_WINDOW: usize = 10;

/// A trip as recorded: `T x 5` samples at 1000 Hz.
///
/// `label` is the class visible to training (None for the unlabeled pool);
/// `truth` is the held-back ground truth used only when scoring test AUROC.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrip {
    pub id: u32,
    pub samples: Matrix,
    pub label: Option<DrivingClass>,
    pub truth: Option<DrivingClass>,
}

/// A conditioned trip: `60 x 5` values at 1 Hz, scaled to `[0, 1]` once a
/// scaler has been applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: u32,
    pub values: Matrix,
    pub label: Option<DrivingClass>,
    pub truth: Option<DrivingClass>,
}

/// Per-channel extrema fitted on training data. Constant channels are
/// flagged degenerate and never divided by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl ScalerParams {
    pub fn channels(&self) -> usize {
        self.min.len()
    }
}

/// Keeps every 1000th row starting at index 0, so a 60 s recording becomes
/// exactly 60 rows. Longer recordings keep their extra sampled rows for
/// [`truncate`] to cut.
pub fn downsample(raw: &RawTrip) -> Result<Matrix> {
    let rows = raw.samples.rows();
    if rows < TRIP_LEN * RAW_RATE {
        return Err(contract_err!(
            "trip {} has {rows} samples, need at least {}",
            raw.id,
            TRIP_LEN * RAW_RATE
        ));
    }
    let kept: Vec<usize> = (0..rows).step_by(RAW_RATE).collect();
    let mut out = Matrix::zeros(kept.len(), raw.samples.cols());
    for (r, &src) in kept.iter().enumerate() {
        out.row_mut(r).copy_from_slice(raw.samples.row(src));
    }
    Ok(out)
}

/// Trailing moving average with warm-up: `y_t` is the mean of the last
/// `min(t+1, w)` samples, so the output has the input's length and never
/// reads future samples.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for t in 0..series.len() {
        acc += series[t];
        if t >= window {
            acc -= series[t - window];
        }
        let n = (t + 1).min(window);
        out.push(acc / n as f64);
    }
    out
}

fn moving_average_columns(values: &Matrix, window: usize) -> Matrix {
    let mut out = Matrix::zeros(values.rows(), values.cols());
    let mut column = Vec::with_capacity(values.rows());
    for c in 0..values.cols() {
        column.clear();
        column.extend((0..values.rows()).map(|r| values.get(r, c)));
        for (r, v) in moving_average(&column, window).into_iter().enumerate() {
            out.set(r, c, v);
        }
    }
    out
}

/// First `n` rows, order preserved.
pub fn truncate(values: &Matrix, n: usize) -> Result<Matrix> {
    if values.rows() < n {
        return Err(contract_err!(
            "cannot truncate {} rows to {n}",
            values.rows()
        ));
    }
    let mut out = Matrix::zeros(n, values.cols());
    for r in 0..n {
        out.row_mut(r).copy_from_slice(values.row(r));
    }
    Ok(out)
}

/// Per-channel min/max over all trips and time steps of the fit set.
pub fn fit_minmax(trips: &[&Matrix]) -> Result<ScalerParams> {
    let first = trips
        .first()
        .ok_or_else(|| contract_err!("fit_minmax: empty training set"))?;
    let channels = first.cols();
    let mut min = alloc::vec![f64::INFINITY; channels];
    let mut max = alloc::vec![f64::NEG_INFINITY; channels];
    for trip in trips {
        if trip.cols() != channels {
            return Err(shape_err!(
                "fit_minmax: trip has {} channels, expected {channels}",
                trip.cols()
            ));
        }
        for r in 0..trip.rows() {
            for (c, v) in trip.row(r).iter().enumerate() {
                min[c] = min[c].min(*v);
                max[c] = max[c].max(*v);
            }
        }
    }
    let degenerate = min.iter().zip(&max).map(|(a, b)| a == b).collect();
    Ok(ScalerParams {
        min,
        max,
        degenerate,
    })
}

/// `(x - min) / (max - min)` per channel. Values outside the training
/// envelope land outside `[0, 1]` on purpose; degenerate channels map to 0.
pub fn apply_minmax(scaler: &ScalerParams, values: &Matrix) -> Result<Matrix> {
    if values.cols() != scaler.channels() {
        return Err(shape_err!(
            "apply_minmax: {} channels vs scaler's {}",
            values.cols(),
            scaler.channels()
        ));
    }
    let mut out = values.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            if scaler.degenerate[c] {
                *v = 0.0;
            } else {
                *v = (*v - scaler.min[c]) / (scaler.max[c] - scaler.min[c]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`apply_minmax`] on non-degenerate channels; degenerate
/// channels restore their constant.
pub fn invert_minmax(scaler: &ScalerParams, values: &Matrix) -> Result<Matrix> {
    if values.cols() != scaler.channels() {
        return Err(shape_err!(
            "invert_minmax: {} channels vs scaler's {}",
            values.cols(),
            scaler.channels()
        ));
    }
    let mut out = values.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            if scaler.degenerate[c] {
                *v = scaler.min[c];
            } else {
                *v = *v * (scaler.max[c] - scaler.min[c]) + scaler.min[c];
            }
        }
    }
    Ok(out)
}

/// Which trips the scaler is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitSubset {
    /// Every trip in the dataset.
    All,
    /// Only trips with a visible label.
    Labeled,
}

/// Full conditioning chain: downsample, filter each channel, truncate to one
/// minute, fit the scaler on the designated subset, scale everything.
pub fn preprocess_pipeline(
    raws: &[RawTrip],
    fit: FitSubset,
) -> Result<(Vec<Trip>, ScalerParams)> {
    let mut conditioned: Vec<(usize, Matrix)> = Vec::with_capacity(raws.len());
    for (idx, raw) in raws.iter().enumerate() {
        let down = downsample(raw)?;
        let filtered = moving_average_columns(&down, MA_WINDOW);
        let cut = truncate(&filtered, TRIP_LEN)?;
        conditioned.push((idx, cut));
    }
    let fit_values: Vec<&Matrix> = conditioned
        .iter()
        .filter(|(idx, _)| match fit {
            FitSubset::All => true,
            FitSubset::Labeled => raws[*idx].label.is_some(),
        })
        .map(|(_, m)| m)
        .collect();
    if fit_values.is_empty() {
        return Err(contract_err!("preprocess: scaler fit subset is empty"));
    }
    let scaler = fit_minmax(&fit_values)?;
    let mut trips = Vec::with_capacity(raws.len());
    for (idx, values) in conditioned {
        let raw = &raws[idx];
        trips.push(Trip {
            id: raw.id,
            values: apply_minmax(&scaler, &values)?,
            label: raw.label,
            truth: raw.truth,
        });
    }
    Ok((trips, scaler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn raw_with(samples: Matrix) -> RawTrip {
        RawTrip {
            id: 7,
            samples,
            label: None,
            truth: None,
        }
    }

    fn ramp_raw(rows: usize) -> RawTrip {
        let mut m = Matrix::zeros(rows, CHANNELS);
        for r in 0..rows {
            for c in 0..CHANNELS {
                m.set(r, c, r as f64);
            }
        }
        raw_with(m)
    }

    #[test]
    fn downsample_sixty_thousand_rows() {
        let out = downsample(&ramp_raw(60_000)).unwrap();
        assert_eq!(out.rows(), 60);
        assert_eq!(out.cols(), CHANNELS);
    }

    #[test]
    fn downsample_constant_stays_constant() {
        let mut m = Matrix::zeros(60_000, CHANNELS);
        for v in m.data_mut() {
            *v = 3.25;
        }
        let out = downsample(&raw_with(m)).unwrap();
        assert!(out.data().iter().all(|v| *v == 3.25));
    }

    #[test]
    fn downsample_ramp_picks_every_thousandth() {
        let out = downsample(&ramp_raw(60_000)).unwrap();
        for r in 0..60 {
            assert_eq!(out.get(r, 0), (r * 1000) as f64);
        }
    }

    #[test]
    fn downsample_short_trip_names_the_trip() {
        let err = downsample(&ramp_raw(59_999)).unwrap_err();
        assert!(alloc::format!("{err}").contains("trip 7"));
    }

    #[test]
    fn moving_average_constant() {
        let out = moving_average(&[2.5; 60], MA_WINDOW);
        assert!(out.iter().all(|v| (*v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn moving_average_window_two() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 2), vec![1.0, 1.5, 2.5]);
    }

    #[test]
    fn moving_average_impulse_response() {
        let mut series = [0.0; 60];
        series[0] = 1.0;
        let out = moving_average(&series, MA_WINDOW);
        for (t, v) in out.iter().enumerate() {
            let expect = if t < MA_WINDOW {
                1.0 / (t as f64 + 1.0)
            } else {
                0.0
            };
            assert!((v - expect).abs() < 1e-15, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn moving_average_matches_convolution_oracle() {
        // brute-force window mean, written from the definition
        let series: Vec<f64> = (0..60).map(|t| ((t * 37) % 11) as f64 - 5.0).collect();
        let got = moving_average(&series, MA_WINDOW);
        for t in 0..series.len() {
            let lo = t.saturating_sub(MA_WINDOW - 1);
            let win = &series[lo..=t];
            let expect = win.iter().sum::<f64>() / win.len() as f64;
            assert!((got[t] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_average_is_linear() {
        let x: Vec<f64> = (0..60).map(|t| crate::fmath::sin(t as f64 * 0.37)).collect();
        let y: Vec<f64> = (0..60).map(|t| crate::fmath::cos(t as f64 * 1.1)).collect();
        let (a, b) = (2.5, -0.75);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let lhs = moving_average(&combo, MA_WINDOW);
        let mx = moving_average(&x, MA_WINDOW);
        let my = moving_average(&y, MA_WINDOW);
        for t in 0..60 {
            assert!((lhs[t] - (a * mx[t] + b * my[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn truncate_cases() {
        let m = Matrix::from_rows(&(0..120).map(|r| vec![r as f64; 2]).collect::<Vec<_>>()).unwrap();
        let same = truncate(&m, 120).unwrap();
        assert_eq!(same, m);
        let cut = truncate(&m, 60).unwrap();
        assert_eq!(cut.rows(), 60);
        for r in 0..60 {
            assert_eq!(cut.row(r), m.row(r));
        }
        assert!(truncate(&cut, 61).is_err());
    }

    #[test]
    fn fit_minmax_single_and_joint() {
        let a = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![10.0]]).unwrap();
        let s = fit_minmax(&[&a]).unwrap();
        assert_eq!(s.min, vec![0.0]);
        assert_eq!(s.max, vec![10.0]);
        assert!(!s.degenerate[0]);

        let b = Matrix::from_rows(&[vec![-3.0], vec![2.0]]).unwrap();
        let joint = fit_minmax(&[&a, &b]).unwrap();
        assert_eq!(joint.min, vec![-3.0]);
        assert_eq!(joint.max, vec![10.0]);
    }

    #[test]
    fn fit_minmax_degenerate_and_empty() {
        let flat = Matrix::from_rows(&[vec![4.0], vec![4.0]]).unwrap();
        let s = fit_minmax(&[&flat]).unwrap();
        assert!(s.degenerate[0]);
        assert!(fit_minmax(&[]).is_err());
    }

    #[test]
    fn apply_and_invert_minmax() {
        let m = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![10.0]]).unwrap();
        let s = fit_minmax(&[&m]).unwrap();
        let scaled = apply_minmax(&s, &m).unwrap();
        assert_eq!(scaled.data(), &[0.0, 0.5, 1.0]);
        let back = invert_minmax(&s, &scaled).unwrap();
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // out-of-range test value is not clipped
        let test = Matrix::from_rows(&[vec![12.0]]).unwrap();
        let scaled = apply_minmax(&s, &test).unwrap();
        assert!((scaled.get(0, 0) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_channel_maps_to_zero() {
        let flat = Matrix::from_rows(&[vec![4.0], vec![4.0]]).unwrap();
        let s = fit_minmax(&[&flat]).unwrap();
        let scaled = apply_minmax(&s, &flat).unwrap();
        assert_eq!(scaled.data(), &[0.0, 0.0]);
        let back = invert_minmax(&s, &scaled).unwrap();
        assert_eq!(back.data(), &[4.0, 4.0]);
    }

    #[test]
    fn pipeline_shapes_scaling_and_determinism() {
        let mut raws = Vec::new();
        for id in 0..3u32 {
            let mut m = Matrix::zeros(61_000, CHANNELS);
            for r in 0..m.rows() {
                for c in 0..CHANNELS {
                    let phase = (id as f64 + 1.0) * 0.001 * r as f64 + c as f64;
                    m.set(r, c, crate::fmath::sin(phase) * (c as f64 + 1.0));
                }
            }
            raws.push(RawTrip {
                id,
                samples: m,
                label: if id == 0 {
                    Some(DrivingClass::Normal)
                } else {
                    None
                },
                truth: None,
            });
        }
        let (trips, scaler) = preprocess_pipeline(&raws, FitSubset::All).unwrap();
        assert_eq!(trips.len(), 3);
        for trip in &trips {
            assert_eq!(trip.values.rows(), TRIP_LEN);
            assert_eq!(trip.values.cols(), CHANNELS);
            for v in trip.values.data() {
                assert!((0.0..=1.0).contains(v), "value {v} outside [0,1]");
            }
        }
        assert_eq!(scaler.channels(), CHANNELS);
        // deterministic
        let (trips2, scaler2) = preprocess_pipeline(&raws, FitSubset::All).unwrap();
        assert_eq!(trips, trips2);
        assert_eq!(scaler, scaler2);
        // running the pipeline on already-processed data is rejected up front
        let reprocessed = RawTrip {
            id: 9,
            samples: trips[0].values.clone(),
            label: None,
            truth: None,
        };
        assert!(preprocess_pipeline(&[reprocessed], FitSubset::All).is_err());
    }
}
