use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::TrajectoryRecord;
use crate::{Error, Result};

/// Minimum number of secular periods a trajectory must span.
const MIN_PERIODS: f64 = 20.0;
/// Zero-padding factor applied before the transform.
const PAD: usize = 8;
/// Peaks closer than this many natural bins to zero frequency are ignored.
const LOW_BINS: f64 = 3.0;

/// Dominant secular angular frequency (rad per `τ`) along `axis`
/// (0 = x, 1 = y, 2 = z).
///
/// The search band is `(0, Ω/2)`, i.e. below 1 rad/τ, which excludes the
/// drive at 2 rad/τ and its secular sidebands `2 ± ω`.
pub fn measure_secular_frequency(traj: &TrajectoryRecord, axis: usize) -> Result<f64> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis index {axis} out of range")));
    }
    let dt = traj.sample_interval;
    if !(dt > 0.0 && dt <= PI / 8.0) {
        return Err(Error::InsufficientData(format!("sample interval {dt} too coarse for the drive")));
    }
    // use the regularly spaced prefix only
    let t0 = traj.samples.first().map_or(0.0, |s| s.time);
    let regular = traj
        .samples
        .iter()
        .enumerate()
        .take_while(|(i, s)| (s.time - t0 - *i as f64 * dt).abs() <= 1e-6 * dt.max(1.0))
        .count();
    if regular < 64 {
        return Err(Error::InsufficientData(format!("{regular} regularly spaced samples")));
    }
    let n = regular;
    let xs: Vec<f64> = traj.samples[..n].iter().map(|s| s.position[axis]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;

    let len = (n * PAD).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (i, x) in xs.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex64::new((x - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let bin_omega = 2.0 * PI / (len as f64 * dt);
    let natural = 2.0 * PI / (n as f64 * dt);
    let lo = ((LOW_BINS * natural / bin_omega).ceil() as usize).max(1);
    let hi = ((1.0 / bin_omega).floor() as usize).min(len / 2 - 1);
    if lo + 2 > hi {
        return Err(Error::InsufficientData("trajectory too short to resolve the secular band".into()));
    }
    let mag: Vec<f64> = buf[..=hi + 1].iter().map(|c| c.norm()).collect();
    let (k, &peak) = mag[lo..=hi]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, m)| (i + lo, m))
        .unwrap();
    if !(peak > 0.0) || k == hi {
        return Err(Error::NoPeak);
    }
    if k == lo {
        return Err(Error::InsufficientData("dominant motion is slower than the trajectory resolves".into()));
    }
    let (a, b, c) = (mag[k - 1].ln(), peak.ln(), mag[k + 1].ln());
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let omega = (k as f64 + shift) * bin_omega;

    let span = (n - 1) as f64 * dt;
    if span * omega / (2.0 * PI) < MIN_PERIODS {
        return Err(Error::InsufficientData(format!(
            "trajectory spans {:.1} secular periods, need {MIN_PERIODS}",
            span * omega / (2.0 * PI)
        )));
    }
    Ok(omega)
}
