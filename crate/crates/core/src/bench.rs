//! Timing helpers for scaling measurements.

use crate::clock::Stopwatch;
use crate::error::{validation, Result};

/// Median wall time of `repeats` runs after one untimed warm-up run.
pub fn median_seconds<T>(repeats: usize, mut run: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    if repeats == 0 {
        return validation("repeats must be at least 1");
    }
    let mut last = run()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let clock = Stopwatch::start();
        last = run()?;
        times.push(clock.elapsed());
    }
    Ok((median(&mut times), last))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return validation("slope needs at least two (x, y) pairs of equal length");
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return validation("log-log slope needs positive finite values");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return validation("slope needs at least two distinct x values");
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let xs = [16.0, 32.0, 64.0, 128.0];
        let cubic: Vec<f64> = xs.iter().map(|x: &f64| 0.01 * x.powi(3)).collect();
        assert!((loglog_slope(&xs, &cubic).unwrap() - 3.0).abs() < 1e-12);
        let linear: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert!((loglog_slope(&xs, &linear).unwrap() - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn median_counts_runs() {
        let mut calls = 0;
        let (t, last) = median_seconds(3, || {
            calls += 1;
            Ok(calls)
        })
        .unwrap();
        assert_eq!(calls, 4);
        assert_eq!(last, 4);
        assert!(t >= 0.0);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
