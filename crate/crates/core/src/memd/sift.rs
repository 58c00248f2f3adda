use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use super::hammersley::DirectionSet;
use super::spline::interpolate_natural;
use super::SiftConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Per-sample inner product of a channels × samples signal with `direction`.
pub fn project(signal: ArrayView2<'_, f64>, direction: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if signal.nrows() != direction.len() {
        return Err(Error::arg(format!(
            "direction has {} dimensions but the signal has {} channels",
            direction.len(),
            signal.nrows()
        )));
    }
    Ok(direction.dot(&signal))
}

/// Strict interior local maxima. A flat top of equal samples counts once, at
/// the floor of its midpoint; flat runs touching either end are ignored.
pub fn find_maxima(series: &[f64]) -> Vec<(usize, f64)> {
    let n = series.len();
    let mut maxima = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if series[i] > series[i - 1] {
            let mut j = i;
            while j + 1 < n && series[j + 1] == series[i] {
                j += 1;
            }
            if j + 1 < n && series[j + 1] < series[i] {
                maxima.push(((i + j) / 2, series[i]));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    maxima
}

/// Envelope through the multivariate samples at the projection maxima, or
/// `None` when the projection has fewer than two maxima.
///
/// The two outermost maxima at each end are mirrored about the first and last
/// sample so the spline is anchored beyond the edges.
fn directional_envelope(signal: ArrayView2<'_, f64>, direction: ArrayView1<'_, f64>) -> Option<Array2<f64>> {
    let t_len = signal.ncols();
    let projection = direction.dot(&signal);
    let maxima = find_maxima(projection.as_slice().expect("dot yields a contiguous vector"));
    if maxima.len() < 2 {
        return None;
    }
    let last = (t_len - 1) as f64;
    let m = maxima.len();
    let mut times = Vec::with_capacity(m + 4);
    let mut sources = Vec::with_capacity(m + 4);
    for &(idx, _) in maxima[..2].iter().rev() {
        times.push(-(idx as f64));
        sources.push(idx);
    }
    for &(idx, _) in &maxima {
        times.push(idx as f64);
        sources.push(idx);
    }
    for &(idx, _) in maxima[m - 2..].iter().rev() {
        times.push(2.0 * last - idx as f64);
        sources.push(idx);
    }
    let knots = Array2::from_shape_fn((sources.len(), signal.nrows()), |(k, c)| signal[[c, sources[k]]]);
    Some(interpolate_natural(&times, knots.view(), t_len))
}

/// Mean of the directional envelopes over every direction whose projection
/// has at least two maxima.
pub fn envelope_mean(signal: ArrayView2<'_, f64>, dirs: &DirectionSet, exec: Execution) -> Result<Array2<f64>> {
    if signal.nrows() != dirs.dims() {
        return Err(Error::arg(format!(
            "directions are {}-dimensional but the signal has {} channels",
            dirs.dims(),
            signal.nrows()
        )));
    }
    if signal.ncols() < 3 {
        return Err(Error::InsufficientExtrema);
    }
    let envelopes = exec.map_indexed(dirs.len(), |k| directional_envelope(signal, dirs.direction(k)));
    let mut mean = Array2::zeros(signal.raw_dim());
    let mut used = 0usize;
    for env in envelopes.into_iter().flatten() {
        mean += &env;
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientExtrema);
    }
    mean /= used as f64;
    Ok(mean)
}

fn energy(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Extracts one multivariate IMF from `signal`.
///
/// Returns `InsufficientExtrema` only if the very first envelope cannot be
/// formed, which marks `signal` as a residue. Running out of extrema later
/// ends the sifting normally.
pub(crate) fn sift_with(
    signal: ArrayView2<'_, f64>,
    dirs: &DirectionSet,
    cfg: &SiftConfig,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut detail = signal.to_owned();
    let mut mean = envelope_mean(detail.view(), dirs, cfg.execution)?;
    for iter in 0..cfg.max_sift_iters {
        let before = energy(&detail);
        detail -= &mean;
        let change = energy(&mean);
        if before == 0.0 || change / before < cfg.sd_threshold || iter + 1 == cfg.max_sift_iters {
            break;
        }
        mean = match envelope_mean(detail.view(), dirs, cfg.execution) {
            Ok(m) => m,
            Err(Error::InsufficientExtrema) => break,
            Err(e) => return Err(e),
        };
    }
    let mut remainder = signal.to_owned();
    Zip::from(&mut remainder).and(&detail).for_each(|r, &d| *r -= d);
    Ok((detail, remainder))
}
