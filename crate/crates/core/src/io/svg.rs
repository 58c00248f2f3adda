//! ERP plot: target trace solid, non-target dashed, score window shaded.

use std::fmt::Write as _;
use std::path::Path;

use crate::erp::{ChannelSelection, ErpAverage, ScoreWindow};
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn trace(erp: &ErpAverage, channels: ChannelSelection) -> Result<Vec<(f64, f64)>> {
    let m = &erp.mean;
    if let ChannelSelection::Channel(c) = channels {
        if c >= m.nrows() {
            return Err(Error::arg(format!("channel {c} out of range")));
        }
    }
    Ok(m.columns()
        .into_iter()
        .enumerate()
        .map(|(i, col)| {
            let v = match channels {
                ChannelSelection::Average => col.mean().unwrap_or(0.0),
                ChannelSelection::Channel(c) => col[c],
            };
            (erp.time_ms(i), v)
        })
        .collect())
}

pub fn erp_svg(
    target: &ErpAverage,
    non_target: Option<&ErpAverage>,
    window: ScoreWindow,
    channels: ChannelSelection,
) -> Result<String> {
    let mut traces = vec![trace(target, channels)?];
    if let Some(nt) = non_target {
        traces.push(trace(nt, channels)?);
    }
    let pts = traces.iter().flatten();
    let (mut t0, mut t1, mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for &(t, v) in pts {
        t0 = t0.min(t);
        t1 = t1.max(t);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::arg("ERP needs at least two samples to plot"));
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (W - 2.0 * MARGIN);
    let y = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (wx0, wx1) = (x(window.start_ms.clamp(t0, t1)), x(window.end_ms.clamp(t0, t1)));
    let _ = writeln!(
        s,
        r##"<rect x="{wx0:.2}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="#e8e8f8"/>"##,
        wx1 - wx0,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}-{} ms</text>"#,
        (wx0 + wx1) / 2.0,
        MARGIN - 6.0,
        window.start_ms,
        window.end_ms
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray"/>"#,
        y(0.0),
        W - MARGIN,
        y(0.0)
    );
    if (t0..=t1).contains(&0.0) {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{MARGIN}" x2="{:.2}" y2="{:.2}" stroke="gray"/>"#,
            x(0.0),
            x(0.0),
            H - MARGIN
        );
    }
    for (k, tr) in traces.iter().enumerate() {
        let path: Vec<String> = tr.iter().map(|&(t, v)| format!("{:.2},{:.2}", x(t), y(v))).collect();
        let style = if k == 0 {
            r#"stroke="black""#
        } else {
            r#"stroke="black" stroke-dasharray="6 4""#
        };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke-width="1.5" {style} points="{}"/>"#,
            path.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">time [ms]</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.2}" font-size="11" transform="rotate(-90 12 {:.2})" text-anchor="middle">amplitude [uV]</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">{:.1} .. {:.1} uV, {:.0} .. {:.0} ms</text>"#,
        MARGIN,
        H - 28.0,
        lo,
        hi,
        t0,
        t1
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_erp_svg(
    path: &Path,
    target: &ErpAverage,
    non_target: Option<&ErpAverage>,
    window: ScoreWindow,
    channels: ChannelSelection,
) -> Result<()> {
    std::fs::write(path, erp_svg(target, non_target, window, channels)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epoch::EpochWindow;
    use crate::erp::Condition;
    use ndarray::Array2;

    fn erp(condition: Condition, scale: f64) -> ErpAverage {
        ErpAverage {
            mean: Array2::from_shape_fn((2, 231), |(c, i)| scale * (c + 1) as f64 * (i as f64 / 40.0).sin()),
            n_epochs: 3,
            condition,
            window: EpochWindow {
                pre_samples: 26,
                post_samples: 205,
            },
            sample_rate_hz: 256.0,
        }
    }

    #[test]
    fn two_traces_and_window() {
        let t = erp(Condition::Target, 5.0);
        let n = erp(Condition::NonTarget, 1.0);
        let svg = erp_svg(&t, Some(&n), ScoreWindow::default(), ChannelSelection::Average).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert!(svg.contains("250-500 ms"));
        assert_eq!(
            svg,
            erp_svg(&t, Some(&n), ScoreWindow::default(), ChannelSelection::Average).unwrap()
        );
        assert!(erp_svg(&t, None, ScoreWindow::default(), ChannelSelection::Channel(5)).is_err());
    }
}
