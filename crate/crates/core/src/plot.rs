//! Static SVG figure: overlaid spectra, a zoomed inset, and one error trace
//! per method.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 960.0;
const MAIN_HEIGHT: f64 = 280.0;
const TRACE_HEIGHT: f64 = 120.0;
const MARGIN: f64 = 48.0;
const GAP: f64 = 36.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Screen rectangle a panel draws into.
#[derive(Clone, Copy)]
struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

fn y_limits<'a>(series: impl IntoIterator<Item = &'a [f64]>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &v in s {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn polyline(
    svg: &mut String,
    frame: Frame,
    range: &Range<usize>,
    values: &[f64],
    (lo, hi): (f64, f64),
    name: &str,
    color: &str,
) {
    let span = (range.end - range.start - 1).max(1) as f64;
    let _ = write!(
        svg,
        r#"<polyline data-series="{name}" fill="none" stroke="{color}" stroke-width="1" points=""#
    );
    for (k, &v) in values.iter().enumerate() {
        let px = frame.x + frame.w * k as f64 / span;
        let py = frame.y + frame.h * (hi - v) / (hi - lo);
        if k > 0 {
            svg.push(' ');
        }
        let _ = write!(svg, "{px:.2},{py:.2}");
    }
    svg.push_str("\"/>\n");
}

fn axes(svg: &mut String, frame: Frame, range: &Range<usize>, title: &str) {
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        frame.x, frame.y, frame.w, frame.h
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13">{}</text>"#,
        frame.x,
        frame.y - 8.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
        frame.x,
        frame.y + frame.h + 14.0,
        range.start
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
        frame.x + frame.w,
        frame.y + frame.h + 14.0,
        range.end - 1
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Draws clean, noisy and every denoised spectrum over `range`. Panels use
/// local coordinates inside a translated group.
#[allow(clippy::too_many_arguments)]
fn spectra_panel(
    svg: &mut String,
    id: &str,
    title: &str,
    top: f64,
    range: Range<usize>,
    clean: &[f64],
    noisy: &[f64],
    denoised: &[(String, Vec<f64>)],
) {
    let slices: Vec<(&str, &str, &[f64])> = [("clean", "#000000", clean), ("noisy", "#aaaaaa", noisy)]
        .into_iter()
        .map(|(n, c, v)| (n, c, &v[range.clone()]))
        .chain(
            denoised
                .iter()
                .enumerate()
                .map(|(i, (n, v))| (n.as_str(), PALETTE[i % PALETTE.len()], &v[range.clone()])),
        )
        .collect();
    let limits = y_limits(slices.iter().map(|s| s.2));
    let frame = Frame {
        x: MARGIN,
        y: 0.0,
        w: WIDTH - 2.0 * MARGIN,
        h: MAIN_HEIGHT,
    };
    let _ = writeln!(svg, r#"<g id="{id}" transform="translate(0,{top})">"#);
    axes(svg, frame, &range, title);
    // Noisy first so the other curves are drawn over it.
    for &(name, color, values) in [&slices[1], &slices[0]].into_iter().chain(&slices[2..]) {
        polyline(svg, frame, &range, values, limits, &escape(name), color);
    }
    svg.push_str("</g>\n");
}

fn validate(
    clean: &[f64],
    noisy: &[f64],
    denoised: &[(String, Vec<f64>)],
    zoom: &Range<usize>,
) -> Result<()> {
    let n = clean.len();
    if n < 2 {
        return Err(Error::invalid("need at least two samples to plot"));
    }
    if noisy.len() != n || denoised.iter().any(|(_, v)| v.len() != n) {
        return Err(Error::invalid("all plotted spectra must share one length"));
    }
    let all = std::iter::once(clean)
        .chain(std::iter::once(noisy))
        .chain(denoised.iter().map(|(_, v)| v.as_slice()));
    if all.flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("plotted spectrum".into()));
    }
    if zoom.start >= zoom.end || zoom.end > n || zoom.end - zoom.start < 2 {
        return Err(Error::invalid(format!(
            "zoom range {}..{} must hold at least two samples inside 0..{n}",
            zoom.start, zoom.end
        )));
    }
    Ok(())
}

/// Build the SVG document.
pub fn render_plot(
    clean: &[f64],
    noisy: &[f64],
    denoised: &[(String, Vec<f64>)],
    zoom: Range<usize>,
) -> Result<String> {
    validate(clean, noisy, denoised, &zoom)?;
    let n = clean.len();
    let inner_w = WIDTH - 2.0 * MARGIN;
    let height =
        MARGIN + 2.0 * (MAIN_HEIGHT + GAP) + denoised.len() as f64 * (TRACE_HEIGHT + GAP) + MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let mut top = MARGIN;
    spectra_panel(&mut svg, "panel-a", "(a) spectra", top, 0..n, clean, noisy, denoised);
    top += MAIN_HEIGHT + GAP;
    let title = format!("(b) zoom {}..{}", zoom.start, zoom.end);
    spectra_panel(&mut svg, "panel-b", &title, top, zoom, clean, noisy, denoised);
    top += MAIN_HEIGHT + GAP;

    for (i, (name, values)) in denoised.iter().enumerate() {
        let err: Vec<f64> = values.iter().zip(clean).map(|(d, c)| d - c).collect();
        let amp = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let amp = if amp > 0.0 { 1.05 * amp } else { 1.0 };
        let frame = Frame {
            x: MARGIN,
            y: 0.0,
            w: inner_w,
            h: TRACE_HEIGHT,
        };
        let _ = writeln!(
            svg,
            r#"<g id="panel-c-{}" transform="translate(0,{top})">"#,
            escape(name)
        );
        axes(&mut svg, frame, &(0..n), &format!("(c) error, {name}"));
        polyline(
            &mut svg,
            frame,
            &(0..n),
            &err,
            (-amp, amp),
            &format!("error-{}", escape(name)),
            PALETTE[i % PALETTE.len()],
        );
        svg.push_str("</g>\n");
        top += TRACE_HEIGHT + GAP;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render and write the figure to `path`.
pub fn emit_plot(
    clean: &[f64],
    noisy: &[f64],
    denoised: &[(String, Vec<f64>)],
    zoom: Range<usize>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let svg = render_plot(clean, noisy, denoised, zoom)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
