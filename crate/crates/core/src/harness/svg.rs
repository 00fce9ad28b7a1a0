//! Hand-rolled SVG charts. Output depends only on the input data, with every
//! coordinate printed at fixed precision, so identical reports give identical bytes.

use std::fmt::Write;

use super::bench::BenchReport;
use crate::trainer::TrainLog;

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    lo: f64,
    hi: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.lo) / (self.hi - self.lo) * self.h
    }

    fn axes(&self, out: &mut String, y_label: &str) {
        for t in ticks(self.lo, self.hi) {
            let y = self.y(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
                self.x0,
                self.x0 + self.w
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                self.x0 - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            self.x0 - 46.0,
            self.y0 + self.h / 2.0,
            escape(y_label)
        );
    }
}

fn legend(out: &mut String, x: f64, y: f64, labels: &[String]) {
    for (i, label) in labels.iter().enumerate() {
        let yy = y + i as f64 * 18.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#,
            yy - 10.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{yy:.2}">{}</text>"#, x + 18.0, escape(label));
    }
}

/// Grouped bars: one group per UE count, one bar per policy, whiskers at ±1 std.
pub fn bench_bar_chart(report: &BenchReport, title: &str) -> String {
    let mut ks: Vec<usize> = Vec::new();
    let mut policies = Vec::new();
    for c in &report.cells {
        if !ks.contains(&c.ue_count) {
            ks.push(c.ue_count);
        }
        if !policies.contains(&c.policy) {
            policies.push(c.policy);
        }
    }
    let top = report
        .cells
        .iter()
        .map(|c| c.mean_off_count + c.std_off_count)
        .fold(1.0f64, f64::max);
    let frame = Frame {
        x0: MARGIN_L,
        y0: MARGIN_T,
        w: WIDTH - MARGIN_L - MARGIN_R,
        h: HEIGHT - MARGIN_T - MARGIN_B,
        lo: 0.0,
        hi: top * 1.1,
    };
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let _ = writeln!(out, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, frame.x0 + frame.w / 2.0, escape(title));
    frame.axes(&mut out, "switched-off RCs (mean ± 1 std)");
    let group_w = frame.w / ks.len().max(1) as f64;
    let bar_w = group_w * 0.8 / policies.len().max(1) as f64;
    for (gi, &k) in ks.iter().enumerate() {
        let gx = frame.x0 + gi as f64 * group_w + group_w * 0.1;
        for (pi, &p) in policies.iter().enumerate() {
            let Some(c) = report.cell(p, k) else { continue };
            let x = gx + pi as f64 * bar_w;
            let y = frame.y(c.mean_off_count);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                bar_w * 0.9,
                frame.y(0.0) - y,
                PALETTE[pi % PALETTE.len()]
            );
            let cx = x + bar_w * 0.45;
            let (lo, hi) = ((c.mean_off_count - c.std_off_count).max(0.0), c.mean_off_count + c.std_off_count);
            let _ = writeln!(
                out,
                r##"<path d="M{cx:.2} {:.2}V{:.2}M{:.2} {:.2}H{:.2}M{:.2} {:.2}H{:.2}" stroke="#000" fill="none"/>"##,
                frame.y(lo),
                frame.y(hi),
                cx - 3.0,
                frame.y(lo),
                cx + 3.0,
                cx - 3.0,
                frame.y(hi),
                cx + 3.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">K = {k}</text>"#,
            frame.x0 + (gi as f64 + 0.5) * group_w,
            frame.y0 + frame.h + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">number of UEs</text>"#,
        frame.x0 + frame.w / 2.0,
        HEIGHT - 10.0
    );
    let labels: Vec<String> = policies.iter().map(|p| p.label().to_string()).collect();
    legend(&mut out, WIDTH - MARGIN_R + 16.0, MARGIN_T + 12.0, &labels);
    out.push_str("</svg>\n");
    out
}

fn polyline(out: &mut String, frame: &Frame, values: &[f64], color: &str) {
    let n = values.len();
    let x = |i: usize| {
        if n <= 1 {
            frame.x0 + frame.w / 2.0
        } else {
            frame.x0 + i as f64 / (n - 1) as f64 * frame.w
        }
    };
    if n == 1 {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, x(0), frame.y(values[0]));
        return;
    }
    let mut d = String::new();
    for (i, v) in values.iter().enumerate() {
        let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, x(i), frame.y(*v));
    }
    let _ = writeln!(out, r#"<path d="{d}" stroke="{color}" fill="none" stroke-width="1.5"/>"#);
}

fn value_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

/// Reward and loss moving averages in two stacked panels.
pub fn training_curves(log: &TrainLog) -> String {
    let panels = [
        ("reward (moving average)", log.reward_moving_average(), PALETTE[0]),
        ("loss (moving average)", log.loss_moving_average(), PALETTE[3]),
    ];
    let panel_h = 180.0;
    let height = MARGIN_T + 2.0 * panel_h + 40.0 + MARGIN_B;
    let mut out = String::new();
    header(&mut out, WIDTH, height);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">training curves, window {}</text>"#,
        WIDTH / 2.0,
        log.window
    );
    for (i, (label, values, color)) in panels.iter().enumerate() {
        let (lo, hi) = value_range(values);
        let frame = Frame {
            x0: MARGIN_L,
            y0: MARGIN_T + i as f64 * (panel_h + 40.0),
            w: WIDTH - MARGIN_L - 40.0,
            h: panel_h,
            lo,
            hi,
        };
        frame.axes(&mut out, label);
        polyline(&mut out, &frame, values, color);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">window index (episodes)</text>"#,
        WIDTH / 2.0,
        height - 12.0
    );
    out.push_str("</svg>\n");
    out
}
