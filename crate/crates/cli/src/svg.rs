use std::collections::BTreeMap;
use std::fmt::Write as _;

use resilink_core::orchestrator::{Cell, Table};

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 40.0, 50.0]; // left, right, top, bottom
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

type Series = (String, Vec<(f64, f64)>);

fn num(c: &Cell) -> Option<f64> {
    match c {
        Cell::Int(i) => Some(*i as f64),
        Cell::Num(x) if x.is_finite() => Some(*x),
        _ => None,
    }
}

fn col(t: &Table, name: &str) -> Option<usize> {
    t.columns.iter().position(|c| c == name)
}

/// One series per y column against column `x`.
fn columns(t: &Table, x: &str, ys: &[&str]) -> Vec<Series> {
    let Some(xi) = col(t, x) else { return Vec::new() };
    ys.iter()
        .filter_map(|y| {
            let yi = col(t, y)?;
            let pts = t.rows.iter().filter_map(|r| Some((num(&r[xi])?, num(&r[yi])?))).collect();
            Some((y.to_string(), pts))
        })
        .collect()
}

/// One series per distinct value of column `group`.
fn grouped(t: &Table, group: &str, x: &str, y: &str) -> Vec<Series> {
    let (Some(gi), Some(xi), Some(yi)) = (col(t, group), col(t, x), col(t, y)) else { return Vec::new() };
    let mut order = Vec::new();
    let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &t.rows {
        let key = match &r[gi] {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => v.to_string(),
        };
        if let (Some(a), Some(b)) = (num(&r[xi]), num(&r[yi])) {
            if !by.contains_key(&key) {
                order.push(key.clone());
            }
            by.entry(key).or_default().push((a, b));
        }
    }
    order.into_iter().map(|k| {
        let pts = by.remove(&k).unwrap_or_default();
        (k, pts)
    }).collect()
}

/// Line plot of a named figure dataset.
pub fn figure(name: &str, t: &Table) -> String {
    let (x_label, y_label, series) = match name {
        "launch_power" => ("frequency (THz)", "launch power (dBm)", columns(t, "frequency_thz", &["initial_dbm", "optimized_dbm"])),
        "accumulated_gsnr" => ("slot", "GSNR (dB)", grouped(t, "point", "slot_index", "gsnr_db")),
        "dlm_profile_before_after" => {
            ("position (km)", "power (dBm)", columns(t, "position_km", &["power_dbm_before", "power_dbm_after"]))
        }
        "received_spectrum" => ("frequency (THz)", "power (dBm)", columns(t, "frequency_thz", &["power_dbm", "floor_dbm"])),
        _ => {
            let x = t.columns.first().map(String::as_str).unwrap_or("");
            let ys: Vec<&str> = t.columns.iter().skip(1).map(String::as_str).collect();
            (x, "", columns(t, x, &ys))
        }
    };
    plot(name, x_label, y_label, &series)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let [ml, mr, mt, mb] = MARGIN;
    let (pw, ph) = (W - ml - mr, H - mt - mb);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), mt + ph + 15.0, tick(xv));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 5.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(y_label)
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { 'M' } else { 'L' }, sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#, d.trim_end());
        let ly = mt + 12.0 + 13.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#, ml + 8.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
