//! CSV, JSON and SVG outputs of a list of records. Output depends only on the
//! records, so identical records give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::sweep::RunRecord;
use crate::util::fmt17;

pub const CSV_HEADER: &str =
    "xi,eta,lambda,E_total,etaE,E_elastic,E_f,E_g,E_upper_hemi,E_lower_hemi,sym_ratio,ring_r,ring_theta,status";

pub const FORMATS: [&str; 3] = ["csv", "json", "svg"];

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// One header line and one row per record.
pub fn csv_table(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let e = r.energies;
        let cols = [
            fmt17(r.xi),
            fmt17(r.eta),
            fmt17(r.lambda),
            opt(e.map(|e| e.total)),
            opt(r.eta_energy),
            opt(e.map(|e| e.elastic)),
            opt(e.map(|e| e.f)),
            opt(e.map(|e| e.g)),
            opt(e.map(|e| e.upper_hemi)),
            opt(e.map(|e| e.lower_hemi)),
            opt(r.sym_ratio),
            opt(r.ring.map(|g| g.r)),
            opt(r.ring.map(|g| g.theta)),
            r.status.as_str().to_string(),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn json_document(records: &[RunRecord]) -> Result<String> {
    Ok(serde_json::to_string_pretty(records)? + "\n")
}

/// A named polyline.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 80.0;
const MR: f64 = 150.0;
const MT: f64 = 40.0;
const MB: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0))
    } else {
        (lo, hi)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static line plot with axes, end-point tick labels and a legend. A log x
/// axis is used when `log_x` is set and every abscissa is positive.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_x: bool) -> String {
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!log_x || p.0 > 0.0);
    let all = || series.iter().flat_map(|s| s.points.iter().filter(finite));
    let fx = |x: f64| if log_x { x.log10() } else { x };
    let (x0, x1) = span(all().map(|p| fx(p.0)));
    let (y0, y1) = span(all().map(|p| p.1));
    let px = |x: f64| ML + (fx(x) - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
    let tick = |v: f64| format!("{v:.4e}");

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, (ML + W - MR) / 2.0, esc(title));
    let (bx, by) = (ML, H - MB);
    let _ = writeln!(s, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, W - MR);
    let _ = writeln!(s, r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{MT}" stroke="black"/>"#);
    let xt = |v: f64| if log_x { 10f64.powf(v) } else { v };
    let _ = writeln!(s, r#"<text x="{bx}" y="{}" text-anchor="start" font-size="11">{}</text>"#, by + 16.0, tick(xt(x0)));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#, W - MR, by + 16.0, tick(xt(x1)));
    let _ = writeln!(s, r#"<text x="{}" y="{by}" text-anchor="end" font-size="11">{}</text>"#, bx - 4.0, tick(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#, bx - 4.0, MT + 4.0, tick(y1));
    let xl = if log_x { format!("{xlabel} (log scale)") } else { xlabel.to_string() };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, (ML + W - MR) / 2.0, H - 20.0, esc(&xl));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {0})">{1}</text>"#,
        (MT + H - MB) / 2.0,
        esc(ylabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(finite)
            .map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = MT + 16.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{}</text>"#, W - MR + 10.0, esc(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn by_init(records: &[RunRecord], y: impl Fn(&RunRecord) -> Option<f64>) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in records {
        let Some(v) = y(r) else { continue };
        match out.iter_mut().find(|s| s.name == r.init) {
            Some(s) => s.points.push((r.xi, v)),
            None => out.push(Series {
                name: r.init.clone(),
                points: vec![(r.xi, v)],
            }),
        }
    }
    out
}

/// `(file name, contents)` of the three plots.
pub fn svg_documents(records: &[RunRecord]) -> Vec<(&'static str, String)> {
    let eta_e = by_init(records, |r| r.eta_energy);
    let sym = by_init(records, |r| r.sym_ratio.filter(|v| v.is_finite()));
    let mut curves: Vec<Series> = Vec::new();
    for r in records {
        if r.d_lambda_samples.is_empty() || curves.iter().any(|c| c.name == format!("lambda = {}", r.lambda)) {
            continue;
        }
        let mut pts = r.d_lambda_samples.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        curves.push(Series {
            name: format!("lambda = {}", r.lambda),
            points: pts,
        });
    }
    vec![
        ("eta_energy_vs_xi.svg", svg_plot("eta E vs xi", "xi", "eta E", &eta_e, true)),
        ("sym_ratio_vs_xi.svg", svg_plot("symmetry ratio vs xi", "xi", "E(upper) / E(lower)", &sym, true)),
        ("d_lambda.svg", svg_plot("layer energy D_lambda(theta)", "theta", "D_lambda", &curves, false)),
    ]
}

/// Writes the outputs of `format` into `dir` and returns their paths.
pub fn report(records: &[RunRecord], format: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    if !FORMATS.contains(&format) {
        return Err(Error::UnknownFormat(format.to_string()));
    }
    fs::create_dir_all(dir)?;
    let files: Vec<(String, String)> = match format {
        "csv" => vec![("records.csv".into(), csv_table(records))],
        "json" => vec![("records.json".into(), json_document(records)?)],
        _ => svg_documents(records).into_iter().map(|(n, c)| (n.to_string(), c)).collect(),
    };
    let mut paths = Vec::new();
    for (name, contents) in files {
        let p = dir.join(name);
        fs::write(&p, contents)?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::RunStatus;

    fn rec(xi: f64) -> RunRecord {
        serde_json::from_value(serde_json::json!({
            "point": 0, "init": "layer", "xi": xi, "eta": 5.0 * xi, "lambda": 5.0,
            "status": "ok", "reason": null, "minimizer": true, "nr": 3, "ntheta": 4,
            "energies": {"total": 1.0 / xi, "elastic": 0.5, "radial": 0.5, "polar": 0.0,
                          "azimuthal": 0.0, "f": 0.25, "g": 0.25, "upper_hemi": 0.5, "lower_hemi": 0.5},
            "eta_energy": 5.0, "bands": [], "sym_ratio": 1.0, "ring": null,
            "ray_lower_bound": null, "d_lambda_reference": 13.0,
            "d_lambda_samples": [[0.5, 1.0], [0.2, 0.4]], "convergence": null, "wall_time_s": 0.0
        }))
        .unwrap()
    }

    #[test]
    fn csv_rows_match_records() {
        let recs: Vec<RunRecord> = [0.04, 0.02, 0.01].map(rec).to_vec();
        let csv = csv_table(&recs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 14 && l.ends_with(",ok")));
        assert_eq!(csv_table(&[]), format!("{CSV_HEADER}\n"));
        assert_eq!(csv, csv_table(&recs.clone()));
    }

    #[test]
    fn failed_record_leaves_blanks() {
        let mut r = rec(0.1);
        r.status = RunStatus::Failed;
        r.energies = None;
        r.eta_energy = None;
        r.sym_ratio = None;
        let csv = csv_table(&[r]);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,,,,,,,,,failed"));
    }

    #[test]
    fn one_series_one_polyline_with_all_vertices() {
        let recs: Vec<RunRecord> = [0.04, 0.02, 0.01].map(rec).to_vec();
        let docs = svg_documents(&recs);
        let doc = &docs[0].1;
        assert_eq!(doc.matches("<polyline").count(), 1);
        let pts = doc.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split_whitespace().count(), 3);
        assert_eq!(docs[2].1.matches("<polyline").count(), 1);
    }

    #[test]
    fn unknown_format_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        match report(&[], "xlsx", dir.path()) {
            Err(Error::UnknownFormat(f)) => {
                assert_eq!(f, "xlsx");
                assert!(Error::UnknownFormat(f).to_string().contains("csv, json, svg"));
            }
            other => panic!("{other:?}"),
        }
        let paths = report(&[], "csv", dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&paths[0]).unwrap(), format!("{CSV_HEADER}\n"));
    }
}
