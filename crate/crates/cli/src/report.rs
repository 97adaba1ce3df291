//! The `report` subcommand: renders an aggregate study table as two SVG
//! panel grids (level and power against signal size), one panel per
//! combination of the sparsity and asymmetry parameters.

use crate::CliError;
use clap::Args;
use dirfdr::sim::MethodId;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Args)]
pub struct ReportArgs {
    /// aggregate.csv produced by `simulate`
    #[arg(long)]
    input: PathBuf,
    /// Output directory for fdr_dir.svg and tpr.svg
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Target-level reference line when the table is empty
    #[arg(long, default_value_t = 0.1)]
    q: f64,
}

struct AggRow {
    w: f64,
    xi: f64,
    v: f64,
    method: String,
    q: f64,
    fdr: f64,
    tpr: f64,
}

fn parse_aggregate(path: &PathBuf) -> Result<Vec<AggRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("bad header row: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::input(format!("aggregate table is missing column: {name}")))
    };
    let (wc, xic, vc) = (col("w")?, col("xi")?, col("v")?);
    let (mc, qc) = (col("method")?, col("q")?);
    let (fc, tc) = (col("fdr_dir_mean")?, col("tpr_mean")?);

    let mut rows = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("row {}: {e}", index + 2)))?;
        let num = |c: usize, name: &str| -> Result<f64, CliError> {
            record
                .get(c)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("row {}: bad {name}", index + 2)))
        };
        rows.push(AggRow {
            w: num(wc, "w")?,
            xi: num(xic, "xi")?,
            v: num(vc, "v")?,
            method: record.get(mc).unwrap_or("").trim().to_string(),
            q: num(qc, "q")?,
            fdr: num(fc, "fdr_dir_mean")?,
            tpr: num(tc, "tpr_mean")?,
        });
    }
    Ok(rows)
}

fn sorted_unique(values: impl Iterator<Item = f64>, descending: bool) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_unstable_by(f64::total_cmp);
    v.dedup();
    if descending {
        v.reverse();
    }
    v
}

fn method_color(method: &str) -> &'static str {
    match method {
        "bh-dir" => "#1f77b4",
        "gr" => "#ff7f0e",
        "storey-dir" => "#2ca02c",
        "astorey-dir" => "#17becf",
        "zdirect" => "#d62728",
        "ash" => "#9467bd",
        "lfsr-oracle" => "#7f7f7f",
        _ => "#000000",
    }
}

fn method_order(rows: &[AggRow]) -> Vec<String> {
    let mut present: Vec<String> = Vec::new();
    for m in MethodId::ALL {
        if rows.iter().any(|r| r.method == m.as_str()) {
            present.push(m.as_str().to_string());
        }
    }
    let mut extras: Vec<String> = rows
        .iter()
        .map(|r| r.method.clone())
        .filter(|m| !present.contains(m))
        .collect();
    extras.sort();
    extras.dedup();
    present.extend(extras);
    present
}

const PANEL_W: f64 = 230.0;
const PANEL_H: f64 = 150.0;
const GAP: f64 = 26.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_T: f64 = 58.0;
const MARGIN_B: f64 = 42.0;
const MARGIN_R: f64 = 16.0;

fn render_metric(
    rows: &[AggRow],
    value: impl Fn(&AggRow) -> f64,
    title: &str,
    y_max: f64,
    q_line: Option<f64>,
) -> String {
    let w_levels = {
        let mut v = sorted_unique(rows.iter().map(|r| r.w), true);
        if v.is_empty() {
            v.push(f64::NAN);
        }
        v
    };
    let v_levels = {
        let mut v = sorted_unique(rows.iter().map(|r| r.v), false);
        if v.is_empty() {
            v.push(f64::NAN);
        }
        v
    };
    let xi_levels = sorted_unique(rows.iter().map(|r| r.xi), false);
    let methods = method_order(rows);

    let n_rows = w_levels.len();
    let n_cols = v_levels.len();
    let width = MARGIN_L + n_cols as f64 * (PANEL_W + GAP) - GAP + MARGIN_R;
    let height = MARGIN_T + n_rows as f64 * (PANEL_H + GAP) - GAP + MARGIN_B;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_L}" y="20" font-size="14" font-weight="bold">{title}</text>"#
    );

    // legend
    let mut lx = MARGIN_L;
    for m in &methods {
        let color = method_color(m);
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="36" x2="{:.1}" y2="36" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="40" font-size="10">{m}</text>"#, lx + 22.0);
        lx += 30.0 + 7.0 * m.len() as f64;
    }

    let (xi_lo, xi_hi) = match (xi_levels.first(), xi_levels.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        (Some(&lo), _) => (lo - 0.5, lo + 0.5),
        _ => (0.0, 1.0),
    };

    for (ri, &w) in w_levels.iter().enumerate() {
        for (ci, &v) in v_levels.iter().enumerate() {
            let x0 = MARGIN_L + ci as f64 * (PANEL_W + GAP);
            let y0 = MARGIN_T + ri as f64 * (PANEL_H + GAP);
            let to_x = |xi: f64| x0 + (xi - xi_lo) / (xi_hi - xi_lo) * PANEL_W;
            let to_y = |val: f64| y0 + PANEL_H - (val.clamp(0.0, y_max) / y_max) * PANEL_H;

            let _ = writeln!(
                svg,
                r##"<g class="panel"><rect x="{x0:.1}" y="{y0:.1}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
            );
            let label = if w.is_nan() {
                "no data".to_string()
            } else {
                format!("w={w}, v={v}")
            };
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="10">{label}</text>"#,
                x0 + 4.0,
                y0 - 4.0
            );
            // y ticks
            for frac in [0.0, 0.5, 1.0] {
                let yv = frac * y_max;
                let y = to_y(yv);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="8" text-anchor="end">{yv:.2}</text>"##,
                    x0 - 4.0,
                    x0 - 6.0,
                    y + 2.5
                );
            }
            // x ticks
            for &xi in &xi_levels {
                let x = to_x(xi);
                let yb = y0 + PANEL_H;
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" font-size="8" text-anchor="middle">{xi}</text>"##,
                    yb + 4.0,
                    yb + 14.0
                );
            }
            if let Some(q) = q_line {
                let y = to_y(q);
                let _ = writeln!(
                    svg,
                    r#"<line class="target-q" x1="{x0:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-dasharray="4,3"/>"#,
                    x0 + PANEL_W
                );
            }
            for m in &methods {
                let mut pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| &r.method == m && r.w == w && r.v == v)
                    .map(|r| (r.xi, value(r)))
                    .collect();
                pts.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                if pts.is_empty() {
                    continue;
                }
                let path: Vec<String> = pts
                    .iter()
                    .map(|&(xi, val)| format!("{:.2},{:.2}", to_x(xi), to_y(val)))
                    .collect();
                let color = method_color(m);
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
                    path.join(" ")
                );
                for &(xi, val) in &pts {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#,
                        to_x(xi),
                        to_y(val)
                    );
                }
            }
            let _ = writeln!(svg, "</g>");
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn run(args: ReportArgs) -> Result<(), CliError> {
    let rows = parse_aggregate(&args.input)?;
    let q = rows.first().map(|r| r.q).unwrap_or(args.q);
    let fdr_y_max = {
        let data_max = rows.iter().map(|r| r.fdr).fold(0.0f64, f64::max);
        (data_max * 1.15).max(2.0 * q).clamp(0.05, 1.0)
    };
    let fdr_svg = render_metric(
        &rows,
        |r| r.fdr,
        "Empirical directional FDR vs signal size",
        fdr_y_max,
        Some(q),
    );
    let tpr_svg = render_metric(&rows, |r| r.tpr, "True positive rate vs signal size", 1.0, None);

    std::fs::create_dir_all(&args.out)?;
    let fdr_path = args.out.join("fdr_dir.svg");
    let tpr_path = args.out.join("tpr.svg");
    std::fs::write(&fdr_path, fdr_svg)?;
    std::fs::write(&tpr_path, tpr_svg)?;
    eprintln!("wrote {} and {}", fdr_path.display(), tpr_path.display());
    Ok(())
}
