//! Cross-resolution summary of a finished run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::io::{num, parse_cell, Svg, Table};

/// Quantities tracked across resolutions: file, column, optional row filter.
const TRACKED: &[(&str, &str, Option<(&str, &str)>)] = &[
    ("whitney.csv", "pass_fraction", None),
    ("whitney.csv", "gradient_bound", None),
    ("paths.csv", "ahlfors", None),
    ("paths.csv", "length_ratio", None),
    ("weight_report.csv", "integral", None),
    ("weight_report.csv", "slope", None),
    ("weight_report.csv", "lower_fraction", None),
    ("weight_report.csv", "sup_d2", None),
    ("kernel_bound.csv", "max_ratio", None),
    ("solve_report.csv", "max_residual", Some(("p", "inf"))),
    ("solve_report.csv", "c_inf", Some(("p", "inf"))),
    ("sobolev_report.csv", "c_s", None),
    ("sobolev_report.csv", "c_star", None),
    ("sobolev_report.csv", "max_residual", None),
    ("sobolev_report.csv", "weighted_sum_ratio", None),
    ("sobolev_report.csv", "max_spread", None),
    ("poincare_constants.csv", "c_hat", None),
];

/// Columns that split a file into independent series.
fn series_keys(file: &str) -> &'static [&'static str] {
    match file {
        "sobolev_report.csv" => &["p"],
        "poincare_constants.csv" => &["q"],
        _ => &[],
    }
}

/// One tracked quantity at increasing resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(usize, Option<f64>)>,
}

impl Series {
    /// Relative change between consecutive resolutions.
    pub fn trends(&self) -> Vec<Option<f64>> {
        self.points
            .windows(2)
            .map(|w| match (w[0].1, w[1].1) {
                (Some(a), Some(b)) if a != 0.0 => Some((b - a) / a.abs()),
                _ => None,
            })
            .collect()
    }

    /// Observed order `log(e_a/e_b) / log(r_b/r_a)` between consecutive resolutions.
    pub fn orders(&self) -> Vec<Option<f64>> {
        self.points
            .windows(2)
            .map(|w| match (w[0].1, w[1].1) {
                (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / (w[1].0 as f64 / w[0].0 as f64).ln()),
                _ => None,
            })
            .collect()
    }
}

fn fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Collects the tracked series present in `dir`.
pub fn collect(dir: &Path) -> CliResult<Vec<Series>> {
    let mut out = Vec::new();
    for &(file, col, filter) in TRACKED {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let t = Table::read(&path)?;
        let keys = series_keys(file);
        let mut groups: Vec<(String, Vec<(usize, Option<f64>)>)> = Vec::new();
        for row in 0..t.rows.len() {
            if let Some((fc, fv)) = filter {
                let k = t.column(fc).ok_or_else(|| CliError::Artifact {
                    file: file.into(),
                    reason: format!("missing column {fc}"),
                })?;
                if t.rows[row][k] != fv {
                    continue;
                }
            }
            let r = parse_cell(&t, file, row, "resolution")?
                .ok_or_else(|| CliError::Artifact { file: file.into(), reason: "resolution is n/a".into() })?
                as usize;
            let v = parse_cell(&t, file, row, col)?;
            let mut label = format!("{}:{col}", file.trim_end_matches(".csv"));
            for key in keys {
                let k = t.column(key).ok_or_else(|| CliError::Artifact {
                    file: file.into(),
                    reason: format!("missing column {key}"),
                })?;
                let _ = write!(label, "[{key}={}]", t.rows[row][k]);
            }
            match groups.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((r, v)),
                None => groups.push((label, vec![(r, v)])),
            }
        }
        out.extend(groups.into_iter().map(|(label, points)| Series { label, points }));
    }
    Ok(out)
}

/// Writes `report.txt` and, when weights exist, `weight_exponent.svg`.
pub fn write_report(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let series = collect(dir)?;
    if series.is_empty() {
        return Err(CliError::Artifact { file: dir.display().to_string(), reason: "no pipeline tables found".into() });
    }
    let mut s = String::from("quantity | values by resolution | relative change | observed order (residuals)\n");
    for se in &series {
        let vals: Vec<String> = se.points.iter().map(|(r, v)| format!("{r}: {}", fmt(*v))).collect();
        let trends: Vec<String> = se.trends().into_iter().map(fmt).collect();
        let orders: Vec<String> =
            if se.label.contains("residual") { se.orders().into_iter().map(fmt).collect() } else { Vec::new() };
        let or_na = |v: Vec<String>| if v.is_empty() { "n/a".to_string() } else { v.join(", ") };
        let _ = writeln!(s, "{} | {} | {} | {}", se.label, vals.join(", "), or_na(trends), or_na(orders));
    }
    let integ = dir.join("integrability.csv");
    if integ.exists() {
        let t = Table::read(&integ)?;
        let col = t.column("verdict").ok_or_else(|| CliError::Artifact {
            file: "integrability.csv".into(),
            reason: "missing column verdict".into(),
        })?;
        if let Some(row) = t.rows.last() {
            let _ = writeln!(s, "integrability verdict | {}", row[col]);
        }
    }
    let mut files = Vec::new();
    let p = dir.join("report.txt");
    std::fs::write(&p, s)?;
    files.push(p);
    if let Some(p) = weight_plot(dir)? {
        files.push(p);
    }
    Ok(files)
}

/// Log-log scatter of the weight against distance at the finest resolution.
fn weight_plot(dir: &Path) -> CliResult<Option<PathBuf>> {
    let rep_path = dir.join("weight_report.csv");
    if !rep_path.exists() {
        return Ok(None);
    }
    let rep = Table::read(&rep_path)?;
    let Some(last) = rep.rows.len().checked_sub(1) else { return Ok(None) };
    let file = "weight_report.csv";
    let r = parse_cell(&rep, file, last, "resolution")?.unwrap_or(0.0) as usize;
    let slope = parse_cell(&rep, file, last, "slope")?;
    let intercept = parse_cell(&rep, file, last, "intercept")?;
    let wpath = dir.join(format!("r{r}_weight.csv"));
    let dpath = dir.join(format!("r{r}_distance.csv"));
    if !wpath.exists() || !dpath.exists() {
        return Ok(None);
    }
    let (w, d) = (Table::read(&wpath)?, Table::read(&dpath)?);
    let key = |t: &Table, row: usize| (t.rows[row][0].clone(), t.rows[row][1].clone());
    let dist: std::collections::HashMap<_, f64> = (0..d.rows.len())
        .filter_map(|k| d.rows[k][4].parse().ok().map(|v| (key(&d, k), v)))
        .collect();
    let pts: Vec<[f64; 2]> = (0..w.rows.len())
        .filter_map(|k| {
            let om: f64 = w.rows[k][4].parse().ok()?;
            let dd = *dist.get(&key(&w, k))?;
            (om > 0.0 && dd > 0.0).then(|| [dd.log10(), om.log10()])
        })
        .collect();
    if pts.is_empty() {
        return Ok(None);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-3);
    let mut svg = Svg::new([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad], 600.0);
    for p in &pts {
        svg.circle(*p, 1.0, "#1f4e9c");
    }
    if let (Some(m), Some(b)) = (slope, intercept) {
        let line = |x: f64| [x, b / std::f64::consts::LN_10 + m * x];
        svg.polyline(&[line(lo[0]), line(hi[0])], "#c0392b", 1.5);
        svg.label(10.0, 20.0, &format!("log10 weight vs log10 d at {r} cells/unit, fitted slope {}", num(m)));
    } else {
        svg.label(10.0, 20.0, &format!("log10 weight vs log10 d at {r} cells/unit, no fit"));
    }
    let p = dir.join("weight_exponent.svg");
    svg.save(&p)?;
    Ok(Some(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trends_and_orders() {
        let s = Series { label: "x".into(), points: vec![(32, Some(0.4)), (64, Some(0.1)), (128, None)] };
        assert!((s.trends()[0].unwrap() + 0.75).abs() < 1e-12);
        assert!((s.orders()[0].unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(s.orders()[1], None);
    }

    #[test]
    fn single_resolution_has_no_trend() {
        let s = Series { label: "x".into(), points: vec![(32, Some(1.0))] };
        assert!(s.trends().is_empty());
    }
}
