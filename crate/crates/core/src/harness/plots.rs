//! SVG figures built from trial and survival CSVs alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::{HarnessError, SurvivalRow, TrialRecord};

fn plot_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("plot: {e}"))
}

/// `(algo, profile)` series keyed by `p`, holding `(n, records)`.
type Series<'a> = BTreeMap<(String, String), BTreeMap<u64, (f64, u64, Vec<&'a TrialRecord>)>>;

fn series(records: &[TrialRecord]) -> Series<'_> {
    let mut s: Series = BTreeMap::new();
    for r in records {
        let by_p = s.entry((r.algo.clone(), r.profile.clone())).or_default();
        by_p.entry(r.p.to_bits()).or_insert_with(|| (r.p, r.n, Vec::new())).2.push(r);
    }
    s
}

fn arm_error(rs: &[&TrialRecord], dist: &str) -> Option<f64> {
    let arm: Vec<_> = rs.iter().filter(|r| r.dist == dist).collect();
    (!arm.is_empty()).then(|| arm.iter().filter(|r| r.is_error()).count() as f64 / arm.len() as f64)
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if lo < hi {
        (lo, hi)
    } else {
        (lo / 2.0, hi * 2.0)
    }
}

const COLORS: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

/// `Err = Pr[≠0 | D0] + Pr[≠1 | D1]` against `p`, one line per algorithm
/// and profile. Single-arm points show that arm's error rate.
pub fn error_vs_p(records: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    let data: Vec<((String, String), Vec<(f64, f64)>)> = series(records)
        .into_iter()
        .map(|(k, by_p)| {
            let pts = by_p
                .values()
                .filter_map(|(p, _, rs)| match (arm_error(rs, "d0"), arm_error(rs, "d1")) {
                    (None, None) => None,
                    (a, b) => Some((*p, a.unwrap_or(0.0) + b.unwrap_or(0.0))),
                })
                .collect();
            (k, pts)
        })
        .collect();
    let ps: Vec<f64> = data.iter().flat_map(|(_, v)| v.iter().map(|x| x.0)).filter(|p| *p > 0.0).collect();
    let (lo, hi) = span(ps.iter().cloned().fold(f64::INFINITY, f64::min), ps.iter().cloned().fold(0.0, f64::max));
    let (lo, hi) = if lo.is_finite() && lo > 0.0 { (lo, hi) } else { (1e-6, 1.0) };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Err against p", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d((lo..hi).log_scale(), 0f64..2f64)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("p").y_desc("Err").draw().map_err(plot_err)?;
    for (i, ((algo, prof), pts)) in data.into_iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.clone(), c))
            .map_err(plot_err)?
            .label(format!("{algo} ({prof})"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
        chart.draw_series(pts.into_iter().map(|xy| Circle::new(xy, 3, c.filled()))).map_err(plot_err)?;
    }
    chart.configure_series_labels().background_style(WHITE).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Median peak memory against `p` with a fitted `c/(p²n)` reference.
pub fn memory_vs_p(records: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    let mut lines = Vec::new();
    let mut fit = Vec::new();
    for (k, by_p) in series(records) {
        let mut pts = Vec::new();
        for (p, n, rs) in by_p.values() {
            let mut mem: Vec<u64> = rs.iter().map(|r| r.peak_mem_bits).collect();
            mem.sort_unstable();
            let med = mem[(mem.len() - 1) / 2].max(1) as f64;
            pts.push((*p, med));
            if *p > 0.0 {
                fit.push((*p, *n, med));
            }
        }
        lines.push((k, pts));
    }
    // Least squares in log space for c in c/(p²n).
    let c =
        if fit.is_empty() { 1.0 } else { (fit.iter().map(|(p, n, m)| (m * p * p * *n as f64).ln()).sum::<f64>() / fit.len() as f64).exp() };
    let ps: Vec<f64> = fit.iter().map(|f| f.0).collect();
    let (lo, hi) = span(ps.iter().cloned().fold(f64::INFINITY, f64::min), ps.iter().cloned().fold(0.0, f64::max));
    let (lo, hi) = if lo.is_finite() && lo > 0.0 { (lo, hi) } else { (1e-6, 1.0) };
    let reference: Vec<(f64, f64)> = fit.iter().map(|(p, n, _)| (*p, c / (p * p * *n as f64))).collect();
    let ys: Vec<f64> = lines.iter().flat_map(|(_, v)| v.iter().map(|x| x.1)).chain(reference.iter().map(|x| x.1)).collect();
    let (ylo, yhi) = span(ys.iter().cloned().fold(f64::INFINITY, f64::min).max(0.5), ys.iter().cloned().fold(1.0, f64::max));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("peak memory against p", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((lo..hi).log_scale(), (ylo..yhi).log_scale())
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("p").y_desc("bits (median)").draw().map_err(plot_err)?;
    for (i, ((algo, prof), pts)) in lines.into_iter().enumerate() {
        let col = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.clone(), col))
            .map_err(plot_err)?
            .label(format!("{algo} ({prof})"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], col));
        chart.draw_series(pts.into_iter().map(|xy| Circle::new(xy, 3, col.filled()))).map_err(plot_err)?;
    }
    let mut reference = reference;
    reference.sort_by(|a, b| a.0.total_cmp(&b.0));
    let grey = RGBColor(120, 120, 120);
    chart
        .draw_series(LineSeries::new(reference, grey.stroke_width(1)))
        .map_err(plot_err)?
        .label(format!("{c:.3e}/(p²n)"))
        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], grey));
    chart.configure_series_labels().background_style(WHITE).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Empirical survival with the `e^{-r/5}` reference. Zero rates are drawn
/// at `1/(2·at risk)`, below anything observable.
pub fn survival(rows: &[SurvivalRow], path: &Path) -> Result<(), HarnessError> {
    let pts: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.r as f64, if r.survived == 0 { 0.5 / r.at_risk.max(1) as f64 } else { r.rate })).collect();
    let rmax = rows.iter().map(|r| r.r).max().unwrap_or(1).max(1) as f64;
    let reference: Vec<(f64, f64)> = (0..=200).map(|i| rmax * i as f64 / 200.0).map(|r| (r, (-r / 5.0).exp())).collect();
    let ylo = pts.iter().chain(&reference).map(|p| p.1).fold(1.0, f64::min).max(1e-300);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("counter survival under D0", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..rmax * 1.05, (ylo / 2.0..2.0).log_scale())
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("rounds r").y_desc("Pr[survive r]").draw().map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(reference, RED))
        .map_err(plot_err)?
        .label("e^(-r/5)")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    chart
        .draw_series(pts.iter().map(|&xy| Circle::new(xy, 4, BLUE.filled())))
        .map_err(plot_err)?
        .label("empirical")
        .legend(|(x, y)| Circle::new((x + 10, y), 4, BLUE.filled()));
    chart.configure_series_labels().background_style(WHITE).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Writes every figure the inputs support into `dir`.
pub fn report_plots(records: &[TrialRecord], survival_rows: Option<&[SurvivalRow]>, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    if !records.is_empty() {
        let e = dir.join("error_vs_p.svg");
        error_vs_p(records, &e)?;
        let m = dir.join("memory_vs_p.svg");
        memory_vs_p(records, &m)?;
        out.push(e);
        out.push(m);
    }
    if let Some(rows) = survival_rows.filter(|r| !r.is_empty()) {
        let s = dir.join("survival.svg");
        survival(rows, &s)?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: u64, dist: &str, p: f64, out: &str, mem: u64) -> TrialRecord {
        TrialRecord {
            trial_id: id,
            dist: dist.into(),
            algo: "m2".into(),
            profile: "desk".into(),
            t: 1 << 30,
            n: 1 << 16,
            p,
            output: out.into(),
            truth: if dist == "d0" { 0 } else { 1 },
            peak_mem_bits: mem,
            runtime_ms: 0,
            abort: out == "abort",
        }
    }

    #[test]
    fn single_record_plots() {
        let dir = tempfile::tempdir().unwrap();
        let files = report_plots(&[record(0, "d0", 0.01, "0", 40)], None, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        for f in files {
            assert!(std::fs::read_to_string(f).unwrap().starts_with("<svg"));
        }
    }

    #[test]
    fn survival_plot_draws_reference() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            SurvivalRow { r: 0, survived: 10, at_risk: 10, rate: 1.0, reference: 1.0 },
            SurvivalRow { r: 150, survived: 0, at_risk: 10, rate: 0.0, reference: (-30f64).exp() },
        ];
        let files = report_plots(&[], Some(&rows), dir.path()).unwrap();
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert!(svg.contains("e^(-r/5)"));
    }

    #[test]
    fn memory_plot_has_reference() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = [0.01, 0.005, 0.002].iter().enumerate().map(|(i, &p)| record(i as u64, "d1", p, "1", 100 + i as u64)).collect();
        let path = dir.path().join("m.svg");
        memory_vs_p(&recs, &path).unwrap();
        assert!(std::fs::read_to_string(path).unwrap().contains("/(p²n)"));
    }
}
