//! Plain-text tables for calibration and backtest artifacts.

use std::fmt::Write;

use hawkes_impact::hawkes_estimator::MleResult;
use hawkes_impact::hawkes_model::PropagatorSpec;
use hawkes_impact::propagator_estimator::PropagatorFit;

use crate::files::{BacktestFile, CalibrationFile, DatasetInfo, Mode};

struct Table {
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: &str, header: &[&str]) -> Self {
        Self { title: title.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn row(&mut self, label: impl Into<String>, cells: Vec<String>) {
        let mut r = vec![label.into()];
        r.extend(cells);
        self.rows.push(r);
    }

    fn rule(&mut self) {
        self.rows.push(Vec::new());
    }

    fn render(&self, out: &mut String) {
        let n = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String], out: &mut String| {
            let padded: Vec<String> = (0..n)
                .map(|i| {
                    let c = cells.get(i).map_or("", String::as_str);
                    let pad = widths[i] - c.chars().count();
                    if i == 0 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "  {}", padded.join("   ").trim_end());
        };
        let total: usize = widths.iter().sum::<usize>() + 3 * n.saturating_sub(1);
        let _ = writeln!(out, "{}", self.title);
        line(&self.header, out);
        let _ = writeln!(out, "  {}", "-".repeat(total));
        for r in &self.rows {
            if r.is_empty() {
                let _ = writeln!(out, "  {}", "-".repeat(total));
            } else {
                line(r, out);
            }
        }
        out.push('\n');
    }
}

fn joined(values: &[f64], digits: usize) -> String {
    values.iter().map(|v| format!("{v:.digits$}")).collect::<Vec<_>>().join("/")
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

fn data_line(label: &str, d: &DatasetInfo, out: &mut String) {
    let _ = writeln!(out, "{label}: {} ({} windows, {} .. {}), T = {} h, tick = {}", d.dataset, d.n_windows, d.first_window, d.last_window, d.horizon, d.tick_size);
}

fn resilience_rows(t: &mut Table, tag: &str, fit: &PropagatorFit, spec: &PropagatorSpec, with_nu: bool) {
    t.row(format!("γ_{tag}"), vec![format!("{:.2}", spec.gamma)]);
    t.row(format!("ρ_{tag}"), vec![joined(&spec.rhos, 1)]);
    t.row(format!("λ_{tag}"), vec![joined(&spec.lambdas, 2)]);
    if with_nu {
        t.row(format!("ν_{tag}"), vec![format!("{:.2}", spec.nu)]);
    }
    t.row(format!("σ_{tag}"), vec![format!("{:.4}", fit.sigma_hat)]);
    t.row(format!("r²_{tag}"), vec![pct(fit.r2)]);
}

fn intensity_rows(t: &mut Table, tag: &str, fit: &MleResult, weights: bool) {
    let s = &fit.spec;
    t.row(format!("β_{tag}"), vec![joined(&s.betas, 1)]);
    if weights {
        t.row(format!("w_{tag}"), vec![joined(&s.weights, 3)]);
    }
    t.row(format!("κ∞_{tag}"), vec![format!("{:.1}", s.kappa_inf)]);
    t.row(format!("φs_{tag}"), vec![joined(&s.phi_s, 1)]);
    t.row(format!("φc_{tag}"), vec![joined(&s.phi_c, 1)]);
    t.row(format!("L_{tag}"), vec![format!("{:.4}", fit.loglik_per_point)]);
}

pub fn render_calibration(file: &CalibrationFile) -> String {
    let mut out = String::new();
    data_line("dataset", &file.data, &mut out);
    let _ = writeln!(out, "config: {}\n", &file.config_hash[..16.min(file.config_hash.len())]);
    let cal = &file.calibration;
    let prop = &cal.propagator;

    let mut lag = Table::new("Adjustment lag", &["", "Calib."]);
    lag.row("Δ* (sec)", vec![format!("{}", prop.lag_secs)]);
    lag.rule();
    for s in &prop.lag_table {
        lag.row(format!("r²_multi at {} s", s.lag_secs), vec![pct(s.r2)]);
    }
    lag.render(&mut out);

    let mut res = Table::new("Resilience", &["", "Calib."]);
    res.row("Δ* (sec)", vec![format!("{}", prop.lag_secs)]);
    res.rule();
    if let Some(spec) = &prop.multi.spec {
        resilience_rows(&mut res, "multi", &prop.multi, spec, true);
        res.rule();
    }
    if let Some(spec) = &prop.mono.spec {
        resilience_rows(&mut res, "mono", &prop.mono, spec, false);
    }
    if !prop.mono.identified {
        res.row("mono decay", vec!["not identified".into()]);
    }
    if let Some(u) = &prop.unconstrained {
        res.rule();
        res.row("r²_free", vec![pct(u.r2)]);
    }
    res.render(&mut out);

    let hk = &cal.hawkes;
    let mut marks = Table::new("Marks", &["", "Calib."]);
    for split in &hk.selection.splits {
        marks.row(format!("L_{}", split.mark_type.name()), vec![format!("{:.4}", split.loglik_per_point)]);
    }
    marks.rule();
    let chosen = if hk.selection.tie { format!("{} (tie)", hk.selection.chosen.name()) } else { hk.selection.chosen.name().to_string() };
    marks.row("Marks type", vec![chosen]);
    marks.render(&mut out);

    let mut intensity = Table::new("Intensity", &["", "Calib."]);
    intensity.row("Marks type", vec![hk.multi.spec.mark_type.name().to_string()]);
    intensity.rule();
    intensity_rows(&mut intensity, "multi", &hk.multi, true);
    intensity.rule();
    intensity_rows(&mut intensity, "mono", &hk.mono, false);
    intensity.rule();
    intensity.row("BR", vec![format!("{:.3}", hk.multi.branching_ratio)]);
    intensity.row("DBR", vec![format!("{:.3}", hk.multi.directional_branching_ratio)]);
    intensity.render(&mut out);

    if let Some(p) = &file.pms {
        let mut pms = Table::new("Price manipulation check", &["", "Calib."]);
        pms.row("regime", vec![format!("{:?}", p.regime)]);
        pms.row("transient fraction", vec![format!("{:.3}", p.transient_fraction)]);
        pms.row("largest residual", vec![format!("{:.4e}", p.max_residual())]);
        pms.render(&mut out);
    }
    out
}

pub fn render_backtest(file: &BacktestFile) -> String {
    let mut out = String::new();
    data_line("traded on", &file.data, &mut out);
    data_line("fitted on", &file.calibrated_on, &mut out);
    let mode = match file.mode {
        Mode::InSample => "in-sample",
        Mode::OutOfSample => "out-of-sample",
    };
    let _ = writeln!(out, "mode: {mode}\n");

    let mut strategies: Vec<_> = file.runs.iter().map(|r| r.strategy).collect();
    strategies.dedup();
    let penalties = [false, true];
    let present: Vec<bool> = penalties.into_iter().filter(|p| file.runs.iter().any(|r| r.config.half_tick_penalty == *p)).collect();
    let header: Vec<&str> = std::iter::once("").chain(present.iter().map(|p| if *p { "+ bid-ask" } else { "Midprice" })).collect();
    let mut t = Table::new("Strategies", &header);
    for (i, kind) in strategies.iter().enumerate() {
        if i > 0 {
            t.rule();
        }
        let tag = match kind.name() {
            "multi" => "Multi",
            "mono" => "Mono",
            _ => "Poisson",
        };
        let cell = |f: &dyn Fn(&hawkes_impact::backtest::BacktestReport) -> String| -> Vec<String> {
            present
                .iter()
                .map(|p| {
                    file.runs
                        .iter()
                        .find(|r| r.strategy == *kind && r.config.half_tick_penalty == *p)
                        .map_or_else(|| "-".to_string(), |r| f(&r.report))
                })
                .collect()
        };
        t.row(format!("Sharpe ({tag})"), cell(&|r| format!("{:.3}", r.sharpe)));
        t.row(format!("Proba. ({tag})"), cell(&|r| format!("{:.1}%", 100.0 * r.proba)));
        t.row(format!("Skew ({tag})"), cell(&|r| format!("{:.3}", r.skew)));
        t.row(format!("Kurtosis ({tag})"), cell(&|r| format!("{:.3}", r.kurtosis)));
    }
    t.render(&mut out);
    out
}
