use super::ExperimentConfig;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// One sweep point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub param: f64,
    pub values: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(label: impl Into<String>, param: f64) -> Self {
        RunRecord { label: label.into(), param, values: BTreeMap::new(), error: None }
    }

    pub fn failed(label: impl Into<String>, param: f64, err: impl ToString) -> Self {
        RunRecord { error: Some(err.to_string()), ..RunRecord::new(label, param) }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn get(&self, key: &str) -> f64 {
        self.values.get(key).copied().unwrap_or(f64::NAN)
    }
}

/// Least-squares line y = intercept + slope·x.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Fit {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci95: [f64; 2],
    /// RMS of the residuals.
    pub residual: f64,
    pub points: usize,
}

fn t975(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    match dof {
        0 => f64::INFINITY,
        d if d <= 10 => T[d - 1],
        d if d <= 30 => 2.04 + 0.19 * (30 - d) as f64 / 20.0,
        _ => 1.96,
    }
}

pub fn fit_line(name: &str, xs: &[f64], ys: &[f64]) -> Fit {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (*x, *y)).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = pts.len().saturating_sub(2);
    let se = if dof > 0 { (ss / dof as f64 / sxx).sqrt() } else { f64::NAN };
    let half = t975(dof) * se;
    Fit {
        name: name.into(),
        slope,
        intercept,
        slope_stderr: se,
        ci95: [slope - half, slope + half],
        residual: (ss / n).sqrt(),
        points: pts.len(),
    }
}

/// A pass/fail statement with its threshold spelled out.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// One of `<`, `<=`, `>`, `within`.
    pub op: String,
    pub threshold: f64,
    pub target: Option<f64>,
    pub passed: bool,
    /// Reported but not counted towards the verdict.
    pub informational: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, op: "<".into(), threshold, target: None, passed: value < threshold, informational: false }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, op: ">".into(), threshold, target: None, passed: value > threshold, informational: false }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            op: "within".into(),
            threshold: tol,
            target: Some(target),
            passed: (value - target).abs() <= tol,
            informational: false,
        }
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn line(&self) -> String {
        let verdict = match (self.passed, self.informational) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (informational)",
        };
        match self.target {
            Some(t) => format!("{verdict} {}: {:.6e} within {:.1e} of {:.6e}", self.name, self.value, self.threshold, t),
            None => format!("{verdict} {}: {:.6e} {} {:.3e}", self.name, self.value, self.op, self.threshold),
        }
    }
}

/// A named series written to its own CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Log scale on the y axis of the generated plot.
    pub log_y: bool,
    pub log_x: bool,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, records: Vec<RunRecord>, fits: Vec<Fit>, checks: Vec<Check>, tables: Vec<Table>) -> Self {
        let passed = checks.iter().filter(|c| !c.informational).all(|c| c.passed) && records.iter().all(|r| r.error.is_none());
        ExperimentReport { config, records, fits, checks, tables, passed }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in self.records.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(s, "FAIL run {} ({}): {}", r.label, r.param, r.error.as_deref().unwrap_or(""));
        }
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        for f in &self.fits {
            let _ = writeln!(
                s,
                "fit {}: slope {:.4} ± {:.2e} (95% [{:.4}, {:.4}]), residual {:.2e}",
                f.name, f.slope, f.slope_stderr, f.ci95[0], f.ci95[1], f.residual
            );
        }
        s
    }

    /// `label,param,<value columns>` with one row per record.
    pub fn records_csv(&self) -> String {
        let mut keys: Vec<&String> = self.records.iter().flat_map(|r| r.values.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut s = String::from("label,param");
        for k in &keys {
            s.push(',');
            s.push_str(k);
        }
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{},{:.12e}", r.label, r.param);
            for k in &keys {
                let _ = write!(s, ",{:.12e}", r.get(k));
            }
            s.push('\n');
        }
        s
    }

    pub fn gnuplot(&self) -> String {
        let mut s =
            String::from("set datafile separator ','\nset key autotitle columnhead\nset grid\nset terminal pngcairo size 900,600\n");
        for t in &self.tables {
            let _ = writeln!(s, "\nset output '{}.png'", t.name);
            let _ = writeln!(s, "{}", if t.log_x { "set logscale x" } else { "unset logscale x" });
            let _ = writeln!(s, "{}", if t.log_y { "set logscale y" } else { "unset logscale y" });
            let _ = writeln!(s, "set xlabel '{}'", t.header.first().map(String::as_str).unwrap_or("x"));
            let cols: Vec<String> = (2..=t.header.len()).map(|c| format!("'{}.csv' using 1:{c} with linespoints", t.name)).collect();
            let _ = writeln!(s, "plot {}", cols.join(", \\\n     "));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::Error::Io(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("records.csv"), self.records_csv())?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("plot.gp"), self.gnuplot())?;
        std::fs::write(dir.join("SCHEMA.md"), schema(self))?;
        Ok(())
    }
}

fn schema(r: &ExperimentReport) -> String {
    let kind = r.config.experiment;
    let mut s = format!("# Output schema: {}\n\nSweep values are the {}.\n\n", kind.name(), kind.sweep_meaning());
    s.push_str("## records.csv\n\nOne row per sweep point or member.\n\n| column | meaning |\n|---|---|\n");
    s.push_str("| label | run identifier |\n| param | sweep value of the run |\n");
    let mut keys: Vec<&String> = r.records.iter().flat_map(|x| x.values.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let _ = writeln!(s, "| {k} | {} |", describe(k));
    }
    for t in &r.tables {
        let _ = writeln!(s, "\n## {}.csv\n\nColumns: {}.", t.name, t.header.join(", "));
    }
    s.push_str("\n## report.json\n\nConfig echo, records, fits (slope, intercept, standard error, 95% interval, residual RMS) and checks (value, operator, threshold, verdict).\n\n## plot.gp\n\ngnuplot script drawing every table CSV.\n");
    s
}

fn describe(key: &str) -> &'static str {
    match key {
        "k" => "ground-state rate k (eigenvalue −k²)",
        "residual" => "‖Hg + k²g‖₂",
        "negative_count" => "Sturm count of negative eigenvalues",
        "overlap" => "|⟨g, ∂ₐφ⟩|",
        "drift" => "max relative energy drift",
        "h_shoot" => "h from bisection shooting",
        "h_picard" => "h from the Picard fixed point",
        "diff_over_eps2" => "|h_picard − h_shoot|/ε²",
        "rate" => "fitted exponential rate of the g-overlap",
        "ratio" => "X-distance contraction ratio",
        "adot_l1" => "‖ȧ‖_{L¹}",
        "adot_sup" => "‖ȧ‖_{L^∞}",
        _ => "see experiment description in the README",
    }
}
