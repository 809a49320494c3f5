//! Declarative experiment runner: TOML configs, sweeps on a worker pool,
//! CSV/JSON reports and gnuplot scripts.

mod report;
mod runs;

pub use report::{fit_line, Check, ExperimentReport, Fit, RunRecord, Table};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Stationarity,
    EnergyConservation,
    StrichartzFree,
    StrichartzPerturbed,
    Secular,
    PairingIdentity,
    HScaling,
    Codim1,
    Lipschitz,
    Contraction,
    AdotL1,
    WeightedGrowth,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 13] = [
        ExperimentKind::Spectrum,
        ExperimentKind::Stationarity,
        ExperimentKind::EnergyConservation,
        ExperimentKind::StrichartzFree,
        ExperimentKind::StrichartzPerturbed,
        ExperimentKind::Secular,
        ExperimentKind::PairingIdentity,
        ExperimentKind::HScaling,
        ExperimentKind::Codim1,
        ExperimentKind::Lipschitz,
        ExperimentKind::Contraction,
        ExperimentKind::AdotL1,
        ExperimentKind::WeightedGrowth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Stationarity => "stationarity",
            ExperimentKind::EnergyConservation => "energy_conservation",
            ExperimentKind::StrichartzFree => "strichartz_free",
            ExperimentKind::StrichartzPerturbed => "strichartz_perturbed",
            ExperimentKind::Secular => "secular",
            ExperimentKind::PairingIdentity => "pairing_identity",
            ExperimentKind::HScaling => "h_scaling",
            ExperimentKind::Codim1 => "codim1",
            ExperimentKind::Lipschitz => "lipschitz",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::AdotL1 => "adot_l1",
            ExperimentKind::WeightedGrowth => "weighted_growth",
        }
    }

    /// What the sweep values mean for this experiment.
    pub fn sweep_meaning(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum | ExperimentKind::Stationarity => "soliton scale a",
            ExperimentKind::EnergyConservation => "amplitude λ of ψ₀ = λφ",
            ExperimentKind::StrichartzFree | ExperimentKind::StrichartzPerturbed => "grid refinement factor",
            ExperimentKind::Secular | ExperimentKind::PairingIdentity => "horizon T",
            ExperimentKind::Lipschitz => "data distance δ",
            _ => "perturbation amplitude ε",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Usage(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "R")]
    pub radius: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Defaults to dr.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "R_obs", default = "default_r_obs")]
    pub r_obs: f64,
}

fn default_r_obs() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFamily {
    Ball,
    Bump,
    Phi5,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub family: DataFamily,
    /// Bump centre.
    #[serde(default = "one")]
    pub center: f64,
    /// Bump width.
    #[serde(default = "one")]
    pub width: f64,
    /// Members of a randomized family.
    #[serde(default = "twenty")]
    pub count: usize,
    /// Base amplitude where the sweep varies something else.
    #[serde(default = "milli")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}
fn twenty() -> usize {
    20
}
fn milli() -> f64 {
    1e-3
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { family: DataFamily::Bump, center: 1.0, width: 1.0, count: 20, amplitude: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub sweep: Vec<f64>,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub data_family: DataConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// One static problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config { path: "<string>".into(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config { path: path.display().to_string(), msg: e.to_string() })?;
        toml::from_str(&text).map_err(|e| Error::Config { path: path.display().to_string(), msg: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Reference configuration of each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let (radius, n, horizon, sweep): (f64, usize, f64, Vec<f64>) = match kind {
            Spectrum => (50.0, 16001, 0.0, vec![1.0, 4.0]),
            Stationarity => (40.0, 1601, 20.0, vec![1.0]),
            EnergyConservation => (40.0, 1601, 50.0, vec![0.9]),
            StrichartzFree | StrichartzPerturbed => (20.0, 801, 10.0, vec![1.0, 2.0]),
            Secular => (110.0, 8801, 100.0, vec![25.0, 50.0, 100.0]),
            PairingIdentity => (200.0, 8001, 100.0, vec![100.0]),
            HScaling => (40.0, 3201, 20.0, vec![1e-4, 2e-4, 4e-4, 8e-4]),
            Codim1 => (40.0, 1601, 20.0, vec![1e-3]),
            Lipschitz => (40.0, 1601, 20.0, vec![1e-4, 1e-3]),
            Contraction => (40.0, 1601, 20.0, vec![1e-3, 3e-4, 1e-4]),
            AdotL1 => (40.0, 3201, 20.0, vec![1e-3, 3e-3, 1e-2]),
            WeightedGrowth => (40.0, 1601, 20.0, vec![1e-3, 3e-3, 1e-2]),
        };
        let family = match kind {
            StrichartzFree | StrichartzPerturbed => DataFamily::Random,
            PairingIdentity => DataFamily::Phi5,
            _ => DataFamily::Bump,
        };
        ExperimentConfig {
            experiment: kind,
            seed: 20240601,
            sweep,
            grid: GridConfig { radius, n },
            time: TimeConfig { horizon, dt: None, r_obs: 10.0 },
            data_family: DataConfig { family, ..DataConfig::default() },
            output_dir: None,
            workers: None,
        }
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.radius, self.grid.n)
    }

    pub fn dt(&self) -> f64 {
        self.time.dt.unwrap_or(self.grid.radius / (self.grid.n.max(2) - 1) as f64)
    }

    fn uses_ball(&self) -> bool {
        !matches!(self.experiment, ExperimentKind::Spectrum | ExperimentKind::EnergyConservation | ExperimentKind::PairingIdentity)
    }
}

/// Static checks; an empty list means runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut flag = |field: &str, message: String| v.push(Violation { field: field.into(), message });
    if !(cfg.grid.radius > 0.0) {
        flag("grid.R", format!("must be positive, got {}", cfg.grid.radius));
    }
    if cfg.grid.n < 16 {
        flag("grid.n", format!("need at least 16 nodes, got {}", cfg.grid.n));
    }
    let dr = cfg.grid.radius / (cfg.grid.n.max(2) - 1) as f64;
    let dt = cfg.dt();
    if !(dt > 0.0) {
        flag("time.dt", format!("must be positive, got {dt}"));
    } else if dt > dr * (1.0 + 1e-10) {
        flag("time.dt", format!("CFL violated: dt = {dt} > dr = {dr}"));
    }
    if !(cfg.time.horizon >= 0.0) {
        flag("time.T", format!("must be non-negative, got {}", cfg.time.horizon));
    }
    if !(cfg.time.r_obs > 0.0) {
        flag("time.R_obs", format!("must be positive, got {}", cfg.time.r_obs));
    }
    if cfg.sweep.is_empty() {
        flag("sweep", "must not be empty".into());
    }
    if cfg.sweep.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        flag("sweep", "values must be finite and positive".into());
    }
    if cfg.workers == Some(0) {
        flag("workers", "must be at least 1".into());
    }
    use ExperimentKind::*;
    let horizon_need = match cfg.experiment {
        Secular | PairingIdentity => cfg.sweep.iter().cloned().fold(0.0, f64::max),
        _ => cfg.time.horizon,
    };
    if cfg.uses_ball() && cfg.time.r_obs + horizon_need > cfg.grid.radius + 1e-9 {
        flag("grid.R", format!("causality: R = {} < R_obs + T = {}", cfg.grid.radius, cfg.time.r_obs + horizon_need));
    }
    if cfg.experiment == PairingIdentity && horizon_need > cfg.grid.radius + 1e-9 {
        flag("sweep", format!("horizon {horizon_need} exceeds R = {}", cfg.grid.radius));
    }
    if matches!(cfg.experiment, Spectrum | Stationarity) && cfg.sweep.iter().any(|a| *a > 1e3) {
        flag("sweep", "soliton scales above 10³ are not resolvable".into());
    }
    if matches!(cfg.experiment, StrichartzFree | StrichartzPerturbed) && cfg.sweep.iter().any(|f| f.fract() != 0.0) {
        flag("sweep", "refinement factors must be integers".into());
    }
    if cfg.data_family.count == 0 {
        flag("data_family.count", "must be at least 1".into());
    }
    v
}

/// Runs the experiment and writes outputs when an output directory is set.
/// Failures of individual runs are recorded in the report.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let bad = validate(cfg);
    if !bad.is_empty() {
        return Err(Error::Usage(bad.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("; ")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("worker pool: {e}")))?;
    let report = pool.install(|| runs::execute(cfg));
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_runnable_and_round_trip() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::default_for(kind);
            assert!(validate(&cfg).is_empty(), "{}: {:?}", kind.name(), validate(&cfg));
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn cfl_violation_is_flagged() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Codim1);
        cfg.time.dt = Some(2.0 * cfg.grid.radius / (cfg.grid.n - 1) as f64);
        let v = validate(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "time.dt");
    }

    #[test]
    fn causality_violation_is_flagged() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::HScaling);
        cfg.time.horizon = 35.0;
        assert!(validate(&cfg).iter().any(|v| v.field == "grid.R" && v.message.contains("causality")));
        let mut sec = ExperimentConfig::default_for(ExperimentKind::Secular);
        sec.sweep.push(200.0);
        assert!(validate(&sec).iter().any(|v| v.field == "grid.R"));
    }

    #[test]
    fn empty_sweep_is_flagged() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Spectrum);
        cfg.sweep.clear();
        assert!(validate(&cfg).iter().any(|v| v.field == "sweep"));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut text = ExperimentConfig::default_for(ExperimentKind::Codim1).to_toml();
        text = text.replace("[time]", "[time]\nhorizon_typo = 3.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config { .. })));
        let top = format!("colour = \"red\"\n{}", ExperimentConfig::default_for(ExperimentKind::Codim1).to_toml());
        assert!(ExperimentConfig::from_toml_str(&top).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let text = ExperimentConfig::default_for(ExperimentKind::Lipschitz).to_toml().replace("seed = 20240601\n", "");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn invalid_config_is_a_usage_error() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Stationarity);
        cfg.grid.n = 3;
        assert!(matches!(run(&cfg), Err(Error::Usage(_))));
    }

    fn small_pairing() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::PairingIdentity);
        cfg.grid = GridConfig { radius: 40.0, n: 1601 };
        cfg.sweep = vec![20.0];
        cfg
    }

    #[test]
    fn csv_bodies_are_deterministic() {
        let dir = std::env::temp_dir().join(format!("solmanifold-det-{}", std::process::id()));
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::StrichartzFree);
        cfg.data_family.count = 4;
        cfg.time = TimeConfig { horizon: 4.0, dt: None, r_obs: 4.0 };
        cfg.grid = GridConfig { radius: 8.0, n: 321 };
        let mut bodies = Vec::new();
        for i in 0..2 {
            let mut c = cfg.clone();
            c.output_dir = Some(dir.join(i.to_string()));
            c.workers = Some(1 + 2 * i);
            run(&c).unwrap();
            let mut files: Vec<_> = std::fs::read_dir(dir.join(i.to_string()))
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            bodies.push(files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
        }
        assert!(!bodies[0].is_empty());
        assert_eq!(bodies[0], bodies[1]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_states_its_thresholds() {
        let rep = run(&small_pairing()).unwrap();
        assert!(!rep.checks.is_empty());
        for c in &rep.checks {
            assert!(c.threshold.is_finite());
            assert!(c.line().contains(&format!("{:.3e}", c.threshold)) || c.line().contains("within"));
        }
        assert!(rep.passed, "{}", rep.summary());
    }

    #[test]
    fn module_failures_become_failed_records() {
        // too short a horizon for the offset to show: shooting reports it, run() does not panic
        let mut bad = ExperimentConfig::default_for(ExperimentKind::Codim1);
        bad.grid = GridConfig { radius: 21.0, n: 841 };
        bad.time.horizon = 1.0;
        bad.sweep = vec![1e-3];
        let rep = run(&bad).unwrap();
        assert!(!rep.passed);
        assert!(rep.records.iter().any(|r| r.error.is_some()));
    }
}
