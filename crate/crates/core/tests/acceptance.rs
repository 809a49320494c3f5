//! End-to-end acceptance: one PASS/FAIL line per numbered target.
//! Runs as a plain binary so the lines show in `cargo test` output.

use solmanifold_core::experiments::{run, ExperimentConfig, ExperimentKind, ExperimentReport};
use solmanifold_core::soliton::phi;
use solmanifold_core::{ground_state, RadialField, RadialGrid};
use std::f64::consts::PI;
use std::time::Instant;

struct Line {
    id: &'static str,
    title: &'static str,
    passed: bool,
    informational: bool,
    detail: String,
}

impl Line {
    fn print(&self) {
        let verdict = match (self.passed, self.informational) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (informational)",
        };
        println!("{verdict} [{}] {}: {}", self.id, self.title, self.detail);
    }
}

fn from_reports(id: &'static str, title: &'static str, reports: &[ExperimentReport]) -> Line {
    let mut parts = Vec::new();
    let mut passed = true;
    for r in reports {
        passed &= r.passed;
        for c in r.checks.iter().filter(|c| !c.informational) {
            if !c.passed {
                parts.push(format!("failed `{}` = {:.4e}", c.name, c.value));
            }
        }
        for rec in r.records.iter().filter(|x| x.error.is_some()) {
            parts.push(format!("run `{}` errored: {}", rec.label, rec.error.as_deref().unwrap_or("")));
        }
        let n = r.checks.iter().filter(|c| !c.informational).count();
        let ok = r.checks.iter().filter(|c| !c.informational && c.passed).count();
        parts.insert(0, format!("{} {ok}/{n} checks", r.config.experiment.name()));
    }
    Line { id, title, passed, informational: false, detail: parts.join("; ") }
}

fn experiment(kind: ExperimentKind) -> ExperimentReport {
    run(&ExperimentConfig::default_for(kind)).unwrap_or_else(|e| panic!("{}: {e}", kind.name()))
}

fn value(r: &ExperimentReport, prefix: &str) -> f64 {
    r.checks.iter().find(|c| c.name.starts_with(prefix)).map_or(f64::NAN, |c| c.value)
}

/// max |−Δ_hφ − φ⁵| over B_{R/2}.
fn soliton_residual(radius: f64, n: usize) -> f64 {
    let g = RadialGrid::new(radius, n).unwrap();
    let p = RadialField::from_fn(g, |r| phi(r, 1.0).unwrap());
    let lap = p.laplacian();
    let half = g.ball_len(radius / 2.0);
    (0..half).map(|j| (lap.values()[j] + p.values()[j].powi(5)).abs()).fold(0.0, f64::max)
}

fn soliton_identities() -> Line {
    let res: Vec<f64> = [401, 801, 1601].iter().map(|&n| soliton_residual(20.0, n)).collect();
    let ratios = [res[0] / res[1], res[1] / res[2]];
    let order_ok = ratios.iter().all(|q| (q - 4.0).abs() < 0.5);
    let s = ground_state(&RadialGrid::new(200.0, 8001).unwrap()).unwrap();
    let exact = PI * 3f64.powf(0.25);
    let rel = (s.pairing_v_dadphi - exact).abs() / exact;
    Line {
        id: "1",
        title: "soliton identities",
        passed: order_ok && rel < 1e-4,
        informational: false,
        detail: format!(
            "residual ratios per dr-halving {:.3}, {:.3} (target 4 ± 0.5); ⟨V,∂ₐφ⟩ = {:.10} vs π·3^(1/4) = {exact:.10}, rel {rel:.2e} (< 1e-4)",
            ratios[0], ratios[1], s.pairing_v_dadphi
        ),
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let want = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut push = |l: Line| {
        l.print();
        lines.push(l);
    };
    use ExperimentKind::*;
    if want("1") {
        push(soliton_identities());
    }
    if want("2") {
        push(from_reports("2", "spectrum", &[experiment(Spectrum)]));
    }
    if want("3") {
        push(from_reports("3", "energy conservation", &[experiment(EnergyConservation)]));
    }
    if want("3s") {
        push(from_reports("3s", "stationary soliton", &[experiment(Stationarity)]));
    }
    if want("4") {
        push(from_reports("4", "free reverse Strichartz", &[experiment(StrichartzFree)]));
    }
    if want("4p") {
        push(from_reports("4p", "perturbed remainder Strichartz", &[experiment(StrichartzPerturbed)]));
    }
    if want("5") {
        push(from_reports("5", "secular decomposition", &[experiment(Secular)]));
    }
    if want("6") {
        let r = experiment(PairingIdentity);
        let mut l = from_reports("6", "pairing identity", std::slice::from_ref(&r));
        l.detail = format!("{}; φ⁵ relative error {:.3e} (< 1e-2)", l.detail, value(&r, "pairing identity for ψ₁=phi5"));
        push(l);
    }
    if want("7") {
        let r = experiment(HScaling);
        let mut l = from_reports("7", "manifold quadratic law", std::slice::from_ref(&r));
        l.detail = format!(
            "{}; slope {:.4} (2 ± 0.1), max |h_picard − h_shoot|/ε² {:.3e} (< 1e-3)",
            l.detail,
            value(&r, "log-log slope"),
            value(&r, "max |h_picard")
        );
        push(l);
    }
    if want("8") {
        push(from_reports("8", "codimension-one structure", &[experiment(Codim1)]));
    }
    if want("9") {
        push(from_reports("9", "contraction", &[experiment(Contraction)]));
    }
    let mut adot = None;
    if want("10") {
        let a = experiment(AdotL1);
        push(from_reports("10", "on-manifold stability and Lipschitz dependence", &[a.clone(), experiment(Lipschitz)]));
        adot = Some(a);
    }
    if want("11") {
        push(from_reports("11", "weighted growth", &[experiment(WeightedGrowth)]));
    }
    if let Some(a) = adot {
        let tv: Vec<_> = a.checks.iter().filter(|c| c.informational).collect();
        push(Line {
            id: "10i",
            title: "TV of extracted a(t) against ‖ȧ‖_L¹ within 5%",
            passed: tv.iter().all(|c| c.passed),
            informational: true,
            detail: tv.iter().map(|c| format!("{:.3}", c.value)).collect::<Vec<_>>().join(", ") + " relative gap",
        });
    }
    let failed: Vec<&str> = lines.iter().filter(|l| !l.passed && !l.informational).map(|l| l.id).collect();
    println!("acceptance: {} lines, {} failed, {:.1}s", lines.len(), failed.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
