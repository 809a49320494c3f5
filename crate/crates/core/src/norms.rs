//! Discrete Lorentz, mixed space-time, Kato and energy functionals.

use crate::error::{Error, Result};
use crate::grid::{h1_raw, inner_raw, RadialField};
use crate::propagators::SpaceTimeField;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Inner (time) norm of a mixed norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeNorm {
    Sup,
    L2,
    L1,
}

/// Outer (space) norm of a mixed norm, over the stored ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpaceNorm {
    Lorentz { p: f64, q: f64 },
    Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: String,
    pub value: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "R_obs")]
    pub r_obs: f64,
    pub n: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl NormReport {
    pub fn of(kind: &str, value: f64, u: &SpaceTimeField) -> Self {
        NormReport {
            kind: kind.to_string(),
            value,
            radius: u.grid().radius(),
            r_obs: u.r_obs(),
            n: u.grid().len(),
            dt: u.dt(),
            horizon: u.horizon(),
        }
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) || !(q >= 1.0) {
        return Err(Error::Usage(format!("Lorentz exponents out of range: p = {p}, q = {q}")));
    }
    Ok(())
}

/// ‖f‖_{p,q} for samples with the given cell measures, evaluating the
/// rearrangement integral exactly for the piecewise-constant f*.
pub fn lorentz_raw(values: &[f64], measure: &[f64], p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| measure[i] > 0.0).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let mut t_prev = 0.0;
    if q.is_infinite() {
        let mut best: f64 = 0.0;
        for &i in &idx {
            let t = t_prev + measure[i];
            best = best.max(t.powf(1.0 / p) * values[i].abs());
            t_prev = t;
        }
        return Ok(best);
    }
    let e = q / p;
    let mut acc = 0.0;
    for &i in &idx {
        let t = t_prev + measure[i];
        let c = values[i].abs();
        if c > 0.0 {
            acc += c.powf(q) * (t.powf(e) - t_prev.powf(e));
        }
        t_prev = t;
    }
    Ok((acc / e).powf(1.0 / q))
}

pub fn lorentz_norm(f: &RadialField, p: f64, q: f64) -> Result<f64> {
    lorentz_raw(f.values(), &f.grid().cell_volumes(), p, q)
}

fn time_norm(series: impl Iterator<Item = f64>, steps: usize, dt: f64, kind: TimeNorm) -> f64 {
    let mut acc: f64 = 0.0;
    for (m, v) in series.enumerate() {
        let w = if m == 0 || m + 1 == steps { 0.5 } else { 1.0 };
        match kind {
            TimeNorm::Sup => acc = acc.max(v.abs()),
            TimeNorm::L2 => acc += w * v * v,
            TimeNorm::L1 => acc += w * v.abs(),
        }
    }
    match kind {
        TimeNorm::Sup => acc,
        TimeNorm::L2 => (acc * dt).sqrt(),
        TimeNorm::L1 => acc * dt,
    }
}

/// Time norm at every stored node.
pub fn time_profile(u: &SpaceTimeField, inner: TimeNorm) -> Vec<f64> {
    let steps = u.steps();
    (0..u.nodes()).map(|j| time_norm((0..steps).map(|m| u.value(j, m)), steps, u.dt(), inner)).collect()
}

/// ‖u‖ in the outer space norm of the inner time norm, over the stored ball.
pub fn mixed_norm(u: &SpaceTimeField, outer: SpaceNorm, inner: TimeNorm) -> Result<f64> {
    let prof = time_profile(u, inner);
    match outer {
        SpaceNorm::Sup => Ok(prof.iter().fold(0.0, |m, v| m.max(*v))),
        SpaceNorm::Lorentz { p, q } => {
            let vol = u.grid().cell_volumes();
            lorentz_raw(&prof, &vol[..u.nodes()], p, q)
        }
    }
}

/// The intersection norm L^{6,2}_x L^∞_t + L^∞_x L²_t + L^∞_x L¹_t.
pub fn dispersive_norm(u: &SpaceTimeField) -> Result<f64> {
    Ok(mixed_norm(u, SpaceNorm::Lorentz { p: 6.0, q: 2.0 }, TimeNorm::Sup)?
        + mixed_norm(u, SpaceNorm::Sup, TimeNorm::L2)?
        + mixed_norm(u, SpaceNorm::Sup, TimeNorm::L1)?)
}

/// (Σ_m Σ_j |u|⁸ |cell_j| dt)^{1/8} with trapezoid weights in time.
pub fn spacetime_l8(u: &SpaceTimeField) -> f64 {
    let vol = u.grid().cell_volumes();
    let steps = u.steps();
    let mut acc = 0.0;
    for m in 0..steps {
        let w = if m == 0 || m + 1 == steps { 0.5 } else { 1.0 };
        let s: f64 = u.slice(m).iter().zip(&vol).map(|(v, c)| v.abs().powi(8) * c).sum();
        acc += w * s;
    }
    (acc * u.dt()).powf(0.125)
}

/// sup_y 4π∫|f(r)| r²/max(r,|y|) dr over grid radii y.
pub fn kato_norm(f: &RadialField) -> f64 {
    let g = f.grid();
    let n = g.len();
    let dr = g.dr();
    let a: Vec<f64> = (0..n).map(|j| f.values()[j].abs() * g.r(j) * g.r(j)).collect();
    let b: Vec<f64> = (0..n).map(|j| f.values()[j].abs() * g.r(j)).collect();
    let mut inner = vec![0.0; n];
    for j in 1..n {
        inner[j] = inner[j - 1] + 0.5 * dr * (a[j - 1] + a[j]);
    }
    let mut outer = vec![0.0; n];
    for j in (0..n - 1).rev() {
        outer[j] = outer[j + 1] + 0.5 * dr * (b[j] + b[j + 1]);
    }
    let mut best = outer[0];
    for j in 1..n {
        best = best.max(inner[j] / g.r(j) + outer[j]);
    }
    4.0 * PI * best
}

/// E = ½‖∇ψ‖² + ½‖ψ_t‖² − ⅙∫ψ⁶.
pub fn energy(psi: &RadialField, psi_t: &RadialField) -> Result<f64> {
    psi.grid().same(psi_t.grid())?;
    let g = psi.grid();
    let p6: Vec<f64> = psi.values().iter().map(|v| v.powi(6)).collect();
    let ones = vec![1.0; g.len()];
    Ok(0.5 * h1_raw(g, &psi.w()) + 0.5 * inner_raw(g, psi_t.values(), psi_t.values()) - inner_raw(g, &p6, &ones) / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::propagators::free_sine_trajectory;
    use crate::soliton::{dphi_da_raw, phi_raw};
    use proptest::prelude::*;

    #[test]
    fn indicator_closed_form() {
        let g = RadialGrid::new(5.0, 501).unwrap();
        let f = RadialField::from_fn(g, |r| if r <= 1.0 + 1e-12 { 1.0 } else { 0.0 });
        let vol: f64 = g.cell_volumes()[..g.ball_len(1.0)].iter().sum();
        for &(p, q) in &[(2.0f64, 1.0f64), (6.0, 2.0), (1.5, 1.0), (3.0, 7.0)] {
            let expect = (p / q).powf(1.0 / q) * vol.powf(1.0 / p);
            let got = lorentz_norm(&f, p, q).unwrap();
            assert!(((got - expect) / expect).abs() < 1e-12);
        }
        let sup = lorentz_norm(&f, 3.0, f64::INFINITY).unwrap();
        assert!((sup - vol.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(lorentz_norm(&f, 0.5, 1.0).is_err());
    }

    #[test]
    fn phi_lorentz_62() {
        let mut vals = Vec::new();
        for &r in &[400.0, 800.0] {
            let g = RadialGrid::new(r, (r * 20.0) as usize + 1).unwrap();
            let p = RadialField::from_fn(g, |r| phi_raw(r, 1.0));
            vals.push(lorentz_norm(&p, 6.0, 2.0).unwrap());
        }
        assert!(((vals[1] - vals[0]) / vals[1]).abs() < 1e-3);
        assert!((vals[1] - 3.627290299390974).abs() < 2e-2, "{}", vals[1]);
    }

    #[test]
    fn kato_values() {
        let g = RadialGrid::new(4.0, 4001).unwrap();
        let f = RadialField::from_fn(g, |r| if r <= 1.0 + 1e-12 { 1.0 } else { 0.0 });
        assert!((kato_norm(&f) - 2.0 * PI).abs() < 4.0 * PI * g.dr());
        let h = |r: f64| (-r * r).exp();
        let k1 = kato_norm(&RadialField::from_fn(g, h));
        for &l in &[2.0, 4.0] {
            let kl = kato_norm(&RadialField::from_fn(g, move |r| h(l * r)));
            assert!((kl * l * l / k1 - 1.0).abs() < 1e-4);
        }
        let mut ks = Vec::new();
        for &r in &[50.0, 100.0, 200.0] {
            let g = RadialGrid::new(r, (r * 10.0) as usize + 1).unwrap();
            ks.push(kato_norm(&RadialField::from_fn(g, |r| dphi_da_raw(r, 1.0))));
            let p5 = kato_norm(&RadialField::from_fn(g, |r| phi_raw(r, 1.0).powi(5)));
            assert!(p5.is_finite() && p5 < 20.0);
        }
        let slope = (ks[2] / ks[0]).ln() / 4f64.ln();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn energy_values() {
        let g = RadialGrid::new(1000.0, 400001).unwrap();
        let z = RadialField::zeros(g);
        let e = |a: f64| energy(&RadialField::from_fn(g, |r| phi_raw(r, a)), &z).unwrap();
        let exact = 3f64.powf(1.5) * PI * PI / 12.0;
        let e1 = e(1.0);
        assert!(((e1 - exact) / exact).abs() < 1e-5, "{e1}");
        for &a in &[0.5, 2.0] {
            assert!(((e(a) - e1) / e1).abs() < 1e-6, "{a} {}", e(a));
        }
        assert_eq!(energy(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn mixed_norm_collapses_and_factorizes() {
        let g = RadialGrid::new(20.0, 401).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r / 3.0).exp());
        let c = SpaceTimeField::constant(&f, 0.05, 40).unwrap();
        let a = mixed_norm(&c, SpaceNorm::Lorentz { p: 6.0, q: 2.0 }, TimeNorm::Sup).unwrap();
        assert!((a - lorentz_norm(&f, 6.0, 2.0).unwrap()).abs() < 1e-13);
        let h = |t: f64| (2.0 * t).sin() + 0.3;
        let sep = SpaceTimeField::from_fn(g, g.len(), 0.05, 40, |r, t| (-r * r / 3.0).exp() * h(t)).unwrap();
        let ht = time_norm((0..41).map(|m| h(m as f64 * 0.05)), 41, 0.05, TimeNorm::L2);
        let got = mixed_norm(&sep, SpaceNorm::Lorentz { p: 6.0, q: 2.0 }, TimeNorm::L2).unwrap();
        assert!((got - lorentz_norm(&f, 6.0, 2.0).unwrap() * ht).abs() < 1e-12);
    }

    #[test]
    fn interpolation_inequality_on_free_wave() {
        let g = RadialGrid::new(30.0, 1201).unwrap();
        let f = RadialField::from_fn(g, |r| (-(r - 1.0).powi(2)).exp());
        let u = free_sine_trajectory(&f, 15.0, g.dr(), 15.0).unwrap();
        let l8 = spacetime_l8(&u);
        let a = mixed_norm(&u, SpaceNorm::Lorentz { p: 6.0, q: 2.0 }, TimeNorm::Sup).unwrap();
        let b = mixed_norm(&u, SpaceNorm::Sup, TimeNorm::L2).unwrap();
        assert!(l8 <= a.powf(0.75) * b.powf(0.25));
    }

    proptest! {
        #[test]
        fn lorentz_diagonal_is_lp(vals in proptest::collection::vec(-3.0f64..3.0, 20..60), p in 1.0f64..8.0) {
            let g = RadialGrid::new(4.0, vals.len()).unwrap();
            let f = RadialField::new(g, vals.clone()).unwrap();
            let vol = g.cell_volumes();
            let lp = vals.iter().zip(&vol).map(|(v, c)| v.abs().powf(p) * c).sum::<f64>().powf(1.0 / p);
            let got = lorentz_norm(&f, p, p).unwrap();
            prop_assert!((got - lp).abs() <= 1e-10 * lp.max(1e-300));
        }

        #[test]
        fn lorentz_monotone(vals in proptest::collection::vec(-3.0f64..3.0, 20..60), s in 0.0f64..1.0) {
            let g = RadialGrid::new(4.0, vals.len()).unwrap();
            let big = RadialField::new(g, vals.clone()).unwrap();
            let small = big.scale(s).map(|r, v| v * (-r).exp());
            prop_assert!(lorentz_norm(&small, 6.0, 2.0).unwrap() <= lorentz_norm(&big, 6.0, 2.0).unwrap() * (1.0 + 1e-12));
        }
    }
}
