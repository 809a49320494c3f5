//! Nonlinear flow near the soliton family, modulation extraction, the
//! manifold constraint, shooting for h and the Picard map Φ.

use crate::error::{Error, Result};
use crate::grid::{field_from_w, h1_raw, inner_raw, inner_w, RadialField, RadialGrid};
use crate::norms::{dispersive_norm, NormReport};
use crate::propagators::{check_budget, free_cosine, free_duhamel, free_sine, steps_for, EvolveOptions, Leapfrog, SpaceTimeField};
use crate::soliton::{defect_raw, dphi_da_raw, phi_raw, potential_raw, SolitonScale};
use crate::spectral::SpectralData;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// N(u,φ) = 10φ³u² + 10φ²u³ + 5φu⁴ + u⁵.
#[inline]
pub(crate) fn n_raw(u: f64, p: f64) -> f64 {
    u * u * (10.0 * p * p * p + u * (10.0 * p * p + u * (5.0 * p + u)))
}

pub fn nonlinearity(u: &RadialField, phi_a: &RadialField) -> Result<RadialField> {
    u.grid().same(phi_a.grid())?;
    let v = u.values().iter().zip(phi_a.values()).map(|(&x, &p)| n_raw(x, p)).collect();
    RadialField::new(*u.grid(), v)
}

/// ‖⟨x⟩u₀‖_{Ḣ¹} + ‖⟨x⟩u₁‖_{L²}.
pub fn data_norm(u0: &RadialField, u1: &RadialField) -> f64 {
    use crate::grid::WeightedKind::{HdotOne, LTwo};
    u0.weighted_norm(HdotOne) + u1.weighted_norm(LTwo)
}

fn profile(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..grid.len()).map(|j| f(grid.r(j))).collect()
}

fn to_w(grid: &RadialGrid, v: &[f64]) -> Vec<f64> {
    v.iter().enumerate().map(|(j, x)| grid.r(j) * x).collect()
}

/// Interior residual r·(Δ_hφ(a) + φ(a)⁵) in reduced variables.
fn soliton_residual_w(grid: &RadialGrid, a: f64) -> Vec<f64> {
    let n = grid.len();
    let dr = grid.dr();
    let w = profile(grid, |r| r * phi_raw(r, a));
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let p = phi_raw(grid.r(j), a);
        out[j] = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (dr * dr) + grid.r(j) * p.powi(5);
    }
    out
}

/// Which equation the leapfrog integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    /// ψ_tt = Δ_hψ + ψ⁵ with ψ(R) held at its initial value.
    Raw,
    /// v = ψ − φ with v_tt = Δ_hv + 5φ⁴v + N(v,φ) and v(R) = 0, so that φ
    /// is an exact discrete equilibrium.
    Perturbative,
}

#[derive(Debug, Clone, Copy)]
pub struct NonlinearOptions {
    pub mode: FlowMode,
    pub r_obs: Option<f64>,
    pub stride: usize,
    /// Blow-up ceiling for ‖ψ‖_{L^∞(B_{R_obs})}.
    pub ceiling: f64,
    /// Stop once |⟨ψ−φ, g⟩| exceeds this.
    pub departure: Option<f64>,
    pub energy: bool,
    pub velocity: bool,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            mode: FlowMode::Raw,
            r_obs: None,
            stride: 1,
            ceiling: 10.0 * phi_raw(0.0, 1.0),
            departure: None,
            energy: false,
            velocity: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exit {
    Completed,
    BlowUp { t: f64 },
    Departed { t: f64, sign: i8 },
}

impl Exit {
    /// +1 / −1 for an exit through the upper / lower side, 0 when the run stayed.
    pub fn sign(&self) -> i8 {
        match *self {
            Exit::Completed => 0,
            Exit::BlowUp { .. } => 1,
            Exit::Departed { sign, .. } => sign,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearRun {
    /// ψ − φ(·,1) at the stored levels.
    pub perturbation: SpaceTimeField,
    /// ∂ₜψ at the stored levels (centred).
    pub velocity: Option<SpaceTimeField>,
    /// E(ψ, ψ_t) at the stored levels.
    pub energy: Vec<f64>,
    /// ⟨ψ − φ, g⟩ at every step.
    pub g_overlap: Vec<f64>,
    pub exit: Exit,
    pub dt: f64,
}

impl NonlinearRun {
    pub fn psi(&self) -> SpaceTimeField {
        let mut out = self.perturbation.clone();
        let grid = *out.grid();
        let phi: Vec<f64> = (0..out.nodes()).map(|j| phi_raw(grid.r(j), 1.0)).collect();
        for m in 0..out.steps() {
            out.slice_mut(m).iter_mut().zip(&phi).for_each(|(x, p)| *x += p);
        }
        out
    }
}

/// Evolves ψ from (ψ₀, ψ₁).
pub fn evolve_nonlinear(
    psi0: &RadialField,
    psi1: &RadialField,
    horizon: f64,
    dt: f64,
    spectral: Option<&SpectralData>,
    opts: NonlinearOptions,
) -> Result<NonlinearRun> {
    let v0 = psi0.map(|r, v| v - phi_raw(r, 1.0));
    evolve_perturbation(&v0, psi1, horizon, dt, spectral, opts)
}

/// Evolves ψ = φ + v from the perturbation (v₀, v₁) directly, which keeps
/// tiny perturbations free of cancellation.
pub fn evolve_perturbation(
    v0: &RadialField,
    v1: &RadialField,
    horizon: f64,
    dt: f64,
    spectral: Option<&SpectralData>,
    opts: NonlinearOptions,
) -> Result<NonlinearRun> {
    let grid = *v0.grid();
    grid.same(v1.grid())?;
    Leapfrog::check_cfl(&grid, dt)?;
    let steps = steps_for(horizon, dt)?;
    if let Some(r) = opts.r_obs {
        check_budget(&grid, r, horizon)?;
    }
    if opts.departure.is_some() && spectral.is_none() {
        return Err(Error::Usage("departure detection needs spectral data".into()));
    }
    if let Some(s) = spectral {
        grid.same(&s.grid)?;
    }
    let n = grid.len();
    let dr = grid.dr();
    let inv = 1.0 / (dr * dr);
    let nodes = opts.r_obs.map_or(n, |r| grid.ball_len(r));
    let stride = opts.stride.max(1);
    let rr = grid.nodes();
    let phi = profile(&grid, |r| phi_raw(r, 1.0));
    let phi_w = to_w(&grid, &phi);
    let lin: Vec<f64> = phi.iter().map(|p| 5.0 * p.powi(4)).collect();
    let res1 = match opts.mode {
        FlowMode::Raw => Some(soliton_residual_w(&grid, 1.0)),
        FlowMode::Perturbative => None,
    };
    let gw = spectral.map(|s| s.g.w());

    let mut w0 = v0.w();
    let mut u1 = v1.w();
    if opts.mode == FlowMode::Perturbative {
        w0[n - 1] = 0.0;
    }
    u1[n - 1] = 0.0;

    let acc = |w: &[f64], a: &mut [f64]| {
        a[0] = 0.0;
        a[n - 1] = 0.0;
        for j in 1..n - 1 {
            let v = w[j] / rr[j];
            let mut x = (w[j + 1] - 2.0 * w[j] + w[j - 1]) * inv + rr[j] * (lin[j] * v + n_raw(v, phi[j]));
            if let Some(r) = &res1 {
                x += r[j];
            }
            a[j] = x;
        }
    };
    let energy_of = |w: &[f64], vel: &[f64]| -> f64 {
        let wp: Vec<f64> = w.iter().zip(&phi_w).map(|(a, b)| a + b).collect();
        let mut s = 0.0;
        for j in 1..n {
            let r2 = rr[j] * rr[j];
            s += grid.trap_weight(j) * (0.5 * vel[j] * vel[j] - wp[j].powi(6) / (6.0 * r2 * r2));
        }
        0.5 * h1_raw(&grid, &wp) + 4.0 * PI * s * dr
    };
    let overlap = |w: &[f64]| gw.as_ref().map_or(0.0, |g| inner_w(&grid, w, g));
    let sup_ball = |w: &[f64]| -> f64 {
        let f = |j: usize| if j == 0 { 0.0 } else { (phi[j] + w[j] / rr[j]).abs() };
        let mut m = (phi[0] + (4.0 * w[1] / rr[1] - w[2] / rr[2]) / 3.0).abs();
        for j in 1..nodes {
            m = m.max(f(j));
        }
        m
    };
    let classify = |w: &[f64], o: f64, t: f64| -> Option<Exit> {
        if !(sup_ball(w) <= opts.ceiling) {
            return Some(Exit::BlowUp { t });
        }
        match opts.departure {
            Some(th) if o.abs() > th => Some(Exit::Departed { t, sign: if o > 0.0 { 1 } else { -1 } }),
            _ => None,
        }
    };

    let store_dt = dt * stride as f64;
    let mut pert = SpaceTimeField::new(grid, nodes, store_dt)?;
    let mut velo = if opts.velocity { Some(SpaceTimeField::new(grid, nodes, store_dt)?) } else { None };
    let mut energy = Vec::new();
    let mut g_overlap = Vec::with_capacity(steps + 1);
    let push = |pert: &mut SpaceTimeField, velo: &mut Option<SpaceTimeField>, energy: &mut Vec<f64>, w: &[f64], vel: &[f64]| {
        pert.push(&field_from_w(&grid, w)[..nodes]);
        if let Some(v) = velo.as_mut() {
            v.push(&field_from_w(&grid, vel)[..nodes]);
        }
        if opts.energy {
            energy.push(energy_of(w, vel));
        }
    };

    push(&mut pert, &mut velo, &mut energy, &w0, &u1);
    let o0 = overlap(&w0);
    g_overlap.push(o0);
    if let Some(e) = classify(&w0, o0, 0.0) {
        return Ok(NonlinearRun { perturbation: pert, velocity: velo, energy, g_overlap, exit: e, dt });
    }
    if steps == 0 {
        return Ok(NonlinearRun { perturbation: pert, velocity: velo, energy, g_overlap, exit: Exit::Completed, dt });
    }
    let mut lf = Leapfrog::start(dt, w0, &u1, acc);
    let mut exit = Exit::Completed;
    for m in 1..=steps {
        let t = m as f64 * dt;
        if let Err(e) = lf.step(acc) {
            return match e {
                Error::Instability { .. } => {
                    Ok(NonlinearRun { perturbation: pert, velocity: velo, energy, g_overlap, exit: Exit::BlowUp { t }, dt })
                }
                e => Err(e),
            };
        }
        // prev = level m, cur = m+1, next = m−1
        let o = overlap(&lf.prev);
        g_overlap.push(o);
        if m % stride == 0 {
            let vel = if opts.velocity || opts.energy {
                lf.cur.iter().zip(&lf.next).map(|(a, b)| (a - b) / (2.0 * dt)).collect()
            } else {
                Vec::new()
            };
            push(&mut pert, &mut velo, &mut energy, &lf.prev, &vel);
        }
        if let Some(e) = classify(&lf.prev, o, t) {
            exit = e;
            break;
        }
    }
    Ok(NonlinearRun { perturbation: pert, velocity: velo, energy, g_overlap, exit, dt })
}

/// ⟨v + φ(1) − φ(a), V(a)∂ₐφ(a)⟩.
fn orthogonality(grid: &RadialGrid, v: &[f64], a: f64) -> f64 {
    let dr = grid.dr();
    let mut s = 0.0;
    for j in 1..grid.len() {
        let r = grid.r(j);
        let d = v[j] + phi_raw(r, 1.0) - phi_raw(r, a);
        s += grid.trap_weight(j) * r * r * d * potential_raw(r, a) * dphi_da_raw(r, a);
    }
    4.0 * PI * s * dr
}

/// Root a of ⟨ψ − φ(a), V(a)∂ₐφ(a)⟩ = 0 by safeguarded Newton from `a_start`.
pub fn extract_modulation(psi: &RadialField, a_start: f64) -> Result<f64> {
    let v = psi.map(|r, x| x - phi_raw(r, 1.0));
    extract_modulation_perturbation(&v, a_start)
}

/// As [`extract_modulation`] for ψ = φ(·,1) + v.
pub fn extract_modulation_perturbation(v: &RadialField, a_start: f64) -> Result<f64> {
    let grid = *v.grid();
    let vals = v.values();
    let f = |a: f64| orthogonality(&grid, vals, a);
    let (lo, hi) = SolitonScale::WINDOW;
    let inside = |a: f64| a > lo && a < hi;
    let mut a = if inside(a_start) { a_start } else { 1.0 };
    for _ in 0..40 {
        let fa = f(a);
        let d = 1e-6;
        let slope = (f(a + d) - f(a - d)) / (2.0 * d);
        if !(slope.abs() > 0.0) {
            break;
        }
        let step = fa / slope;
        let next = a - step;
        if !inside(next) {
            break;
        }
        a = next;
        if step.abs() < 1e-14 {
            return Ok(a);
        }
    }
    // bracket on a coarse scan, nearest to the start
    let m = 200;
    let pts: Vec<f64> = (1..m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
    let vals_f: Vec<f64> = pts.iter().map(|&x| f(x)).collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..pts.len() - 1 {
        if vals_f[i] == 0.0 {
            return Ok(pts[i]);
        }
        if vals_f[i].signum() != vals_f[i + 1].signum() {
            let mid = 0.5 * (pts[i] + pts[i + 1]);
            if best.is_none_or(|(b, _)| (mid - a_start).abs() < (0.5 * (b + best.unwrap().1) - a_start).abs()) {
                best = Some((pts[i], pts[i + 1]));
            }
        }
    }
    let (mut x0, mut x1) = best.ok_or(Error::LeftWindow { a: a_start, t: f64::NAN })?;
    let mut f0 = f(x0);
    for _ in 0..200 {
        let mid = 0.5 * (x0 + x1);
        let fm = f(mid);
        if fm.signum() == f0.signum() {
            x0 = mid;
            f0 = fm;
        } else {
            x1 = mid;
        }
        if x1 - x0 < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (x0 + x1))
}

/// Data ψ₀ − φ, ψ₁ satisfying ⟨k(ψ₀−φ) + ψ₁, g⟩ = 0 (no growing component).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldQuery {
    pub psi0_perturbation: RadialField,
    pub psi1: RadialField,
    pub constraint_ok: bool,
    pub epsilon: f64,
}

impl ManifoldQuery {
    /// Enforces the constraint by removing the offending multiple of g from ψ₁.
    pub fn new(u0: RadialField, u1: RadialField, spectral: &SpectralData) -> Result<Self> {
        u0.grid().same(u1.grid())?;
        u0.grid().same(&spectral.grid)?;
        let c = (spectral.k * u0.inner_product(&spectral.g)? + u1.inner_product(&spectral.g)?) / spectral.gg;
        let psi1 = u1.axpy(-c, &spectral.g)?;
        let mut q = ManifoldQuery { epsilon: data_norm(&u0, &psi1), psi0_perturbation: u0, psi1, constraint_ok: false };
        q.constraint_ok = q.constraint_residual(spectral)? < 1e-10 * (1.0 + q.epsilon);
        Ok(q)
    }

    pub fn zero(spectral: &SpectralData) -> Self {
        let z = RadialField::zeros(spectral.grid);
        ManifoldQuery { psi0_perturbation: z.clone(), psi1: z, constraint_ok: true, epsilon: 0.0 }
    }

    /// |⟨k(ψ₀−φ) + ψ₁, g⟩|.
    pub fn constraint_residual(&self, spectral: &SpectralData) -> Result<f64> {
        Ok((spectral.k * self.psi0_perturbation.inner_product(&spectral.g)? + self.psi1.inner_product(&spectral.g)?).abs())
    }

    /// Manifold data offset by h: (ψ₀ − φ − h g, ψ₁ − h k g).
    pub fn shifted(&self, h: f64, spectral: &SpectralData) -> Result<(RadialField, RadialField)> {
        Ok((self.psi0_perturbation.axpy(-h, &spectral.g)?, self.psi1.axpy(-h * spectral.k, &spectral.g)?))
    }
}

/// Settings for the bisection on h.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShootOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Departure threshold on |⟨ψ−φ, g⟩|.
    pub threshold: f64,
    /// Bracket width at which bisection stops; 10⁻¹²·max(ε, 10⁻⁶) when `None`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl ShootOptions {
    pub fn new(horizon: f64, dt: f64) -> Self {
        ShootOptions { horizon, dt, threshold: 0.1, tol: None, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShootReport {
    pub h: f64,
    pub bracket_width: f64,
    pub iterations: usize,
    /// The returned midpoint itself stayed near the family up to T.
    pub stayed: bool,
}

/// Exit sign of the perturbative flow from the data offset by h.
pub fn exit_sign(query: &ManifoldQuery, h: f64, spectral: &SpectralData, opts: &ShootOptions) -> Result<i8> {
    let (v0, v1) = query.shifted(h, spectral)?;
    let nl = NonlinearOptions {
        mode: FlowMode::Perturbative,
        r_obs: Some(1.0f64.min(spectral.grid.radius() - opts.horizon).max(0.0)),
        stride: usize::MAX,
        departure: Some(opts.threshold),
        ..Default::default()
    };
    Ok(evolve_perturbation(&v0, &v1, opts.horizon, opts.dt, Some(spectral), nl)?.exit.sign())
}

/// Bisection for the offset h placing the data on the centre-stable manifold.
pub fn shoot_h(query: &ManifoldQuery, spectral: &SpectralData, opts: &ShootOptions) -> Result<ShootReport> {
    let eps = query.epsilon;
    let tol = opts.tol.unwrap_or(1e-12 * eps.max(1e-6));
    let mut hmax = (10.0 * eps * eps).max(1e-9);
    let (mut lo, mut hi);
    let (mut s_lo, mut s_hi);
    let mut widen = 0;
    loop {
        lo = -hmax;
        hi = hmax;
        s_lo = exit_sign(query, lo, spectral, opts)?;
        s_hi = exit_sign(query, hi, spectral, opts)?;
        if s_lo == 0 && s_hi == 0 {
            return Err(Error::Horizon(format!("both ends of [−{hmax:e}, {hmax:e}] stayed; T = {} too short", opts.horizon)));
        }
        if s_lo != s_hi && s_lo != 0 && s_hi != 0 {
            break;
        }
        widen += 1;
        if widen > 12 {
            return Err(Error::Guard(format!("no sign change of the exit up to |h| = {hmax:e}")));
        }
        hmax *= 4.0;
    }
    let mut it = 0;
    while hi - lo > tol && it < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = exit_sign(query, mid, spectral, opts)?;
        it += 1;
        if s == 0 {
            return Ok(ShootReport { h: mid, bracket_width: hi - lo, iterations: it, stayed: true });
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let _ = s_hi;
    Ok(ShootReport { h: 0.5 * (lo + hi), bracket_width: hi - lo, iterations: it, stayed: false })
}

/// Iterate (u, a, ȧ) of the Picard map, sampled at t_m = m·dt on the full grid.
#[derive(Debug, Clone)]
pub struct PicardState {
    pub u: SpaceTimeField,
    pub a: Vec<f64>,
    pub adot: Vec<f64>,
}

/// One application of Φ.
#[derive(Debug, Clone)]
pub struct PicardStep {
    pub state: PicardState,
    pub h: f64,
    pub tail_bound: f64,
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    /// X-distance between input and output.
    pub distance: f64,
}

struct Sources {
    f: SpaceTimeField,
    g: SpaceTimeField,
    /// ⟨F, g⟩
    nf: Vec<f64>,
    /// ȧ⟨∂ₐφ(a), g⟩
    ma: Vec<f64>,
}

/// Fixed data of the Picard system for one query.
pub struct PicardContext<'s> {
    pub spectral: &'s SpectralData,
    pub query: ManifoldQuery,
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub r_obs: f64,
    /// Keep the terms that make the map exact for the discrete flow: the
    /// residual of φ(a) under Δ_h, the discrete failure of ∂ₐφ to be a zero
    /// mode, and ⟨∂ₐφ, g⟩ ≠ 0.
    pub consistent: bool,
    pot1: Vec<f64>,
    res1: Vec<f64>,
    rho: Vec<f64>,
    dphi: RadialField,
    pc_dphi: RadialField,
    pc_u0: RadialField,
    pc_u1: RadialField,
    cos_u0: Vec<f64>,
    cos_g: Vec<f64>,
    sin_u1: Vec<f64>,
    sin_g: Vec<f64>,
}

impl<'s> PicardContext<'s> {
    pub fn new(spectral: &'s SpectralData, query: ManifoldQuery, horizon: f64, dt: f64, r_obs: f64) -> Result<Self> {
        let grid = spectral.grid;
        grid.same(query.psi0_perturbation.grid())?;
        Leapfrog::check_cfl(&grid, dt)?;
        check_budget(&grid, r_obs, horizon)?;
        let steps = steps_for(horizon, dt)?;
        let n = grid.len();
        let dr = grid.dr();
        let pot1 = profile(&grid, |r| potential_raw(r, 1.0));
        let res1: Vec<f64> =
            soliton_residual_w(&grid, 1.0).iter().enumerate().map(|(j, w)| if j == 0 { 0.0 } else { w / grid.r(j) }).collect();
        let dphi = RadialField::from_fn(grid, |r| dphi_da_raw(r, 1.0));
        let dw = dphi.w();
        let mut rho = vec![0.0; n];
        for j in 1..n - 1 {
            rho[j] = -(dw[j + 1] - 2.0 * dw[j] + dw[j - 1]) / (dr * dr * grid.r(j)) + pot1[j] * dphi.values()[j];
        }
        let pc_dphi = spectral.project_continuous(&dphi)?;
        let pc_u0 = spectral.project_continuous(&query.psi0_perturbation)?;
        let pc_u1 = spectral.project_continuous(&query.psi1)?;
        let vres = spectral.v_resonance.values();
        let series = |f: &RadialField, cosine: bool| -> Result<Vec<f64>> {
            (0..=steps)
                .map(|m| {
                    let t = m as f64 * dt;
                    let e = if cosine { free_cosine(f, t)? } else { free_sine(f, t)? };
                    Ok(inner_raw(&grid, e.values(), vres))
                })
                .collect()
        };
        let cos_u0 = series(&query.psi0_perturbation, true)?;
        let sin_u1 = series(&query.psi1, false)?;
        let cos_g = series(&spectral.g, true)?;
        let sin_g = series(&spectral.g, false)?;
        Ok(PicardContext {
            spectral,
            query,
            horizon,
            dt,
            steps,
            r_obs,
            consistent: true,
            pot1,
            res1,
            rho,
            dphi,
            pc_dphi,
            pc_u0,
            pc_u1,
            cos_u0,
            cos_g,
            sin_u1,
            sin_g,
        })
    }

    /// The trivial iterate (u, a) = (0, 1).
    pub fn zero_state(&self) -> Result<PicardState> {
        let grid = self.spectral.grid;
        let u = SpaceTimeField::constant(&RadialField::zeros(grid), self.dt, self.steps)?;
        Ok(PicardState { u, a: vec![1.0; self.steps + 1], adot: vec![0.0; self.steps + 1] })
    }

    fn check_state(&self, st: &PicardState) -> Result<()> {
        let m = self.steps + 1;
        if st.a.len() < m || st.adot.len() < m || st.u.steps() < m || st.u.nodes() != self.spectral.grid.len() {
            return Err(Error::Usage(format!("history shorter than the {m} levels to T = {}", self.horizon)));
        }
        Ok(())
    }

    fn sources(&self, st: &PicardState) -> Result<Sources> {
        self.check_state(st)?;
        let s = self.spectral;
        let grid = s.grid;
        let n = grid.len();
        let gv = s.g.values();
        let (lo, hi) = SolitonScale::WINDOW;
        let mut f = SpaceTimeField::new(grid, n, self.dt)?;
        let mut g = SpaceTimeField::new(grid, n, self.dt)?;
        let mut nf = Vec::with_capacity(self.steps + 1);
        let mut ma = Vec::with_capacity(self.steps + 1);
        let mut fb = vec![0.0; n];
        let mut gb = vec![0.0; n];
        let mut db = vec![0.0; n];
        for m in 0..=self.steps {
            let a = st.a[m];
            let ad = st.adot[m];
            if !(a > lo && a < hi) {
                return Err(Error::LeftWindow { a, t: m as f64 * self.dt });
            }
            let u = st.u.slice(m);
            let resa = if self.consistent { Some(soliton_residual_w(&grid, a)) } else { None };
            for j in 0..n {
                let r = grid.r(j);
                let pa = phi_raw(r, a);
                let va = -5.0 * pa.powi(4);
                let mut x = (self.pot1[j] - va) * u[j] + n_raw(u[j], pa);
                if let Some(ra) = &resa {
                    if j > 0 && j + 1 < n {
                        x += ra[j] / r - self.res1[j];
                    }
                }
                fb[j] = x;
                let d = defect_raw(r, a);
                gb[j] = ad * d;
                db[j] = if self.consistent { dphi_da_raw(r, a) } else { d };
            }
            nf.push(inner_raw(&grid, &fb, gv));
            ma.push(ad * inner_raw(&grid, &db, gv));
            f.push(&fb);
            g.push(&gb);
        }
        Ok(Sources { f, g, nf, ma })
    }

    fn h_from(&self, src: &Sources) -> (f64, f64) {
        let s = self.spectral;
        let k = s.k;
        let dt = self.dt;
        let m = self.steps;
        let mut acc = 0.0;
        let mut sup: f64 = 0.0;
        for i in 0..=m {
            let q = src.nf[i] - k * src.ma[i];
            sup = sup.max(q.abs());
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * (-k * i as f64 * dt).exp() * q;
        }
        let norm = 2.0 * k * s.gg;
        (acc * dt / norm, (-k * self.horizon).exp() * sup / k / norm)
    }

    /// h = (2k⟨g,g⟩)⁻¹∫₀ᵀe^{−ks}⟨F − kȧ∂ₐφ(a), g⟩ds and its tail bound.
    pub fn h_fixed_point(&self, st: &PicardState) -> Result<(f64, f64)> {
        let src = self.sources(st)?;
        let (h, tail) = self.h_from(&src);
        if tail > 1e-3 * h.abs() && tail > 1e-300 {
            return Err(Error::Horizon(format!("tail bound {tail:e} exceeds 10⁻³|h| = {:e}", 1e-3 * h.abs())));
        }
        Ok((h, tail))
    }

    fn pairing_series(&self, src: &Sources, h: f64) -> Result<Vec<f64>> {
        let s = self.spectral;
        let grid = s.grid;
        let vres = s.v_resonance.values();
        let df = free_duhamel(&src.f)?;
        let dg = free_duhamel(&src.g)?;
        let m = self.steps;
        let pg: Vec<f64> = (0..=m).map(|i| inner_raw(&grid, dg.slice(i), vres)).collect();
        let mut pgdot = vec![0.0; m + 1];
        for i in 1..m {
            pgdot[i] = (pg[i + 1] - pg[i - 1]) / (2.0 * self.dt);
        }
        if m >= 2 {
            pgdot[m] = (3.0 * pg[m] - 4.0 * pg[m - 1] + pg[m - 2]) / (2.0 * self.dt);
        }
        Ok((0..=m)
            .map(|i| {
                self.cos_u0[i] - h * self.cos_g[i] + self.sin_u1[i] - h * s.k * self.sin_g[i] + inner_raw(&grid, df.slice(i), vres)
                    - pgdot[i]
            })
            .collect())
    }

    /// ȧ(t) = −a₀(t)^{5/4}·(4π/⟨V,∂ₐφ⟩²)·⟨X(t), V∂ₐφ⟩, with X the free
    /// evolution of the data plus the free Duhamel terms.
    pub fn adot_condition(&self, st: &PicardState, h: f64) -> Result<Vec<f64>> {
        let src = self.sources(st)?;
        let chi = self.pairing_series(&src, h)?;
        let cq = self.spectral.c_q();
        Ok(chi.iter().zip(&st.a).map(|(c, a)| -a.powf(1.25) * cq * c).collect())
    }

    fn xpm_from(&self, src: &Sources) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let s = self.spectral;
        let k = s.k;
        let dt = self.dt;
        let m = self.steps;
        let gg = s.gg;
        let e = (-k * dt).exp();
        let fp: Vec<f64> = (0..=m).map(|i| (src.nf[i] - k * src.ma[i]) / gg).collect();
        let fm: Vec<f64> = (0..=m).map(|i| (src.nf[i] + k * src.ma[i]) / gg).collect();
        let mut yp = vec![0.0; m + 1];
        for i in (0..m).rev() {
            yp[i] = e * yp[i + 1] - 0.5 * dt * (fp[i] + e * fp[i + 1]);
        }
        let y0 = (k * self.query.psi0_perturbation.inner_product(&s.g)? - self.query.psi1.inner_product(&s.g)?) / gg;
        let mut im = 0.0;
        let mut ym = vec![y0; m + 1];
        for i in 1..=m {
            im = e * im + 0.5 * dt * (e * fm[i - 1] + fm[i]);
            ym[i] = y0 * (-k * i as f64 * dt).exp() - im;
        }
        let beta: Vec<f64> = yp.iter().zip(&ym).map(|(p, q)| (p + q) / (2.0 * k)).collect();
        let c = gg / (2.0 * k).sqrt();
        Ok((yp.iter().map(|y| c * y).collect(), ym.iter().map(|y| c * y).collect(), beta))
    }

    /// x₊ integrated backward from T and x₋ forward from 0.
    pub fn xpm_evolution(&self, st: &PicardState) -> Result<(Vec<f64>, Vec<f64>)> {
        let src = self.sources(st)?;
        let (p, m, _) = self.xpm_from(&src)?;
        Ok((p, m))
    }

    /// Φ(u₀, a₀).
    pub fn map(&self, st: &PicardState) -> Result<PicardStep> {
        let s = self.spectral;
        let grid = s.grid;
        let n = grid.len();
        let m = self.steps;
        let dt = self.dt;
        let src = self.sources(st)?;
        let (h, tail_bound) = self.h_from(&src);
        let chi = self.pairing_series(&src, h)?;
        let cq = s.c_q();
        let adot: Vec<f64> = chi.iter().zip(&st.a).map(|(c, a)| -a.powf(1.25) * cq * c).collect();
        let mut a = vec![1.0; m + 1];
        let mut qint = vec![0.0; m + 1];
        for i in 1..=m {
            a[i] = a[i - 1] + 0.5 * dt * (adot[i - 1] + adot[i]);
            qint[i] = qint[i - 1] - 0.5 * dt * cq * (chi[i - 1] + chi[i]);
        }

        let gv = s.g.values();
        let project = |field: &SpaceTimeField, coef: &dyn Fn(usize) -> f64| -> Result<SpaceTimeField> {
            let mut out = SpaceTimeField::new(grid, n, dt)?;
            let mut b = vec![0.0; n];
            for i in 0..=m {
                let c = coef(i);
                for j in 0..n {
                    b[j] = field.slice(i)[j] - c * gv[j];
                }
                out.push(&b);
            }
            Ok(out)
        };
        let pf = project(&src.f, &|i| src.nf[i] / s.gg)?;
        let gsl = |i: usize| inner_raw(&grid, src.g.slice(i), gv) / s.gg;
        let pg = project(&src.g, &gsl)?;
        let zero = RadialField::zeros(grid);
        let opts = EvolveOptions { r_obs: None, stride: 1, project: true, energy: false };
        let y = crate::propagators::evolve_linear_perturbed(&self.pc_u0, &self.pc_u1, Some(&pf), self.horizon, dt, Some(s), opts)?.u;
        let w = crate::propagators::evolve_linear_perturbed(&zero, &zero, Some(&pg), self.horizon, dt, Some(s), opts)?.u;
        let jfield = if self.consistent {
            let rg = inner_raw(&grid, &self.rho, gv) / s.gg;
            let prho: Vec<f64> = self.rho.iter().zip(gv).map(|(r, g)| r - rg * g).collect();
            let mut js = SpaceTimeField::new(grid, n, dt)?;
            let mut b = vec![0.0; n];
            for q in &qint {
                b.iter_mut().zip(&prho).for_each(|(x, r)| *x = -q * r);
                js.push(&b);
            }
            Some(crate::propagators::evolve_linear_perturbed(&zero, &zero, Some(&js), self.horizon, dt, Some(s), opts)?.u)
        } else {
            None
        };
        let (x_plus, x_minus, beta) = self.xpm_from(&src)?;
        let sec = if self.consistent { self.pc_dphi.values() } else { self.dphi.values() };
        let mut u = SpaceTimeField::new(grid, n, dt)?;
        let mut b = vec![0.0; n];
        for i in 0..=m {
            let wt: Vec<f64> = if i == 0 {
                vec![0.0; n]
            } else if i < m {
                w.slice(i + 1).iter().zip(w.slice(i - 1)).map(|(p, q)| (p - q) / (2.0 * dt)).collect()
            } else {
                (0..n).map(|j| (3.0 * w.slice(m)[j] - 4.0 * w.slice(m - 1)[j] + w.slice(m - 2)[j]) / (2.0 * dt)).collect()
            };
            for j in 0..n {
                let mut x = y.slice(i)[j] - wt[j] - qint[i] * sec[j] + beta[i] * gv[j];
                if let Some(jf) = &jfield {
                    x -= jf.slice(i)[j];
                }
                b[j] = x;
            }
            u.push(&b);
        }
        let state = PicardState { u, a, adot };
        let distance = self.x_distance(st, &state)?;
        Ok(PicardStep { state, h, tail_bound, x_plus, x_minus, distance })
    }

    /// ‖u₁−u₂‖ in L^{6,2}L^∞ + L^∞L² + L^∞L¹ on B_{R_obs} plus ‖ȧ₁−ȧ₂‖_{L¹∩L^∞}.
    pub fn x_distance(&self, p: &PicardState, q: &PicardState) -> Result<f64> {
        let nodes = self.spectral.grid.ball_len(self.r_obs);
        let du = p.u.restrict(nodes)?.sub(&q.u.restrict(nodes)?)?;
        let m = self.steps;
        let d: Vec<f64> = (0..=m).map(|i| (p.adot[i] - q.adot[i]).abs()).collect();
        let l1: f64 = (0..=m).map(|i| if i == 0 || i == m { 0.5 } else { 1.0 } * d[i]).sum::<f64>() * self.dt;
        let sup = d.iter().fold(0.0f64, |a, b| a.max(*b));
        Ok(dispersive_norm(&du)? + l1 + sup)
    }

    /// Iterates Φ from (0, 1) until the X-distance drops below `tol`.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<PicardSolution> {
        let mut st = self.zero_state()?;
        let mut distances = Vec::new();
        for _ in 0..max_iter.max(1) {
            let step = self.map(&st)?;
            distances.push(step.distance);
            let done = step.distance <= tol;
            let PicardStep { state, h, tail_bound, x_plus, x_minus, .. } = step;
            st = state;
            if done || distances.len() == max_iter.max(1) {
                return Ok(PicardSolution { state: st, h, tail_bound, x_plus, x_minus, distances });
            }
        }
        unreachable!()
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub state: PicardState,
    pub h: f64,
    pub tail_bound: f64,
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    /// ‖Φⁿ⁺¹ − Φⁿ‖_X per iteration.
    pub distances: Vec<f64>,
}

/// Time series of the modulation and the radiation along one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulationTrajectory {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub adot: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub g_overlap: Vec<f64>,
    pub u_snapshots: Vec<(f64, RadialField)>,
    pub diagnostics: Vec<NormReport>,
    pub left_window: bool,
}

impl ModulationTrajectory {
    /// ∫|ȧ| by the trapezoid rule.
    pub fn adot_l1(&self) -> f64 {
        self.times.windows(2).zip(self.adot.windows(2)).map(|(t, a)| 0.5 * (t[1] - t[0]) * (a[0].abs() + a[1].abs())).sum()
    }

    pub fn adot_sup(&self) -> f64 {
        self.adot.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Σ|a_{m+1} − a_m|.
    pub fn total_variation(&self) -> f64 {
        self.a.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// CSV with header `t,a,adot,x_plus,x_minus,g_overlap`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,a,adot,x_plus,x_minus,g_overlap\n");
        for i in 0..self.times.len() {
            s.push_str(&format!(
                "{:.10e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[i], self.a[i], self.adot[i], self.x_plus[i], self.x_minus[i], self.g_overlap[i]
            ));
        }
        s
    }

    /// Post-hoc analysis of a stored perturbative run: a(t) by instantaneous
    /// orthogonality, u = ψ − φ(a), and x_± from (u, u_t).
    pub fn from_run(run: &NonlinearRun, spectral: &SpectralData, snapshot_every: usize) -> Result<Self> {
        let grid = spectral.grid;
        let p = &run.perturbation;
        let vel = run.velocity.as_ref().ok_or_else(|| Error::Usage("run stored no velocity".into()))?;
        if p.nodes() != grid.len() {
            return Err(Error::Usage("modulation analysis needs the full grid stored".into()));
        }
        let dts = p.dt();
        let steps = p.steps().min(vel.steps());
        let mut tr = ModulationTrajectory {
            times: Vec::new(),
            a: Vec::new(),
            adot: Vec::new(),
            x_plus: Vec::new(),
            x_minus: Vec::new(),
            g_overlap: Vec::new(),
            u_snapshots: Vec::new(),
            diagnostics: Vec::new(),
            left_window: false,
        };
        let mut prev = 1.0;
        for m in 0..steps {
            let v = p.field_at(m);
            match extract_modulation_perturbation(&v, prev) {
                Ok(a) => {
                    tr.times.push(m as f64 * dts);
                    tr.a.push(a);
                    prev = a;
                }
                Err(Error::LeftWindow { .. }) => {
                    tr.left_window = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let k = tr.a.len();
        tr.adot = (0..k)
            .map(|i| match (i, k) {
                (_, 1) => 0.0,
                (0, _) => (tr.a[1] - tr.a[0]) / dts,
                (i, k) if i + 1 == k => (tr.a[i] - tr.a[i - 1]) / dts,
                (i, _) => (tr.a[i + 1] - tr.a[i - 1]) / (2.0 * dts),
            })
            .collect();
        for i in 0..k {
            let a = tr.a[i];
            let u = p.field_at(i).map(|r, v| v + phi_raw(r, 1.0) - phi_raw(r, a));
            let ad = tr.adot[i];
            let ut = vel.field_at(i).map(|r, v| v - ad * dphi_da_raw(r, a));
            let (xp, xm) = spectral.x_pm(&u, &ut)?;
            tr.x_plus.push(xp);
            tr.x_minus.push(xm);
            tr.g_overlap.push(u.inner_product(&spectral.g)?);
            if snapshot_every > 0 && i % snapshot_every == 0 {
                tr.u_snapshots.push((tr.times[i], u));
            }
        }
        Ok(tr)
    }

    pub fn from_picard(sol: &PicardSolution, spectral: &SpectralData, snapshot_every: usize) -> Result<Self> {
        let st = &sol.state;
        let dt = st.u.dt();
        let steps = st.u.steps();
        let mut snaps = Vec::new();
        let mut g_overlap = Vec::with_capacity(steps);
        for m in 0..steps {
            let u = st.u.field_at(m);
            g_overlap.push(u.inner_product(&spectral.g)?);
            if snapshot_every > 0 && m % snapshot_every == 0 {
                snaps.push((m as f64 * dt, u));
            }
        }
        let (lo, hi) = SolitonScale::WINDOW;
        Ok(ModulationTrajectory {
            times: (0..steps).map(|m| m as f64 * dt).collect(),
            a: st.a[..steps].to_vec(),
            adot: st.adot[..steps].to_vec(),
            x_plus: sol.x_plus[..steps].to_vec(),
            x_minus: sol.x_minus[..steps].to_vec(),
            g_overlap,
            u_snapshots: snaps,
            diagnostics: Vec::new(),
            left_window: st.a.iter().any(|a| !(*a > lo && *a < hi)),
        })
    }
}

/// Perturbative run from the manifold data (ψ₀ − φ − h g, ψ₁ − h k g) with the
/// full grid stored, ready for [`ModulationTrajectory::from_run`].
pub fn on_manifold_run(
    query: &ManifoldQuery,
    h: f64,
    spectral: &SpectralData,
    horizon: f64,
    dt: f64,
    stride: usize,
) -> Result<NonlinearRun> {
    let (v0, v1) = query.shifted(h, spectral)?;
    let opts = NonlinearOptions { mode: FlowMode::Perturbative, stride, velocity: true, energy: false, ..Default::default() };
    evolve_perturbation(&v0, &v1, horizon, dt, Some(spectral), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::gaussian;
    use crate::spectral::ground_state;
    use proptest::prelude::*;

    fn grid() -> RadialGrid {
        RadialGrid::new(20.0, 801).unwrap()
    }

    fn phi_field(g: RadialGrid, a: f64) -> RadialField {
        RadialField::from_fn(g, |r| phi_raw(r, a))
    }

    #[test]
    fn nonlinearity_arithmetic() {
        let g = grid();
        let phi = phi_field(g, 1.0);
        let z = RadialField::zeros(g);
        assert!(nonlinearity(&z, &phi).unwrap().values().iter().all(|&v| v == 0.0));
        let n = nonlinearity(&phi, &phi).unwrap();
        for (x, p) in n.values().iter().zip(phi.values()) {
            assert!((x - 26.0 * p.powi(5)).abs() <= 1e-12 * p.powi(5));
        }
        let u = gaussian(g, 1.0, 0.5);
        let n = nonlinearity(&u, &z).unwrap();
        for (x, v) in n.values().iter().zip(u.values()) {
            assert!((x - v.powi(5)).abs() <= 1e-15);
        }
    }

    proptest! {
        #[test]
        fn nonlinearity_is_the_superlinear_remainder(u in -2.0f64..2.0, p in 0.0f64..2.0) {
            let exact = (p + u).powi(5) - p.powi(5) - 5.0 * p.powi(4) * u;
            prop_assert!((n_raw(u, p) - exact).abs() < 1e-11 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn extraction_recovers_exact_scales() {
        let g = grid();
        for a in [0.9, 1.0, 1.1] {
            let got = extract_modulation(&phi_field(g, a), 1.0).unwrap();
            assert!((got - a).abs() < 1e-8, "a = {a}: {got}");
        }
    }

    #[test]
    fn extraction_leaves_window() {
        let g = grid();
        let far = phi_field(g, 3.0);
        assert!(matches!(extract_modulation(&far, 1.0), Err(Error::LeftWindow { .. })));
    }

    #[test]
    fn ground_state_shift_follows_linear_response() {
        // ⟨g, V∂ₐφ⟩ = k²⟨g,∂ₐφ⟩ + ⟨Vg,∂ₐφ⟩ need not vanish: adding c·g moves a
        // by c·⟨g,V∂ₐφ⟩/⟨∂ₐφ,V∂ₐφ⟩ to first order
        let g = RadialGrid::new(30.0, 1201).unwrap();
        let s = ground_state(&g).unwrap();
        let vd = RadialField::from_fn(g, |r| potential_raw(r, 1.0) * dphi_da_raw(r, 1.0));
        let d = RadialField::from_fn(g, |r| dphi_da_raw(r, 1.0));
        let predicted = s.g.inner_product(&vd).unwrap() / d.inner_product(&vd).unwrap();
        for c in [1e-4, 1e-3] {
            let psi = phi_field(g, 1.0).axpy(c, &s.g).unwrap();
            let a = extract_modulation(&psi, 1.0).unwrap();
            assert!(((a - 1.0) / c - predicted).abs() < 0.05 * predicted.abs() + 1e-3, "c = {c}: {a}");
        }
    }

    fn golden_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
        let (mut f1, mut f2) = (f(x1), f(x2));
        while hi - lo > 1e-10 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = f(x2);
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn extraction_matches_energy_argmin() {
        let g = grid();
        for (a_star, delta) in [(0.95, 1e-3), (1.0, 2e-3), (1.08, 1e-3)] {
            let psi = phi_field(g, a_star).axpy(delta, &gaussian(g, 1.5, 0.7)).unwrap();
            let a = extract_modulation(&psi, 1.0).unwrap();
            let dist = |b: f64| psi.sub(&phi_field(g, b)).unwrap().h1_seminorm();
            let oracle = golden_argmin(dist, 0.6, 1.4);
            assert!((a - oracle).abs() < 1e-3, "a* = {a_star}: {a} vs {oracle}");
        }
    }

    #[test]
    fn query_enforces_the_constraint() {
        let g = grid();
        let s = ground_state(&g).unwrap();
        let u0 = gaussian(g, 1.0, 1.0).scale(1e-2);
        let u1 = gaussian(g, 2.0, 0.5).scale(3e-3);
        let q = ManifoldQuery::new(u0, u1, &s).unwrap();
        assert!(q.constraint_ok);
        assert!(q.constraint_residual(&s).unwrap() < 1e-10);
        let (v0, v1) = q.shifted(0.3, &s).unwrap();
        // shifting along (g, kg) keeps ⟨k v0 + v1, g⟩ up to 2hk⟨g,g⟩ with the sign of −h
        let r = s.k * v0.inner_product(&s.g).unwrap() + v1.inner_product(&s.g).unwrap();
        assert!((r + 2.0 * 0.3 * s.k * s.gg).abs() < 1e-10);
    }

    #[test]
    fn zero_query_shoots_to_zero() {
        let g = grid();
        let s = ground_state(&g).unwrap();
        let q = ManifoldQuery::zero(&s);
        let mut o = ShootOptions::new(12.0, g.dr());
        o.tol = Some(1e-15);
        let rep = shoot_h(&q, &s, &o).unwrap();
        assert!(rep.h.abs() < 1e-14, "{}", rep.h);
    }

    #[test]
    fn zero_is_a_picard_fixed_point() {
        let g = grid();
        let s = ground_state(&g).unwrap();
        let ctx = PicardContext::new(&s, ManifoldQuery::zero(&s), 8.0, g.dr(), 5.0).unwrap();
        let z = ctx.zero_state().unwrap();
        let step = ctx.map(&z).unwrap();
        assert_eq!(step.h, 0.0);
        assert!(step.state.adot.iter().all(|&x| x == 0.0));
        assert!(step.state.a.iter().all(|&x| x == 1.0));
        assert!(step.distance < 1e-14);
        assert!(step.x_plus.iter().chain(&step.x_minus).all(|&x| x == 0.0));
    }

    #[test]
    fn decaying_coordinate_is_homogeneous_for_frozen_state() {
        let g = grid();
        let s = ground_state(&g).unwrap();
        let q = ManifoldQuery::new(s.g.scale(1e-3), RadialField::zeros(g), &s).unwrap();
        let ctx = PicardContext::new(&s, q, 8.0, g.dr(), 5.0).unwrap();
        let (xp, xm) = ctx.xpm_evolution(&ctx.zero_state().unwrap()).unwrap();
        let dt = g.dr();
        for (m, (p, x)) in xp.iter().zip(&xm).enumerate() {
            let exact = xm[0] * (-s.k * m as f64 * dt).exp();
            assert!((x - exact).abs() < 1e-10 * xm[0].abs(), "m = {m}");
            assert!(p.abs() < 1e-12 * xm[0].abs());
        }
        assert!(xm[0] != 0.0);
    }

    #[test]
    fn quadratic_law_for_doubled_amplitude() {
        let g = RadialGrid::new(20.0, 801).unwrap();
        let s = ground_state(&g).unwrap();
        let bump = s.project_continuous(&gaussian(g, 1.0, 1.0)).unwrap();
        let h = |eps: f64| {
            let q = ManifoldQuery::new(bump.scale(eps), RadialField::zeros(g), &s).unwrap();
            let mut o = ShootOptions::new(12.0, g.dr());
            o.tol = Some(1e-12 * eps);
            shoot_h(&q, &s, &o).unwrap().h
        };
        let ratio = h(2e-3) / h(1e-3);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn trajectory_csv_header() {
        let g = grid();
        let s = ground_state(&g).unwrap();
        let ctx = PicardContext::new(&s, ManifoldQuery::zero(&s), 4.0, g.dr(), 5.0).unwrap();
        let sol = ctx.solve(1e-12, 3).unwrap();
        let tr = ModulationTrajectory::from_picard(&sol, &s, 0).unwrap();
        assert!(tr.to_csv().starts_with("t,a,adot,x_plus,x_minus,g_overlap\n"));
        assert_eq!(tr.a[0], 1.0);
        assert!(!tr.left_window);
        assert_eq!(tr.adot_l1(), 0.0);
    }
}
