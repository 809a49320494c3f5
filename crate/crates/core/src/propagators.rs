//! Free radial wave propagators by exact d'Alembert transport of w = r f,
//! the perturbed evolution for H = −Δ + V by leapfrog, and the secular
//! splitting of the perturbed sine/cosine evolutions.

use crate::error::{Error, Result};
use crate::grid::{field_from_w, inner_w, RadialField, RadialGrid};
use crate::soliton::potential_raw;
use crate::spectral::SpectralData;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Radial field sampled at t_m = m·dt on the first `nodes` grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    grid: RadialGrid,
    nodes: usize,
    dt: f64,
    samples: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: RadialGrid, nodes: usize, dt: f64) -> Result<Self> {
        if nodes == 0 || nodes > grid.len() {
            return Err(Error::Usage(format!("stored node count {nodes} out of range")));
        }
        if !(dt > 0.0) {
            return Err(Error::Usage(format!("dt must be positive, got {dt}")));
        }
        Ok(SpaceTimeField { grid, nodes, dt, samples: Vec::new() })
    }

    /// Field constant in time.
    pub fn constant(f: &RadialField, dt: f64, steps: usize) -> Result<Self> {
        let mut s = Self::new(*f.grid(), f.grid().len(), dt)?;
        for _ in 0..=steps {
            s.push(f.values());
        }
        Ok(s)
    }

    pub fn from_fn(grid: RadialGrid, nodes: usize, dt: f64, steps: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut s = Self::new(grid, nodes, dt)?;
        let mut buf = vec![0.0; nodes];
        for m in 0..=steps {
            let t = m as f64 * dt;
            for (j, b) in buf.iter_mut().enumerate() {
                *b = f(grid.r(j), t);
            }
            s.push(&buf);
        }
        Ok(s)
    }

    pub fn push(&mut self, slice: &[f64]) {
        self.samples.extend_from_slice(&slice[..self.nodes]);
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of stored time levels M+1.
    pub fn steps(&self) -> usize {
        self.samples.len() / self.nodes
    }

    pub fn horizon(&self) -> f64 {
        (self.steps().saturating_sub(1)) as f64 * self.dt
    }

    /// Radius of the stored ball.
    pub fn r_obs(&self) -> f64 {
        self.grid.r(self.nodes - 1)
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        &self.samples[m * self.nodes..(m + 1) * self.nodes]
    }

    pub fn slice_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.samples[m * self.nodes..(m + 1) * self.nodes]
    }

    pub fn value(&self, j: usize, m: usize) -> f64 {
        self.samples[m * self.nodes + j]
    }

    /// Slice m as a full-grid field, zero beyond the stored ball.
    pub fn field_at(&self, m: usize) -> RadialField {
        let mut v = vec![0.0; self.grid.len()];
        v[..self.nodes].copy_from_slice(self.slice(m));
        RadialField::from_vec_unchecked(self.grid, v)
    }

    pub fn time_series(&self, j: usize) -> Vec<f64> {
        (0..self.steps()).map(|m| self.value(j, m)).collect()
    }

    /// Restrict to the first `nodes` points.
    pub fn restrict(&self, nodes: usize) -> Result<Self> {
        let nodes = nodes.min(self.nodes);
        let mut out = Self::new(self.grid, nodes, self.dt)?;
        for m in 0..self.steps() {
            out.push(&self.slice(m)[..nodes]);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<Self> {
        self.grid.same(&other.grid)?;
        if self.nodes != other.nodes || self.steps() != other.steps() || (self.dt - other.dt).abs() > 1e-14 {
            return Err(Error::Usage("space-time fields have different shapes".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        Ok(SpaceTimeField { grid: self.grid, nodes: self.nodes, dt: self.dt, samples })
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.samples.iter_mut().for_each(|v| *v *= c);
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }
}

/// Free-transport data for w = r f, oddly extended to r < 0 and zero beyond R.
struct Transport {
    dr: f64,
    radius: f64,
    w: Vec<f64>,
    cum: Vec<f64>,
}

impl Transport {
    fn new(grid: &RadialGrid, w: Vec<f64>) -> Self {
        let dr = grid.dr();
        let mut cum = vec![0.0; w.len()];
        for j in 1..w.len() {
            cum[j] = cum[j - 1] + 0.5 * dr * (w[j - 1] + w[j]);
        }
        Transport { dr, radius: grid.radius(), w, cum }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let s = x / self.dr;
        let mut i = s.floor() as usize;
        let mut frac = s - i as f64;
        if frac > 1.0 - 1e-9 {
            i += 1;
            frac = 0.0;
        } else if frac < 1e-9 {
            frac = 0.0;
        }
        (i, frac)
    }

    /// w̃(x): odd, zero beyond R, linear between nodes.
    fn w_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return -self.w_at(-x);
        }
        if x > self.radius + 1e-9 * self.dr {
            return 0.0;
        }
        let (i, f) = self.locate(x);
        if i + 1 >= self.w.len() {
            return self.w[self.w.len() - 1];
        }
        self.w[i] + f * (self.w[i + 1] - self.w[i])
    }

    /// ∫₀^|x| w̃, exact for the piecewise-linear w̃.
    fn cum_at(&self, x: f64) -> f64 {
        let x = x.abs();
        if x >= self.radius {
            return self.cum[self.cum.len() - 1];
        }
        let (i, f) = self.locate(x);
        if i + 1 >= self.w.len() {
            return self.cum[self.cum.len() - 1];
        }
        let s = f * self.dr;
        self.cum[i] + self.w[i] * s + 0.5 * (self.w[i + 1] - self.w[i]) * s * s / self.dr
    }
}

fn check_time(grid: &RadialGrid, t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    if t > grid.radius() {
        return Err(Error::Usage(format!("t = {t} exceeds the grid radius {}", grid.radius())));
    }
    Ok(())
}

/// Solution with its reduced derivatives v_t = r u_t and v_r = ∂ᵣ(r u).
#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: RadialField,
    pub vt: Vec<f64>,
    pub vr: Vec<f64>,
}

impl WaveState {
    /// ‖∂ₜu‖₂² + ‖∇u‖₂² as 4π∫(v_t² + v_r²) dr.
    pub fn energy(&self) -> f64 {
        let g = self.u.grid();
        inner_w(g, &self.vt, &self.vt)
            + inner_w(g, &self.vr, &self.vr)
            + 4.0 * PI * 0.5 * g.dr() * (self.vt[0].powi(2) + self.vr[0].powi(2))
    }
}

/// sin(t√−Δ)/√−Δ f.
pub fn free_sine(f: &RadialField, t: f64) -> Result<RadialField> {
    Ok(free_sine_state(f, t)?.u)
}

pub fn free_sine_state(f: &RadialField, t: f64) -> Result<WaveState> {
    let grid = *f.grid();
    check_time(&grid, t)?;
    let tr = Transport::new(&grid, f.w());
    let n = grid.len();
    let mut u = vec![0.0; n];
    let mut vt = vec![0.0; n];
    let mut vr = vec![0.0; n];
    for j in 0..n {
        let r = grid.r(j);
        let (p, q) = (tr.w_at(r + t), tr.w_at(r - t));
        vt[j] = 0.5 * (p + q);
        vr[j] = 0.5 * (p - q);
        if j > 0 {
            u[j] = 0.5 * (tr.cum_at(r + t) - tr.cum_at(r - t)) / r;
        }
    }
    u[0] = tr.w_at(t);
    Ok(WaveState { u: RadialField::from_vec_unchecked(grid, u), vt, vr })
}

fn w_derivative(f: &RadialField) -> Vec<f64> {
    let grid = f.grid();
    let w = f.w();
    let n = w.len();
    let dr = grid.dr();
    let mut d = vec![0.0; n];
    d[0] = f.values()[0];
    for j in 1..n - 1 {
        d[j] = (w[j + 1] - w[j - 1]) / (2.0 * dr);
    }
    d[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * dr);
    d
}

/// cos(t√−Δ) g0.
pub fn free_cosine(g0: &RadialField, t: f64) -> Result<RadialField> {
    Ok(free_cosine_state(g0, t)?.u)
}

pub fn free_cosine_state(g0: &RadialField, t: f64) -> Result<WaveState> {
    let grid = *g0.grid();
    check_time(&grid, t)?;
    if t == 0.0 {
        let d = w_derivative(g0);
        return Ok(WaveState { u: g0.clone(), vt: vec![0.0; grid.len()], vr: d });
    }
    let tw = Transport::new(&grid, g0.w());
    // w' is even; store it on [0,R] and read it through an even extension
    let td = Transport::new(&grid, w_derivative(g0));
    let dw = |x: f64| td.w_at(x.abs());
    let n = grid.len();
    let mut u = vec![0.0; n];
    let mut vt = vec![0.0; n];
    let mut vr = vec![0.0; n];
    for j in 0..n {
        let r = grid.r(j);
        let (p, q) = (dw(r + t), dw(r - t));
        vt[j] = 0.5 * (p - q);
        vr[j] = 0.5 * (p + q);
        if j > 0 {
            u[j] = 0.5 * (tw.w_at(r + t) + tw.w_at(r - t)) / r;
        }
    }
    u[0] = dw(t);
    Ok(WaveState { u: RadialField::from_vec_unchecked(grid, u), vt, vr })
}

pub(crate) fn check_budget(grid: &RadialGrid, r_obs: f64, horizon: f64) -> Result<()> {
    if grid.radius() + 1e-9 < r_obs + horizon {
        return Err(Error::Usage(format!("causality budget violated: R = {} < R_obs + T = {}", grid.radius(), r_obs + horizon)));
    }
    Ok(())
}

pub(crate) fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Usage(format!("bad time grid T = {horizon}, dt = {dt}")));
    }
    Ok((horizon / dt).round() as usize)
}

/// Free sine evolution sampled on B_{r_obs} × [0,T].
pub fn free_sine_trajectory(f: &RadialField, horizon: f64, dt: f64, r_obs: f64) -> Result<SpaceTimeField> {
    free_trajectory(f, horizon, dt, r_obs, false)
}

/// Free cosine evolution sampled on B_{r_obs} × [0,T].
pub fn free_cosine_trajectory(g0: &RadialField, horizon: f64, dt: f64, r_obs: f64) -> Result<SpaceTimeField> {
    free_trajectory(g0, horizon, dt, r_obs, true)
}

fn free_trajectory(f: &RadialField, horizon: f64, dt: f64, r_obs: f64, cosine: bool) -> Result<SpaceTimeField> {
    let grid = *f.grid();
    check_budget(&grid, r_obs, horizon)?;
    let steps = steps_for(horizon, dt)?;
    let nodes = grid.ball_len(r_obs);
    let tw = Transport::new(&grid, f.w());
    let td = Transport::new(&grid, if cosine { w_derivative(f) } else { vec![0.0; grid.len()] });
    let mut out = SpaceTimeField::new(grid, nodes, dt)?;
    let mut buf = vec![0.0; nodes];
    for m in 0..=steps {
        let t = m as f64 * dt;
        for (j, b) in buf.iter_mut().enumerate().skip(1) {
            let r = grid.r(j);
            *b = if cosine { 0.5 * (tw.w_at(r + t) + tw.w_at(r - t)) / r } else { 0.5 * (tw.cum_at(r + t) - tw.cum_at(r - t)) / r };
        }
        buf[0] = if cosine { td.w_at(t) } else { tw.w_at(t) };
        out.push(&buf);
    }
    Ok(out)
}

/// One exact free sine step of length dr applied to reduced samples.
fn sine_unit_step(w: &[f64], dr: f64, out: &mut [f64]) {
    let n = w.len();
    out[0] = 0.0;
    for j in 1..n {
        let right = if j + 1 < n { w[j + 1] } else { 0.0 };
        out[j] = 0.25 * dr * (w[j - 1] + 2.0 * w[j] + right);
    }
}

/// ∫₀ᵗ sin((t−s)√−Δ)/√−Δ F(s) ds with the trapezoid rule in s.
///
/// When dt equals dr the superposition is evaluated by an exact three-level
/// recursion in O(Mn); otherwise slices are superposed directly.
pub fn free_duhamel(source: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grid = *source.grid();
    let dr = grid.dr();
    if ((source.dt() - dr) / dr).abs() < 1e-10 {
        free_duhamel_recursive(source)
    } else {
        free_duhamel_direct(source)
    }
}

fn free_duhamel_recursive(source: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grid = *source.grid();
    let n = grid.len();
    let dr = grid.dr();
    let dt = source.dt();
    let nodes = source.nodes();
    let steps = source.steps();
    let mut out = SpaceTimeField::new(grid, nodes, dt)?;
    let w_of = |m: usize| {
        let mut w = vec![0.0; n];
        for (j, v) in source.slice(m).iter().enumerate() {
            w[j] = grid.r(j) * v;
        }
        w
    };
    let mut s1 = vec![0.0; n];
    let mut prev = vec![0.0; n];
    sine_unit_step(&w_of(0), dr, &mut s1);
    let mut cur: Vec<f64> = s1.iter().map(|v| 0.5 * dt * v).collect();
    out.push(&vec![0.0; nodes]);
    if steps > 1 {
        out.push(&field_from_w(&grid, &cur));
    }
    let mut next = vec![0.0; n];
    for m in 1..steps.saturating_sub(1) {
        sine_unit_step(&w_of(m), dr, &mut s1);
        next[0] = 0.0;
        for j in 1..n {
            let right = if j + 1 < n { cur[j + 1] } else { 0.0 };
            next[j] = right + cur[j - 1] - prev[j] + dt * s1[j];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        out.push(&field_from_w(&grid, &cur));
    }
    Ok(out)
}

/// Direct O(M²n) superposition of free sine slices.
pub fn free_duhamel_direct(source: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grid = *source.grid();
    let nodes = source.nodes();
    let dt = source.dt();
    let steps = source.steps();
    let slices: Vec<Transport> = (0..steps)
        .map(|m| {
            let mut w = vec![0.0; grid.len()];
            for (j, v) in source.slice(m).iter().enumerate() {
                w[j] = grid.r(j) * v;
            }
            Transport::new(&grid, w)
        })
        .collect();
    let mut out = SpaceTimeField::new(grid, nodes, dt)?;
    let mut v = vec![0.0; nodes];
    for m in 0..steps {
        v.iter_mut().for_each(|x| *x = 0.0);
        for (l, tr) in slices.iter().enumerate().take(m + 1) {
            let wgt = if l == 0 || l == m { 0.5 } else { 1.0 } * dt;
            let t = (m - l) as f64 * dt;
            if t == 0.0 {
                continue;
            }
            for (j, x) in v.iter_mut().enumerate() {
                let r = grid.r(j);
                *x += wgt * 0.5 * (tr.cum_at(r + t) - tr.cum_at(r - t));
            }
        }
        out.push(
            &field_from_w(&grid, &{
                let mut full = vec![0.0; grid.len()];
                full[..nodes].copy_from_slice(&v);
                full
            })[..nodes],
        );
    }
    Ok(out)
}

/// Options shared by the leapfrog evolutions.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Radius of the stored ball; the whole grid when `None`.
    pub r_obs: Option<f64>,
    /// Store every `stride`-th level.
    pub stride: usize,
    /// Re-apply P_c to the state after every step.
    pub project: bool,
    /// Record the linear energy at every stored level.
    pub energy: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { r_obs: None, stride: 1, project: false, energy: false }
    }
}

#[derive(Debug, Clone)]
pub struct LinearTrajectory {
    pub u: SpaceTimeField,
    /// ½‖u_t‖² + ½⟨Hu,u⟩ at each stored level, when requested.
    pub energy: Vec<f64>,
}

/// Three-level leapfrog state in reduced variables.
pub(crate) struct Leapfrog {
    pub dt: f64,
    pub prev: Vec<f64>,
    pub cur: Vec<f64>,
    pub next: Vec<f64>,
    pub acc: Vec<f64>,
    pub m: usize,
}

impl Leapfrog {
    pub fn check_cfl(grid: &RadialGrid, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt > grid.dr() * (1.0 + 1e-10) {
            return Err(Error::Usage(format!("CFL violated: dt = {dt} > dr = {}", grid.dr())));
        }
        Ok(())
    }

    /// Taylor start: w¹ = w⁰ + dt·v⁰ + ½dt²·a⁰.
    pub fn start(dt: f64, w0: Vec<f64>, v0: &[f64], acc: impl FnOnce(&[f64], &mut [f64])) -> Self {
        let n = w0.len();
        let mut a = vec![0.0; n];
        acc(&w0, &mut a);
        let mut w1 = w0.clone();
        for j in 1..n - 1 {
            w1[j] += dt * v0[j] + 0.5 * dt * dt * a[j];
        }
        Leapfrog { dt, prev: w0, cur: w1, next: vec![0.0; n], acc: a, m: 1 }
    }

    /// Advance cur from level m to m+1.
    pub fn step(&mut self, acc: impl FnOnce(&[f64], &mut [f64])) -> Result<()> {
        acc(&self.cur, &mut self.acc);
        let n = self.cur.len();
        let dt2 = self.dt * self.dt;
        self.next[0] = self.cur[0];
        self.next[n - 1] = self.cur[n - 1];
        for j in 1..n - 1 {
            self.next[j] = 2.0 * self.cur[j] - self.prev[j] + dt2 * self.acc[j];
        }
        if !self.next.iter().all(|v| v.is_finite()) {
            return Err(Error::Instability { t: (self.m + 1) as f64 * self.dt });
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.next);
        self.m += 1;
        Ok(())
    }
}

/// Linear energy ½‖v‖² + ½‖∇u‖² + ½⟨Vu,u⟩ in reduced variables.
pub(crate) fn linear_energy(grid: &RadialGrid, w: &[f64], vel: &[f64], pot: &[f64]) -> f64 {
    let dr = grid.dr();
    let mut kin = 0.0;
    let mut pe = 0.0;
    for j in 1..w.len() {
        let tw = grid.trap_weight(j);
        kin += tw * vel[j] * vel[j];
        pe += tw * pot[j] * w[j] * w[j];
    }
    let grad: f64 = w.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / dr;
    4.0 * PI * 0.5 * (kin * dr + pe * dr + grad)
}

/// Leapfrog for u_tt + (−Δ + V)u = source with V = V(·,1), Dirichlet at r = 0, R.
pub fn evolve_linear_perturbed(
    u0: &RadialField,
    u1: &RadialField,
    source: Option<&SpaceTimeField>,
    horizon: f64,
    dt: f64,
    spectral: Option<&SpectralData>,
    opts: EvolveOptions,
) -> Result<LinearTrajectory> {
    evolve_linear_with_potential(u0, u1, source, horizon, dt, spectral, opts, |r| potential_raw(r, 1.0))
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_linear_with_potential(
    u0: &RadialField,
    u1: &RadialField,
    source: Option<&SpaceTimeField>,
    horizon: f64,
    dt: f64,
    spectral: Option<&SpectralData>,
    opts: EvolveOptions,
    potential: impl Fn(f64) -> f64,
) -> Result<LinearTrajectory> {
    let grid = *u0.grid();
    grid.same(u1.grid())?;
    Leapfrog::check_cfl(&grid, dt)?;
    let steps = steps_for(horizon, dt)?;
    let nodes = opts.r_obs.map_or(grid.len(), |r| grid.ball_len(r));
    if let Some(r) = opts.r_obs {
        check_budget(&grid, r, horizon)?;
    }
    if let Some(s) = source {
        grid.same(s.grid())?;
        if (s.dt() - dt).abs() > 1e-12 * dt || s.steps() < steps + 1 {
            return Err(Error::Usage("source time grid does not match the evolution".into()));
        }
    }
    if opts.project && spectral.is_none() {
        return Err(Error::Usage("projection requested without spectral data".into()));
    }
    let stride = opts.stride.max(1);
    let n = grid.len();
    let dr = grid.dr();
    let inv = 1.0 / (dr * dr);
    let pot: Vec<f64> = (0..n).map(|j| potential(grid.r(j))).collect();
    let rr = grid.nodes();
    let gw = spectral.map(|s| s.g.w());

    let mut w0 = u0.w();
    let mut v0 = u1.w();
    w0[n - 1] = 0.0;
    v0[n - 1] = 0.0;
    if let (true, Some(s), Some(g)) = (opts.project, spectral, gw.as_ref()) {
        s.project_w(&mut w0, g);
        s.project_w(&mut v0, g);
    }
    let acc_at = |m: usize, w: &[f64], a: &mut [f64]| {
        a[0] = 0.0;
        a[n - 1] = 0.0;
        let src = source.map(|s| s.slice(m));
        for j in 1..n - 1 {
            let mut v = (w[j + 1] - 2.0 * w[j] + w[j - 1]) * inv - pot[j] * w[j];
            if let Some(s) = src {
                if j < s.len() {
                    v += rr[j] * s[j];
                }
            }
            a[j] = v;
        }
    };

    let mut out = SpaceTimeField::new(grid, nodes, dt * stride as f64)?;
    let mut energy = Vec::new();
    out.push(&field_from_w(&grid, &w0));
    if opts.energy {
        energy.push(linear_energy(&grid, &w0, &v0, &pot));
    }
    if steps == 0 {
        return Ok(LinearTrajectory { u: out, energy });
    }
    let mut lf = Leapfrog::start(dt, w0, &v0, |w, a| acc_at(0, w, a));
    for m in 1..=steps {
        // cur holds level m
        if m < steps || opts.energy {
            let mm = m;
            lf.step(|w, a| acc_at(mm, w, a))?;
            if opts.project {
                let g = gw.as_ref().unwrap();
                let s = spectral.unwrap();
                s.project_w(&mut lf.prev, g);
                s.project_w(&mut lf.cur, g);
            }
            // prev holds level m now
            if m % stride == 0 {
                out.push(&field_from_w(&grid, &lf.prev));
                if opts.energy {
                    let vel: Vec<f64> = lf.cur.iter().zip(&lf.next).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
                    energy.push(linear_energy(&grid, &lf.prev, &vel, &pot));
                }
            }
        } else if m % stride == 0 {
            out.push(&field_from_w(&grid, &lf.cur));
        }
    }
    Ok(LinearTrajectory { u: out, energy })
}

/// The perturbed evolution of P_c f split into its secular part and remainder.
#[derive(Debug, Clone)]
pub struct SecularSplit {
    pub full: SpaceTimeField,
    pub secular: SpaceTimeField,
    pub remainder: SpaceTimeField,
    /// Time-integrated free pairing ∫₀ᵗ⟨free evolution, V∂ₐφ⟩ds.
    pub pairing: Vec<f64>,
}

fn secular_split(f: &RadialField, spectral: &SpectralData, horizon: f64, dt: f64, r_obs: f64, cosine: bool) -> Result<SecularSplit> {
    let grid = spectral.grid;
    grid.same(f.grid())?;
    check_budget(&grid, r_obs, horizon)?;
    let pf = spectral.project_continuous(f)?;
    let zero = RadialField::zeros(grid);
    let opts = EvolveOptions { r_obs: Some(r_obs), stride: 1, project: true, energy: false };
    let full = if cosine {
        evolve_linear_perturbed(&pf, &zero, None, horizon, dt, Some(spectral), opts)?
    } else {
        evolve_linear_perturbed(&zero, &pf, None, horizon, dt, Some(spectral), opts)?
    }
    .u;
    let steps = full.steps();
    let tw = Transport::new(&grid, pf.w());
    let vw = spectral.v_resonance.w();
    let mut q = vec![0.0; steps];
    let mut v = vec![0.0; grid.len()];
    for (m, qm) in q.iter_mut().enumerate() {
        let t = m as f64 * dt;
        for (j, x) in v.iter_mut().enumerate() {
            let r = grid.r(j);
            *x = if cosine { 0.5 * (tw.w_at(r + t) + tw.w_at(r - t)) } else { 0.5 * (tw.cum_at(r + t) - tw.cum_at(r - t)) };
        }
        *qm = inner_w(&grid, &v, &vw);
    }
    let mut pairing = vec![0.0; steps];
    for m in 1..steps {
        pairing[m] = pairing[m - 1] + 0.5 * dt * (q[m - 1] + q[m]);
    }
    let cq = spectral.c_q();
    let nodes = full.nodes();
    let res = &spectral.resonance.values()[..nodes];
    let mut secular = SpaceTimeField::new(grid, nodes, dt)?;
    let mut buf = vec![0.0; nodes];
    for p in &pairing {
        for (b, d) in buf.iter_mut().zip(res) {
            *b = -cq * p * d;
        }
        secular.push(&buf);
    }
    let remainder = full.sub(&secular)?;
    Ok(SecularSplit { full, secular, remainder, pairing })
}

/// sin(t√H)P_c/√H f = Q∫₀ᵗ sin(s√−Δ)/√−Δ P_c f ds + S(t)f.
pub fn secular_decomposition_s(f: &RadialField, spectral: &SpectralData, horizon: f64, dt: f64, r_obs: f64) -> Result<SecularSplit> {
    secular_split(f, spectral, horizon, dt, r_obs, false)
}

/// cos(t√H)P_c g0 = Q∫₀ᵗ cos(s√−Δ)P_c g0 ds + C(t)g0.
pub fn secular_decomposition_c(g0: &RadialField, spectral: &SpectralData, horizon: f64, dt: f64, r_obs: f64) -> Result<SecularSplit> {
    secular_split(g0, spectral, horizon, dt, r_obs, true)
}

/// ∫₀ᵀ⟨Δ∂ₐφ, sin(t√−Δ)/√−Δ ψ₁⟩dt with Δ∂ₐφ = V∂ₐφ in closed form.
pub fn resonance_pairing_integral(psi1: &RadialField, spectral: &SpectralData, horizon: f64, dt: f64) -> Result<f64> {
    let grid = *psi1.grid();
    grid.same(&spectral.grid)?;
    check_time(&grid, horizon)?;
    let steps = steps_for(horizon, dt)?;
    let tr = Transport::new(&grid, psi1.w());
    let vw = spectral.v_resonance.w();
    let mut v = vec![0.0; grid.len()];
    let mut acc = 0.0;
    for m in 0..=steps {
        let t = m as f64 * dt;
        for (j, x) in v.iter_mut().enumerate() {
            let r = grid.r(j);
            *x = 0.5 * (tr.cum_at(r + t) - tr.cum_at(r - t));
        }
        let wgt = if m == 0 || m == steps { 0.5 } else { 1.0 };
        acc += wgt * inner_w(&grid, &v, &vw);
    }
    Ok(acc * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::phi_raw;
    use crate::spectral::ground_state;

    fn ball(grid: RadialGrid) -> RadialField {
        RadialField::from_fn(grid, |r| if r <= 1.0 + 1e-12 { 1.0 } else { 0.0 })
    }

    #[test]
    fn sine_ball_at_origin() {
        let g = RadialGrid::new(10.0, 1001).unwrap();
        let f = ball(g);
        for &t in &[0.3, 0.7, 1.5, 2.0] {
            let u = free_sine(&f, t).unwrap();
            let expect = if t < 1.0 { t } else { 0.0 };
            assert!((u.values()[0] - expect).abs() < 1e-12, "t={t}");
        }
        assert!(free_sine(&f, 0.0).unwrap().max_abs() == 0.0);
        assert!(free_sine(&f, -1.0).is_err());
    }

    #[test]
    fn sine_small_time_limit() {
        let g = RadialGrid::new(10.0, 2001).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        let t = 4.0 * g.dr();
        let u = free_sine(&f, t).unwrap().scale(1.0 / t);
        let err = (0..g.ball_len(5.0)).map(|j| (u.values()[j] - f.values()[j]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn sine_energy_identity_exact() {
        let g = RadialGrid::new(30.0, 1201).unwrap();
        let f = RadialField::from_fn(g, |r| (-(r - 2.0).powi(2)).exp() * (3.0 * r).sin());
        let e0 = f.l2_norm().powi(2);
        for m in [0, 7, 40, 200] {
            let s = free_sine_state(&f, m as f64 * g.dr()).unwrap();
            assert!((s.energy() - e0).abs() < 1e-10 * e0, "m={m} {} {}", s.energy(), e0);
        }
    }

    #[test]
    fn cosine_identities() {
        let g = RadialGrid::new(40.0, 1601).unwrap();
        let p = RadialField::from_fn(g, |r| phi_raw(r, 1.0));
        assert_eq!(free_cosine(&p, 0.0).unwrap().values(), p.values());
        let e0 = free_cosine_state(&p, 0.0).unwrap().energy();
        for m in [5, 50, 300] {
            let s = free_cosine_state(&p, m as f64 * g.dr()).unwrap();
            assert!(s.energy() <= e0 * (1.0 + 1e-10));
        }
        // closed form at the origin for g0 = (1+r²)⁻¹: w' of r/(1+r²)
        let h = RadialField::from_fn(g, |r| 1.0 / (1.0 + r * r));
        for &t in &[0.5, 1.0, 3.0] {
            let u = free_cosine(&h, t).unwrap();
            let exact = (1.0 - t * t) / (1.0 + t * t).powi(2);
            assert!((u.values()[0] - exact).abs() < 1e-3, "{t}");
        }
    }

    #[test]
    fn huygens() {
        let g = RadialGrid::new(20.0, 2001).unwrap();
        let f = ball(g);
        let u = free_sine(&f, 5.0).unwrap();
        for j in 0..g.len() {
            let r = g.r(j);
            if !(4.0 - 1e-9..=6.0 + 1e-9).contains(&r) {
                assert!(u.values()[j].abs() < 1e-14, "r={r}");
            }
        }
    }

    #[test]
    fn duhamel_closed_form_and_direct() {
        let g = RadialGrid::new(12.0, 601).unwrap();
        let f = ball(g);
        let dt = g.dr();
        let src = SpaceTimeField::constant(&f, dt, 100).unwrap();
        let d = free_duhamel(&src).unwrap();
        for m in [10, 40, 100] {
            let t = m as f64 * dt;
            let expect = t.min(1.0).powi(2) / 2.0;
            // the jump of χ is smeared over one cell
            assert!((d.value(0, m) - expect).abs() < g.dr(), "{} {}", d.value(0, m), expect);
        }
        let smooth = SpaceTimeField::from_fn(g, g.len(), dt, 60, |r, t| (-(r - 1.0).powi(2)).exp() * (1.0 + t).cos()).unwrap();
        let a = free_duhamel(&smooth).unwrap();
        let b = free_duhamel_direct(&smooth).unwrap();
        let m = g.ball_len(5.0);
        for step in [1, 2, 30, 60] {
            for j in 1..m {
                assert!((a.value(j, step) - b.value(j, step)).abs() < 1e-12, "{step} {j}");
            }
        }
        let zero = SpaceTimeField::from_fn(g, g.len(), dt, 20, |_, _| 0.0).unwrap();
        assert_eq!(free_duhamel(&zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn duhamel_impulse() {
        let g = RadialGrid::new(12.0, 1201).unwrap();
        let dt = g.dr();
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        let l = 20;
        let src = SpaceTimeField::from_fn(g, g.len(), dt, 200, |r, t| if (t - l as f64 * dt).abs() < 1e-12 { (-r * r).exp() } else { 0.0 })
            .unwrap();
        let d = free_duhamel(&src).unwrap();
        let m = 150;
        let s = free_sine(&f, (m - l) as f64 * dt).unwrap().scale(dt);
        let err = (0..g.ball_len(4.0)).map(|j| (d.value(j, m) - s.values()[j]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12 + dt * dt, "{err}");
    }

    #[test]
    fn leapfrog_matches_free_transport() {
        let g = RadialGrid::new(20.0, 1601).unwrap();
        let f = RadialField::from_fn(g, |r| (-(r - 2.0).powi(2)).exp());
        let z = RadialField::zeros(g);
        let traj = evolve_linear_with_potential(&z, &f, None, 6.0, g.dr(), None, EvolveOptions::default(), |_| 0.0).unwrap();
        let m = traj.u.steps() - 1;
        let exact = free_sine(&f, m as f64 * g.dr()).unwrap();
        let err = (1..g.ball_len(10.0)).map(|j| (traj.u.value(j, m) - exact.values()[j]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn growing_mode_rate() {
        let g = RadialGrid::new(30.0, 1201).unwrap();
        let s = ground_state(&g).unwrap();
        let z = RadialField::zeros(g);
        let tr = evolve_linear_perturbed(&s.g, &z, None, 4.0, g.dr(), Some(&s), EvolveOptions::default()).unwrap();
        let norm = |m: usize| tr.u.field_at(m).l2_norm();
        let (m1, m2) = (80, 160);
        let t1 = m1 as f64 * g.dr();
        let t2 = m2 as f64 * g.dr();
        let fit = ((norm(m2) / (s.k * t2).cosh()) / (norm(m1) / (s.k * t1).cosh())).ln();
        assert!(fit.abs() < 0.01, "{fit}");
        let pf = s.project_continuous(&RadialField::from_fn(g, |r| (-(r - 1.0).powi(2)).exp())).unwrap();
        let opts = EvolveOptions { r_obs: Some(10.0), stride: 1, project: true, energy: false };
        let tr = evolve_linear_perturbed(&pf, &z, None, 10.0 / s.k, g.dr(), Some(&s), opts).unwrap();
        let peak = (0..tr.u.steps()).map(|m| tr.u.field_at(m).l2_norm()).fold(0.0, f64::max);
        assert!(peak < 2.0 * pf.l2_norm());
    }

    #[test]
    fn budget_and_cfl_guards() {
        let g = RadialGrid::new(20.0, 401).unwrap();
        let f = RadialField::zeros(g);
        assert!(free_sine_trajectory(&f, 15.0, g.dr(), 10.0).is_err());
        let o = EvolveOptions::default();
        assert!(evolve_linear_perturbed(&f, &f, None, 1.0, 2.0 * g.dr(), None, o).is_err());
    }
}
