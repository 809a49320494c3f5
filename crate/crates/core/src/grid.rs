//! Uniform radial mesh on [0,R] and the discrete calculus on radial fields.
//!
//! Fields are stored by value f_j; most operators act on the reduced
//! variable w_j = r_j f_j, in which the radial Laplacian is a plain second
//! difference.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radius: f64,
    nodes: usize,
}

impl RadialGrid {
    pub fn new(radius: f64, nodes: usize) -> Result<Self> {
        if nodes < 16 {
            return Err(Error::Usage(format!("grid needs at least 16 nodes, got {nodes}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Usage(format!("grid radius must be positive, got {radius}")));
        }
        Ok(RadialGrid { radius, nodes })
    }

    /// Grid of outer radius `radius` with spacing as close to `dr` as possible.
    pub fn with_spacing(radius: f64, dr: f64) -> Result<Self> {
        let n = (radius / dr).round() as usize + 1;
        Self::new(radius, n)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        self.radius / (self.nodes - 1) as f64
    }

    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dr = self.dr();
        (0..self.nodes).map(|j| j as f64 * dr).collect()
    }

    /// Number of leading nodes with r_j ≤ r_obs.
    pub fn ball_len(&self, r_obs: f64) -> usize {
        let m = (r_obs / self.dr() + 1e-9).floor() as usize + 1;
        m.min(self.nodes)
    }

    /// Trapezoid weight of node j (½ at both ends).
    #[inline]
    pub fn trap_weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.nodes {
            0.5
        } else {
            1.0
        }
    }

    /// Volumes of the dual shells [r_j − dr/2, r_j + dr/2] ∩ [0, R].
    pub fn cell_volumes(&self) -> Vec<f64> {
        let dr = self.dr();
        (0..self.nodes)
            .map(|j| {
                let lo = (self.r(j) - 0.5 * dr).max(0.0);
                let hi = (self.r(j) + 0.5 * dr).min(self.radius);
                FOUR_PI / 3.0 * (hi.powi(3) - lo.powi(3))
            })
            .collect()
    }

    pub(crate) fn same(&self, other: &RadialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Usage(format!("grid mismatch: (R={}, n={}) vs (R={}, n={})", self.radius, self.nodes, other.radius, other.nodes)))
        }
    }
}

/// Recover f from w = r f, filling the origin by even extrapolation.
pub(crate) fn field_from_w(grid: &RadialGrid, w: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; w.len()];
    for j in 1..w.len() {
        f[j] = w[j] / grid.r(j);
    }
    if w.len() > 2 {
        f[0] = (4.0 * f[1] - f[2]) / 3.0;
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

/// Multiplier applied before a weighted norm: f ∈ ⟨x⟩⁻¹X means ⟨x⟩f ∈ X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightedKind {
    /// ⟨x⟩⁻¹Ḣ¹
    HdotOne,
    /// ⟨x⟩⁻¹L²
    LTwo,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!("field has {} samples, grid has {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("field has non-finite samples".into()));
        }
        Ok(RadialField { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        RadialField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.r(j))).collect();
        RadialField { grid, values }
    }

    /// Build a field from reduced samples w_j = r_j f_j.
    pub fn from_w(grid: RadialGrid, w: &[f64]) -> Self {
        RadialField { grid, values: field_from_w(&grid, w) }
    }

    pub(crate) fn from_vec_unchecked(grid: RadialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RadialField { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn w(&self) -> Vec<f64> {
        let dr = self.grid.dr();
        self.values.iter().enumerate().map(|(j, f)| j as f64 * dr * f).collect()
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let dr = self.grid.dr();
        let values = self.values.iter().enumerate().map(|(j, &v)| f(j as f64 * dr, v)).collect();
        RadialField { grid: self.grid, values }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|_, v| c * v)
    }

    /// self + c·other
    pub fn axpy(&self, c: f64, other: &RadialField) -> Result<Self> {
        self.grid.same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(RadialField { grid: self.grid, values })
    }

    pub fn add(&self, other: &RadialField) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn mul(&self, other: &RadialField) -> Result<Self> {
        self.grid.same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(RadialField { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max of |f| over nodes with r ≤ r_obs.
    pub fn max_abs_ball(&self, r_obs: f64) -> f64 {
        let m = self.grid.ball_len(r_obs);
        self.values[..m].iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// 4π Σ τ_j r_j² f_j g_j dr.
    pub fn inner_product(&self, other: &RadialField) -> Result<f64> {
        self.grid.same(&other.grid)?;
        Ok(inner_raw(&self.grid, &self.values, &other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        inner_raw(&self.grid, &self.values, &self.values).sqrt()
    }

    /// ‖∇f‖₂ from forward differences of w.
    pub fn h1_seminorm(&self) -> f64 {
        h1_raw(&self.grid, &self.w()).sqrt()
    }

    pub fn weighted_norm(&self, kind: WeightedKind) -> f64 {
        let jf = self.map(|r, v| (1.0 + r * r).sqrt() * v);
        match kind {
            WeightedKind::HdotOne => jf.h1_seminorm(),
            WeightedKind::LTwo => jf.l2_norm(),
        }
    }

    /// Δf = (1/r)∂²ᵣ(r f), second order, with the origin limit 6(f₁−f₀)/dr²
    /// and a one-sided closure at R.
    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        let n = g.len();
        let dr = g.dr();
        let inv = 1.0 / (dr * dr);
        let w = self.w();
        let mut out = vec![0.0; n];
        for j in 1..n - 1 {
            out[j] = (w[j + 1] - 2.0 * w[j] + w[j - 1]) * inv / g.r(j);
        }
        out[0] = 6.0 * (self.values[1] - self.values[0]) * inv;
        out[n - 1] = (2.0 * w[n - 1] - 5.0 * w[n - 2] + 4.0 * w[n - 3] - w[n - 4]) * inv / g.radius();
        RadialField { grid: g, values: out }
    }

    /// CSV with header `r,value` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * self.values.len());
        s.push_str("r,value\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e}", self.grid.r(j), v);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("r,value") {
            return Err(Error::Usage("expected header `r,value`".into()));
        }
        let mut rs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|x| x.trim().parse().ok()).ok_or_else(|| Error::Usage(format!("bad CSV row {}", i + 2)))
            };
            rs.push(parse(it.next())?);
            vs.push(parse(it.next())?);
        }
        let grid = RadialGrid::new(*rs.last().unwrap_or(&0.0), rs.len())?;
        RadialField::new(grid, vs)
    }
}

pub(crate) fn inner_raw(grid: &RadialGrid, f: &[f64], g: &[f64]) -> f64 {
    let dr = grid.dr();
    let n = f.len();
    let mut s = 0.0;
    for j in 1..n {
        let r = j as f64 * dr;
        s += grid.trap_weight(j) * r * r * f[j] * g[j];
    }
    FOUR_PI * s * dr
}

/// Inner product written in reduced variables, 4π Σ τ_j w_j v_j dr.
pub(crate) fn inner_w(grid: &RadialGrid, w: &[f64], v: &[f64]) -> f64 {
    let n = w.len();
    let mut s = 0.0;
    for j in 1..n {
        s += grid.trap_weight(j) * w[j] * v[j];
    }
    FOUR_PI * s * grid.dr()
}

pub(crate) fn h1_raw(grid: &RadialGrid, w: &[f64]) -> f64 {
    let dr = grid.dr();
    let s: f64 = w.windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum();
    FOUR_PI * s / dr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{dphi_da_raw, phi_raw, potential_raw};

    #[test]
    fn grid_guards() {
        assert!(RadialGrid::new(10.0, 8).is_err());
        assert!(RadialGrid::new(-1.0, 100).is_err());
        let g = RadialGrid::new(10.0, 101).unwrap();
        assert_eq!(g.dr(), 0.1);
        assert_eq!(g.r(100), 10.0);
        assert_eq!(g.ball_len(5.0), 51);
        let vol: f64 = g.cell_volumes().iter().sum();
        assert!((vol - 4.0 * PI / 3.0 * 1000.0).abs() < 1e-9);
    }

    #[test]
    fn phi_six_integral() {
        let g = RadialGrid::new(200.0, 4001).unwrap();
        let p = RadialField::from_fn(g, |r| phi_raw(r, 1.0));
        let p5 = p.map(|_, v| v.powi(5));
        let exact = 3f64.powf(1.5) * PI * PI / 4.0;
        let got = p.inner_product(&p5).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-6, "{got}");
        assert!((12.82099220496912 - exact).abs() < 1e-12);
        assert_eq!(p.inner_product(&p5).unwrap(), p5.inner_product(&p).unwrap());
    }

    #[test]
    fn pohozaev_gradient() {
        let g = RadialGrid::new(400.0, 32001).unwrap();
        let p = RadialField::from_fn(g, |r| phi_raw(r, 1.0));
        let exact = 3f64.powf(1.5) * PI * PI / 4.0;
        let got = p.h1_seminorm().powi(2);
        assert!(((got - exact) / exact).abs() < 1e-4, "{got}");
    }

    #[test]
    fn pairing_v_resonance_truncated() {
        // plain quadrature over [0,R] carries a tail of about 31/R²
        let g = RadialGrid::new(50.0, 2001).unwrap();
        let v = RadialField::from_fn(g, |r| potential_raw(r, 1.0));
        let d = RadialField::from_fn(g, |r| dphi_da_raw(r, 1.0));
        let got = v.inner_product(&d).unwrap();
        let exact = PI * 3f64.powf(0.25);
        assert!((exact - got - 31.0 / 2500.0).abs() < 2e-3, "{got}");
    }

    #[test]
    fn laplacian_consistency() {
        let g = RadialGrid::new(10.0, 401).unwrap();
        let c = RadialField::from_fn(g, |_| 2.5);
        let lc = c.laplacian();
        assert!(lc.values()[..400].iter().all(|v| v.abs() < 1e-9));
        let k = PI / 10.0;
        let f = RadialField::from_fn(g, |r| if r == 0.0 { k } else { (k * r).sin() / r });
        let lf = f.laplacian();
        let err = (1..400).map(|j| (lf.values()[j] + k * k * f.values()[j]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn residual_second_order() {
        let res = |n: usize| {
            let g = RadialGrid::new(40.0, n).unwrap();
            let p = RadialField::from_fn(g, |r| phi_raw(r, 1.0));
            let l = p.laplacian();
            let m = g.ball_len(20.0);
            (0..m).map(|j| (l.values()[j] + p.values()[j].powi(5)).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (res(401), res(801));
        assert!((b / a - 0.25).abs() < 0.03, "{}", a / b);
    }

    #[test]
    fn self_adjoint() {
        let g = RadialGrid::new(20.0, 801).unwrap();
        let f = RadialField::from_fn(g, |r| (-(r - 3.0).powi(2)).exp() * (1.0 + r).cos());
        let h = RadialField::from_fn(g, |r| (-(r * r) / 4.0).exp() * (20.0 - r));
        let lhs = f.laplacian().inner_product(&h).unwrap();
        let rhs = f.inner_product(&h.laplacian()).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * f.l2_norm() * h.l2_norm());
    }

    #[test]
    fn weighted_growth_exponent() {
        let mut pts = Vec::new();
        for &r in &[50.0, 100.0, 200.0] {
            let g = RadialGrid::new(r, (r * 20.0) as usize + 1).unwrap();
            let d = RadialField::from_fn(g, |r| dphi_da_raw(r, 1.0));
            pts.push((r.ln(), d.weighted_norm(WeightedKind::LTwo).ln()));
        }
        let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
        assert!((slope - 1.5).abs() < 0.02, "{slope}");
    }

    #[test]
    fn csv_roundtrip() {
        let g = RadialGrid::new(3.0, 31).unwrap();
        let f = RadialField::from_fn(g, |r| (r * 1.3).sin() / 7.0);
        let back = RadialField::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back.values(), f.values());
        assert!(f.to_csv().starts_with("r,value\n"));
    }
}
