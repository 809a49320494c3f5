//! Ground state (−k², g) of H = −Δ + V on radial functions, the continuous
//! projection P_c, the x_± coordinates and the rank-one secular operator Q.

use crate::error::{Error, Result};
use crate::grid::{inner_w, RadialField, RadialGrid};
use crate::soliton::{dphi_da_raw, potential_raw};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// −∂²ᵣ + V(r,a) on w_1..w_{n−2}, Dirichlet at both ends.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl Tridiagonal {
    pub fn schrodinger(grid: &RadialGrid, a: f64) -> Self {
        let dr = grid.dr();
        let inv = 1.0 / (dr * dr);
        let diag = (1..grid.len() - 1).map(|j| 2.0 * inv + potential_raw(grid.r(j), a)).collect();
        Tridiagonal { diag, off: -inv }
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm sequence).
    pub fn count_below(&self, lambda: f64) -> usize {
        let b2 = self.off * self.off;
        let mut d = 1.0;
        let mut count = 0;
        for (i, &a) in self.diag.iter().enumerate() {
            d = if i == 0 { a - lambda } else { a - lambda - b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (a.abs() + lambda.abs());
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.diag.len();
        for i in 0..m {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off * x[i - 1];
            }
            if i + 1 < m {
                s += self.off * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solve (T − μ)x = b by the Thomas algorithm.
    pub fn solve_shifted(&self, mu: f64, b: &[f64]) -> Vec<f64> {
        let m = self.diag.len();
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut piv = self.diag[0] - mu;
        c[0] = self.off / piv;
        d[0] = b[0] / piv;
        for i in 1..m {
            piv = self.diag[i] - mu - self.off * c[i - 1];
            c[i] = self.off / piv;
            d[i] = (b[i] - self.off * d[i - 1]) / piv;
        }
        let mut x = vec![0.0; m];
        x[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }

    /// Smallest eigenvalue by bisection on the Sturm count.
    pub fn min_eigenvalue(&self) -> f64 {
        let gersh = self.diag.iter().fold(f64::INFINITY, |m, &d| m.min(d)) - 2.0 * self.off.abs();
        let (mut lo, mut hi) = (gersh, self.diag.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d)) + 2.0 * self.off.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// ∫_R^∞ 4πr² V ∂ₐφ dr at a = 1, by Simpson's rule after r = R/s.
pub fn pairing_tail(radius: f64) -> f64 {
    let m = 400;
    let h = 1.0 / m as f64;
    let f = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let r = radius / s;
        4.0 * PI * r * r * potential_raw(r, 1.0) * dphi_da_raw(r, 1.0) * radius / (s * s)
    };
    let mut acc = f(0.0) + f(1.0);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub grid: RadialGrid,
    /// Scale a at which H was assembled.
    pub a: f64,
    pub k: f64,
    pub g: RadialField,
    /// ∂ₐφ at a = 1.
    pub resonance: RadialField,
    /// V∂ₐφ at a = 1, closed form.
    pub v_resonance: RadialField,
    /// ⟨V,∂ₐφ⟩ including the analytic tail beyond R.
    #[serde(rename = "pairing_VdaPhi")]
    pub pairing_v_dadphi: f64,
    pub gg: f64,
    pub residual: f64,
    pub negative_count: usize,
}

/// Ground state of H at a = 1.
pub fn ground_state(grid: &RadialGrid) -> Result<SpectralData> {
    ground_state_at(grid, 1.0)
}

/// Ground state of H(a) = −Δ − 5φ(·,a)⁴.
pub fn ground_state_at(grid: &RadialGrid, a: f64) -> Result<SpectralData> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let t = Tridiagonal::schrodinger(grid, a);
    let negative_count = t.count_below(0.0);
    match negative_count {
        0 => return Err(Error::Discretization(format!("no negative eigenvalue on R={}, n={}", grid.radius(), grid.len()))),
        1 => {}
        c => return Err(Error::Guard(format!("{c} negative symmetric eigenvalues found"))),
    }
    let lam0 = t.min_eigenvalue();
    let m = t.diag.len();
    let mu = lam0 - 1e-10 * lam0.abs().max(1.0);
    let mut x = vec![1.0; m];
    for _ in 0..4 {
        x = t.solve_shifted(mu, &x);
        let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= s);
    }
    let mut tx = vec![0.0; m];
    t.apply(&x, &mut tx);
    let lambda: f64 = x.iter().zip(&tx).map(|(a, b)| a * b).sum();
    let k = (-lambda).sqrt();

    let n = grid.len();
    let mut w = vec![0.0; n];
    w[1..n - 1].copy_from_slice(&x);
    let norm = inner_w(grid, &w, &w).sqrt();
    let sign = if w[1] < 0.0 { -1.0 } else { 1.0 };
    w.iter_mut().for_each(|v| *v *= sign / norm);
    let g = RadialField::from_w(*grid, &w);

    t.apply(&w[1..n - 1], &mut tx);
    let mut res = vec![0.0; n];
    for i in 0..m {
        res[i + 1] = tx[i] + k * k * w[i + 1];
    }
    let residual = inner_w(grid, &res, &res).sqrt();

    let resonance = RadialField::from_fn(*grid, |r| dphi_da_raw(r, 1.0));
    let v_resonance = RadialField::from_fn(*grid, |r| potential_raw(r, 1.0) * dphi_da_raw(r, 1.0));
    let ones = RadialField::from_fn(*grid, |r| potential_raw(r, 1.0));
    let pairing_v_dadphi = ones.inner_product(&resonance)? + pairing_tail(grid.radius());
    let gg = g.inner_product(&g)?;
    Ok(SpectralData { grid: *grid, a, k, g, resonance, v_resonance, pairing_v_dadphi, gg, residual, negative_count })
}

/// Richardson extrapolation of k from grids with n and 2n−1 nodes.
pub fn richardson_k(radius: f64, n: usize) -> Result<f64> {
    let c = ground_state(&RadialGrid::new(radius, n)?)?.k;
    let f = ground_state(&RadialGrid::new(radius, 2 * n - 1)?)?.k;
    Ok((4.0 * f - c) / 3.0)
}

impl SpectralData {
    /// 4π/⟨V,∂ₐφ⟩².
    pub fn c_q(&self) -> f64 {
        4.0 * PI / (self.pairing_v_dadphi * self.pairing_v_dadphi)
    }

    pub fn overlap_g_resonance(&self) -> f64 {
        self.g.inner_product(&self.resonance).unwrap_or(f64::NAN)
    }

    pub fn g_overlap(&self, f: &RadialField) -> Result<f64> {
        f.inner_product(&self.g)
    }

    /// P_c f = f − ⟨f,g⟩g.
    pub fn project_continuous(&self, f: &RadialField) -> Result<RadialField> {
        let c = f.inner_product(&self.g)?;
        f.axpy(-c, &self.g)
    }

    /// In-place P_c on reduced samples.
    pub(crate) fn project_w(&self, w: &mut [f64], gw: &[f64]) {
        let c = inner_w(&self.grid, w, gw);
        w.iter_mut().zip(gw).for_each(|(a, b)| *a -= c * b);
    }

    /// (x₊, x₋) = (2k)^{-1/2}(k⟨u0,g⟩ ± ⟨u1,g⟩); x₊ grows like e^{kt}
    /// under the linearized flow.
    pub fn x_pm(&self, u0: &RadialField, u1: &RadialField) -> Result<(f64, f64)> {
        let a = self.k * u0.inner_product(&self.g)?;
        let b = u1.inner_product(&self.g)?;
        let c = (2.0 * self.k).powf(-0.5);
        Ok((c * (a + b), c * (a - b)))
    }

    /// Q f = −(4π/⟨V,∂ₐφ⟩²)⟨f,V∂ₐφ⟩∂ₐφ.
    pub fn secular_projector(&self, f: &RadialField) -> Result<RadialField> {
        let c = -self.c_q() * f.inner_product(&self.v_resonance)?;
        Ok(self.resonance.scale(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_counts_known_matrix() {
        // free Dirichlet Laplacian: eigenvalues (2 − 2cos(jπ/(m+1)))/dr²
        let t = Tridiagonal { diag: vec![2.0; 9], off: -1.0 };
        let ev = |j: usize| 2.0 - 2.0 * (j as f64 * PI / 10.0).cos();
        assert_eq!(t.count_below(ev(1) - 1e-9), 0);
        assert_eq!(t.count_below(ev(3) + 1e-9), 3);
        assert!((t.min_eigenvalue() - ev(1)).abs() < 1e-13);
    }

    #[test]
    fn ground_state_reference() {
        let s = ground_state(&RadialGrid::new(200.0, 8001).unwrap()).unwrap();
        assert!((s.k - 1.9058895181615).abs() < 1e-9, "{}", s.k);
        assert_eq!(s.negative_count, 1);
        assert!(s.residual < 1e-6);
        assert!((s.g.l2_norm() - 1.0).abs() < 1e-12);
        assert!(s.g.values()[0] > 0.0);
        let exact = PI * 3f64.powf(0.25);
        assert!(((s.pairing_v_dadphi - exact) / exact).abs() < 1e-4);
    }

    #[test]
    fn projections() {
        let s = ground_state(&RadialGrid::new(40.0, 1601).unwrap()).unwrap();
        let pg = s.project_continuous(&s.g).unwrap();
        assert!(pg.max_abs() < 1e-12);
        let f = RadialField::from_fn(s.grid, |r| (-(r - 1.5f64).powi(2)).exp() * (2.0 * r).cos());
        let p1 = s.project_continuous(&f).unwrap();
        let p2 = s.project_continuous(&p1).unwrap();
        assert!(p1.sub(&p2).unwrap().max_abs() < 1e-12);
        let (xp, xm) = s.x_pm(&s.g, &s.g.scale(s.k)).unwrap();
        assert!((xp - (2.0 * s.k).sqrt()).abs() < 1e-12 && xm.abs() < 1e-12);
        let (xp, xm) = s.x_pm(&s.g, &s.g.scale(-s.k)).unwrap();
        assert!(xp.abs() < 1e-12 && (xm - (2.0 * s.k).sqrt()).abs() < 1e-12);
        let (xp, xm) = s.x_pm(&p1, &p1).unwrap();
        assert!(xp.abs() < 1e-12 && xm.abs() < 1e-12);
    }

    #[test]
    fn secular_projector_rank_one() {
        let s = ground_state(&RadialGrid::new(100.0, 4001).unwrap()).unwrap();
        let q = s.secular_projector(&s.resonance).unwrap();
        let coef = q.values()[0] / s.resonance.values()[0];
        let expect = -s.c_q() * -1.001640016013213;
        assert!(((coef - expect) / expect).abs() < 1e-3, "{coef} {expect}");
        let f = RadialField::from_fn(s.grid, |r| (-r * r).exp());
        let c = f.inner_product(&s.v_resonance).unwrap() / s.v_resonance.l2_norm().powi(2);
        let perp = f.axpy(-c, &s.v_resonance).unwrap();
        assert!(s.secular_projector(&perp).unwrap().max_abs() < 1e-12);
        let a = s.secular_projector(&f.scale(3.0)).unwrap();
        let b = s.secular_projector(&f).unwrap().scale(3.0);
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
        assert!((s.c_q() - 4.0 / (PI * 3f64.sqrt())).abs() < 1e-5);
    }
}
