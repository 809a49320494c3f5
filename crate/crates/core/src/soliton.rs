//! The Aubin–Talenti family φ(r,a) = (3a)^{1/4}(1+ar²)^{-1/2}, its scale
//! derivative (the zero resonance) and the linearization potential.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Soliton scale parameter, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SolitonScale(f64);

impl SolitonScale {
    /// Open window the modulation parameter must stay in during a run.
    pub const WINDOW: (f64, f64) = (0.5, 1.5);

    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && a.is_finite() {
            Ok(SolitonScale(a))
        } else {
            Err(Error::Domain(format!("soliton scale must be positive, got {a}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn in_window(self) -> bool {
        self.0 > Self::WINDOW.0 && self.0 < Self::WINDOW.1
    }
}

fn check(r: f64, a: f64) -> Result<()> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("r must be non-negative, got {r}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn phi_raw(r: f64, a: f64) -> f64 {
    (3.0 * a).powf(0.25) / (1.0 + a * r * r).sqrt()
}

#[inline]
pub(crate) fn dphi_da_raw(r: f64, a: f64) -> f64 {
    let s = 1.0 + a * r * r;
    3f64.powf(0.25) * a.powf(-0.75) * (0.25 / s.sqrt() - 0.5 * a * r * r / (s * s.sqrt()))
}

#[inline]
pub(crate) fn potential_raw(r: f64, a: f64) -> f64 {
    let p = phi_raw(r, a);
    let p2 = p * p;
    -5.0 * p2 * p2
}

#[inline]
pub(crate) fn defect_raw(r: f64, a: f64) -> f64 {
    dphi_da_raw(r, a) - a.powf(-1.25) * dphi_da_raw(r, 1.0)
}

/// φ(r,a).
pub fn phi(r: f64, a: f64) -> Result<f64> {
    check(r, a)?;
    Ok(phi_raw(r, a))
}

/// ∂ₐφ(r,a), evaluated from the closed form.
pub fn dphi_da(r: f64, a: f64) -> Result<f64> {
    check(r, a)?;
    Ok(dphi_da_raw(r, a))
}

/// V(r,a) = −5φ⁴.
pub fn potential(r: f64, a: f64) -> Result<f64> {
    check(r, a)?;
    Ok(potential_raw(r, a))
}

/// ∂ₐφ(r,a) − a^{-5/4}∂ₐφ(r,1); vanishes at a = 1 and decays like ⟨r⟩⁻³.
///
/// Accepted for a ∈ (0, 2].
pub fn resonance_defect_profile(r: f64, a: f64) -> Result<f64> {
    check(r, a)?;
    if a > 2.0 {
        return Err(Error::Domain(format!("defect profile needs a in (0, 2], got {a}")));
    }
    Ok(defect_raw(r, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let q = 3f64.powf(0.25);
        assert!((phi(0.0, 1.0).unwrap() - 1.3160740129524924).abs() < 1e-15);
        assert!((phi(2.0, 1.0).unwrap() - q / 5f64.sqrt()).abs() < 1e-15);
        assert!((phi(1.0, 4.0).unwrap() - 2f64.sqrt() * phi(2.0, 1.0).unwrap()).abs() < 1e-14);
        assert!((dphi_da(0.0, 1.0).unwrap() - q / 4.0).abs() < 1e-15);
        assert!((potential(0.0, 1.0).unwrap() + 15.0).abs() < 1e-13);
        assert!((potential(1.0, 1.0).unwrap() + 3.75).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &r in &[0.0, 0.3, 1.0, 2.5, 10.0] {
            for &a in &[0.5, 1.0, 1.7] {
                let h = 1e-5;
                let fd = (phi_raw(r, a + h) - phi_raw(r, a - h)) / (2.0 * h);
                assert!((fd - dphi_da_raw(r, a)).abs() < 1e-9, "r={r} a={a}");
            }
        }
    }

    #[test]
    fn far_field() {
        let r = 1e3;
        assert!((r * dphi_da_raw(r, 1.0) + 3f64.powf(0.25) / 4.0).abs() < 1e-5);
        // φ⁴ ~ 3 r⁻⁴, so r⁴V → −15
        assert!((r.powi(4) * potential_raw(r, 1.0) + 15.0).abs() < 1e-4);
    }

    #[test]
    fn defect_profile() {
        assert_eq!(resonance_defect_profile(3.0, 1.0).unwrap(), 0.0);
        assert!(
            (resonance_defect_profile(0.0, 1.1).unwrap() - (0.306_320_321_025_669_75 - 1.1f64.powf(-1.25) * 3f64.powf(0.25) / 4.0)).abs()
                < 1e-14
        );
        let mut c: f64 = 0.0;
        for &a in &[0.9, 1.1] {
            for j in 0..=60000 {
                let r = j as f64 * 1e-3;
                let w = (1.0 + r * r).powf(1.5);
                c = c.max(w * defect_raw(r, a).abs() / (a - 1.0).abs());
            }
        }
        assert!((c - 1.0422018633607775).abs() < 1e-6, "{c}");
        assert!(resonance_defect_profile(1.0, 2.5).is_err());
    }

    #[test]
    fn scaling_and_monotonicity() {
        for &a in &[0.25, 1.0, 4.0] {
            for j in 0..50 {
                let r = j as f64 * 0.37;
                let lhs = phi_raw(r, a);
                let rhs = a.powf(0.25) * phi_raw(a.sqrt() * r, 1.0);
                assert!((lhs - rhs).abs() < 1e-14);
                assert!(phi_raw(r + 0.1, a) < lhs);
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(phi(1.0, 0.0).is_err());
        assert!(dphi_da(1.0, -1.0).is_err());
        assert!(potential(-1.0, 1.0).is_err());
        assert!(SolitonScale::new(0.0).is_err());
        assert!(SolitonScale::new(1.2).unwrap().in_window());
    }
}
