//! Surface tension of boundary-pinned GT volumes and its sign-reversed twin.

use crate::error::{GtError, Result};
use crate::ext::ExtReal;
use crate::variational::TriangleField;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientPair {
    pub u1: f64,
    pub u2: f64,
}

impl GradientPair {
    pub fn new(u1: f64, u2: f64) -> Self {
        GradientPair { u1, u2 }
    }

    fn check(&self) -> Result<()> {
        if self.u1 > 0.0 && self.u2 > 0.0 && self.u1.is_finite() && self.u2.is_finite() {
            Ok(())
        } else {
            Err(GtError::Domain(format!(
                "gradient ({}, {}) is not in the open positive quadrant",
                self.u1, self.u2
            )))
        }
    }
}

/// sin and cot of πu₁/(u₁+u₂), evaluated through the smaller coordinate.
fn angle_parts(u1: f64, u2: f64) -> (f64, f64) {
    let s = u1 + u2;
    if u1 <= u2 {
        let t = PI * u1 / s;
        (t.sin(), 1.0 / t.tan())
    } else {
        let t = PI * u2 / s;
        (t.sin(), -1.0 / t.tan())
    }
}

/// σ(u) = log(u₁+u₂) + log sin(πu₁/(u₁+u₂)) + 1 − log π.
pub fn sigma(u: GradientPair) -> Result<f64> {
    u.check()?;
    let (sn, _) = angle_parts(u.u1, u.u2);
    Ok((u.u1 + u.u2).ln() + sn.ln() + 1.0 - PI.ln())
}

/// −σ on the open quadrant, `PosInf` elsewhere.
pub fn sigma_gt(u: GradientPair) -> ExtReal {
    match sigma(u) {
        Ok(s) => ExtReal::Finite(-s),
        Err(_) => ExtReal::PosInf,
    }
}

pub fn sigma_grad(u: GradientPair) -> Result<GradientPair> {
    u.check()?;
    let s = u.u1 + u.u2;
    let (_, cot) = angle_parts(u.u1, u.u2);
    let k = PI * cot / (s * s);
    Ok(GradientPair {
        u1: 1.0 / s + u.u2 * k,
        u2: 1.0 / s - u.u1 * k,
    })
}

/// Hessian of σ as [[σ₁₁, σ₁₂], [σ₁₂, σ₂₂]].
pub fn sigma_hessian(u: GradientPair) -> Result<[[f64; 2]; 2]> {
    u.check()?;
    let (u1, u2) = (u.u1, u.u2);
    let s = u1 + u2;
    let (sn, cot) = angle_parts(u1, u2);
    let csc2 = 1.0 / (sn * sn);
    let s2 = s * s;
    let s3 = s2 * s;
    let t1 = PI * u2 / s2;
    let t2 = -PI * u1 / s2;
    let t11 = -2.0 * PI * u2 / s3;
    let t22 = 2.0 * PI * u1 / s3;
    let t12 = PI * (u1 - u2) / s3;
    let base = -1.0 / s2;
    let h11 = base - csc2 * t1 * t1 + cot * t11;
    let h22 = base - csc2 * t2 * t2 + cot * t22;
    let h12 = base - csc2 * t1 * t2 + cot * t12;
    Ok([[h11, h12], [h12, h22]])
}

/// Discrete ∫▲ σ_GT(∇f): gradient is constant on each mesh triangle.
pub fn energy_integral(field: &TriangleField) -> Result<f64> {
    let mut acc = 0.0;
    for cell in field.cells() {
        let g = field.cell_gradient(&cell);
        match sigma_gt(g) {
            ExtReal::Finite(v) => acc += v * field.cell_area(),
            _ => {
                return Err(GtError::Infeasible {
                    cell: cell.to_string(),
                    reason: format!("gradient ({}, {}) not strictly positive", g.u1, g.u2),
                })
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_matches_finite_differences() {
        let u = GradientPair::new(0.7, 1.9);
        let h = sigma_hessian(u).unwrap();
        let e = 1e-6;
        let gp = sigma_grad(GradientPair::new(u.u1 + e, u.u2)).unwrap();
        let gm = sigma_grad(GradientPair::new(u.u1 - e, u.u2)).unwrap();
        assert!(((gp.u1 - gm.u1) / (2.0 * e) - h[0][0]).abs() < 1e-6);
        assert!(((gp.u2 - gm.u2) / (2.0 * e) - h[0][1]).abs() < 1e-6);
        let gp = sigma_grad(GradientPair::new(u.u1, u.u2 + e)).unwrap();
        let gm = sigma_grad(GradientPair::new(u.u1, u.u2 - e)).unwrap();
        assert!(((gp.u2 - gm.u2) / (2.0 * e) - h[1][1]).abs() < 1e-6);
    }
}
