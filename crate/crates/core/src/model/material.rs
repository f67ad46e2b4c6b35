use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthotropic linear-elastic material in its principal axes.
///
/// Moduli are in MPa. `e3` is kept for completeness but plays no role in
/// the equivalent-single-layer shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub nu12: f64,
    pub nu13: f64,
    pub nu23: f64,
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
    /// Maximum admissible in-plane stress magnitude [MPa].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowable_stress: Option<f64>,
}

impl MaterialSpec {
    pub fn isotropic(e: f64, nu: f64) -> Self {
        let g = e / (2.0 * (1.0 + nu));
        Self {
            e1: e,
            e2: e,
            e3: e,
            nu12: nu,
            nu13: nu,
            nu23: nu,
            g12: g,
            g13: g,
            g23: g,
            allowable_stress: None,
        }
    }

    pub fn with_allowable(mut self, stress: f64) -> Self {
        self.allowable_stress = Some(stress);
        self
    }

    pub fn validate(&self, id: &str) -> Result<()> {
        let bad = |reason: String| Error::Material {
            id: id.to_string(),
            reason,
        };
        for (name, v) in [
            ("E1", self.e1),
            ("E2", self.e2),
            ("E3", self.e3),
            ("G12", self.g12),
            ("G13", self.g13),
            ("G23", self.g23),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("nu12", self.nu12), ("nu13", self.nu13), ("nu23", self.nu23)] {
            if !(0.0..0.5).contains(&v) {
                return Err(bad(format!("{name} must lie in [0, 0.5), got {v}")));
            }
        }
        if 1.0 - self.nu12 * self.nu21() <= 0.0 {
            return Err(bad("in-plane compliance is not positive definite".into()));
        }
        if let Some(s) = self.allowable_stress {
            if !(s.is_finite() && s > 0.0) {
                return Err(bad(format!("allowable stress must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn nu21(&self) -> f64 {
        self.nu12 * self.e2 / self.e1
    }

    /// Reduced plane-stress stiffness in material axes,
    /// ordered `[Q11, Q22, Q12, Q66]`.
    pub fn reduced_stiffness(&self) -> [f64; 4] {
        let denom = 1.0 - self.nu12 * self.nu21();
        [
            self.e1 / denom,
            self.e2 / denom,
            self.nu12 * self.e2 / denom,
            self.g12,
        ]
    }

    /// In-plane stiffness rotated by `angle_deg` into the laminate frame,
    /// acting on `[εxx, εyy, γxy]`.
    pub fn rotated_in_plane(&self, angle_deg: f64) -> [[f64; 3]; 3] {
        let [q11, q22, q12, q66] = self.reduced_stiffness();
        let (s, c) = angle_deg.to_radians().sin_cos();
        let (c2, s2) = (c * c, s * s);
        let (c4, s4, c2s2) = (c2 * c2, s2 * s2, c2 * s2);
        let b11 = q11 * c4 + 2.0 * (q12 + 2.0 * q66) * c2s2 + q22 * s4;
        let b22 = q11 * s4 + 2.0 * (q12 + 2.0 * q66) * c2s2 + q22 * c4;
        let b12 = (q11 + q22 - 4.0 * q66) * c2s2 + q12 * (c4 + s4);
        let b66 = (q11 + q22 - 2.0 * q12 - 2.0 * q66) * c2s2 + q66 * (c4 + s4);
        let b16 = (q11 - q12 - 2.0 * q66) * c2 * c * s + (q12 - q22 + 2.0 * q66) * s2 * s * c;
        let b26 = (q11 - q12 - 2.0 * q66) * s2 * s * c + (q12 - q22 + 2.0 * q66) * c2 * c * s;
        [[b11, b12, b16], [b12, b22, b26], [b16, b26, b66]]
    }

    /// Transverse shear stiffness rotated into the laminate frame, acting on
    /// `[γxz, γyz]`.
    pub fn rotated_shear(&self, angle_deg: f64) -> [[f64; 2]; 2] {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let xz = self.g13 * c * c + self.g23 * s * s;
        let yz = self.g13 * s * s + self.g23 * c * c;
        let cross = (self.g13 - self.g23) * c * s;
        [[xz, cross], [cross, yz]]
    }
}
