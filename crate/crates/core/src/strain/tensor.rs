use serde::{Deserialize, Serialize};

/// In-plane strain tensor with tensor shear (`exy = γxy / 2`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainTensor2D {
    pub exx: f64,
    pub eyy: f64,
    pub exy: f64,
}

/// Principal strains and their directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Principal {
    /// Major direction [deg, 0..180).
    pub alpha1: f64,
    /// Minor direction, perpendicular to `alpha1` [deg, 0..180).
    pub alpha2: f64,
    pub e1: f64,
    pub e2: f64,
    /// Every direction is principal (zero deviatoric part); `alpha1` is 0.
    pub isotropic: bool,
}

/// Pair of in-plane directions with vanishing normal strain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroStrain {
    /// `beta_a <= beta_b`, both in [0, 180) degrees.
    pub beta_a: f64,
    pub beta_b: f64,
}

/// Maps an angle in degrees onto [0, 180).
pub fn canonical_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(180.0);
    if a >= 180.0 {
        0.0
    } else {
        a
    }
}

impl StrainTensor2D {
    pub const ZERO: Self = Self {
        exx: 0.0,
        eyy: 0.0,
        exy: 0.0,
    };

    pub fn new(exx: f64, eyy: f64, exy: f64) -> Self {
        Self { exx, eyy, exy }
    }

    /// Symmetric part of the in-plane displacement gradient; any rigid
    /// rotation (antisymmetric part) drops out.
    pub fn from_displacement_gradient(du_dx: f64, du_dy: f64, dv_dx: f64, dv_dy: f64) -> Self {
        Self::new(du_dx, dv_dy, 0.5 * (du_dy + dv_dx))
    }

    pub fn is_finite(&self) -> bool {
        self.exx.is_finite() && self.eyy.is_finite() && self.exy.is_finite()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.exx, c * self.eyy, c * self.exy)
    }

    /// Mean normal strain `(exx + eyy) / 2`.
    pub fn mean(&self) -> f64 {
        0.5 * (self.exx + self.eyy)
    }

    /// Half difference `(exx - eyy) / 2`.
    pub fn half_difference(&self) -> f64 {
        0.5 * (self.exx - self.eyy)
    }

    /// Mohr circle radius.
    pub fn radius(&self) -> f64 {
        self.half_difference().hypot(self.exy)
    }

    /// Normal strain along the direction at `angle_deg` from the x-axis.
    pub fn normal_strain(&self, angle_deg: f64) -> f64 {
        let (s, c) = (2.0 * angle_deg.to_radians()).sin_cos();
        self.mean() + self.half_difference() * c + self.exy * s
    }

    /// Tensor shear strain between the direction at `angle_deg` and its normal.
    pub fn shear_strain(&self, angle_deg: f64) -> f64 {
        let (s, c) = (2.0 * angle_deg.to_radians()).sin_cos();
        -self.half_difference() * s + self.exy * c
    }

    /// The same strain state rotated by `phi_deg` (counter-clockwise).
    pub fn rotated(&self, phi_deg: f64) -> Self {
        let (s, c) = (2.0 * phi_deg.to_radians()).sin_cos();
        let (a, b, d) = (self.mean(), self.half_difference(), self.exy);
        let b2 = b * c - d * s;
        let d2 = b * s + d * c;
        Self::new(a + b2, a - b2, d2)
    }

    pub fn principal(&self) -> Principal {
        principal(self)
    }

    pub fn zero_strain(&self) -> Option<ZeroStrain> {
        zero_strain(self)
    }
}

/// Principal strains from the vanishing-shear condition.
pub fn principal(t: &StrainTensor2D) -> Principal {
    let (a, b, c) = (t.mean(), t.half_difference(), t.exy);
    let r = b.hypot(c);
    if r == 0.0 {
        return Principal {
            alpha1: 0.0,
            alpha2: 90.0,
            e1: a,
            e2: a,
            isotropic: true,
        };
    }
    let alpha1 = canonical_deg(0.5 * c.atan2(b).to_degrees());
    Principal {
        alpha1,
        alpha2: canonical_deg(alpha1 + 90.0),
        e1: a + r,
        e2: a - r,
        isotropic: false,
    }
}

/// Zero-strain directions from the vanishing-normal-strain condition.
///
/// They exist iff the Mohr circle reaches the origin (`R >= |mean|`,
/// equivalently `e1 * e2 <= 0`). A zero tensor reports the axes.
pub fn zero_strain(t: &StrainTensor2D) -> Option<ZeroStrain> {
    let (a, b, c) = (t.mean(), t.half_difference(), t.exy);
    let r = b.hypot(c);
    if r == 0.0 {
        return (a == 0.0).then_some(ZeroStrain {
            beta_a: 0.0,
            beta_b: 90.0,
        });
    }
    if r < a.abs() {
        return None;
    }
    // a + r cos(2β - 2α1) = 0
    let two_alpha = c.atan2(b);
    let spread = (-a / r).clamp(-1.0, 1.0).acos();
    let p = canonical_deg(0.5 * (two_alpha + spread).to_degrees());
    let q = canonical_deg(0.5 * (two_alpha - spread).to_degrees());
    Some(ZeroStrain {
        beta_a: p.min(q),
        beta_b: p.max(q),
    })
}
