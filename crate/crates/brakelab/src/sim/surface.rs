//! Road surfaces: Burckhardt friction triples and position-dependent layout.

use serde::{Deserialize, Serialize};

/// Burckhardt friction coefficients (c1, c2, c3):
/// `mu(eta) = c1 * (1 - exp(-c2 * eta)) - c3 * eta`, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionTriple {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl FrictionTriple {
    /// Dry concrete; peak mu about 1.17 near 17 % slip.
    pub fn dry() -> Self {
        Self {
            c1: 1.2801,
            c2: 23.99,
            c3: 0.52,
        }
    }

    /// Oil-coated plastic sheeting; peak mu about 0.195 near 6 % slip.
    pub fn wet_plastic() -> Self {
        Self {
            c1: 0.20,
            c2: 94.13,
            c3: 0.0646,
        }
    }

    /// Ice; nearly flat mu around 0.05.
    pub fn icy() -> Self {
        Self {
            c1: 0.05,
            c2: 306.39,
            c3: 0.001,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c1: self.c1 * factor,
            c2: self.c2,
            c3: self.c3 * factor,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0
    }
}

/// Friction coefficient at slip `eta` in [0, 1] for a Burckhardt triple.
pub fn friction_mu(eta: f64, triple: &FrictionTriple) -> Result<f64, SlipDomainError> {
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(SlipDomainError { eta });
    }
    Ok((triple.c1 * (1.0 - (-triple.c2 * eta).exp()) - triple.c3 * eta).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipDomainError {
    pub eta: f64,
}

impl std::fmt::Display for SlipDomainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "slip ratio {} is outside [0, 1]", self.eta)
    }
}

impl std::error::Error for SlipDomainError {}

/// Which side of the vehicle a surface segment applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Both,
}

impl Side {
    fn covers_left(self) -> bool {
        matches!(self, Side::Left | Side::Both)
    }
    fn covers_right(self) -> bool {
        matches!(self, Side::Right | Side::Both)
    }
}

/// One surface patch: a friction triple over a longitudinal interval on one
/// or both sides of the road.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSegment {
    pub from_m: f64,
    pub to_m: f64,
    pub side: Side,
    pub triple: FrictionTriple,
}

/// Total surface lookup: a base triple everywhere, overridden by segments
/// (later segments win), plus per-wheel friction multipliers representing
/// small road-texture variation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMap {
    pub base: FrictionTriple,
    pub segments: Vec<SurfaceSegment>,
    /// Per-wheel friction multipliers (FL, FR, RL, RR), 1.0 = nominal.
    pub wheel_scale: [f64; 4],
}

impl SurfaceMap {
    pub fn uniform(triple: FrictionTriple) -> Self {
        Self {
            base: triple,
            segments: Vec::new(),
            wheel_scale: [1.0; 4],
        }
    }

    /// Triple at longitudinal position `x` for a wheel on the given side,
    /// before per-wheel scaling. Every position maps to some surface.
    pub fn triple_at(&self, x_m: f64, left: bool) -> FrictionTriple {
        let mut t = self.base;
        for seg in &self.segments {
            if x_m >= seg.from_m
                && x_m < seg.to_m
                && (left && seg.side.covers_left() || !left && seg.side.covers_right())
            {
                t = seg.triple;
            }
        }
        t
    }

    /// Effective friction for wheel `i` (FL=0, FR=1, RL=2, RR=3) at `x`.
    pub fn mu(&self, wheel: usize, x_m: f64, eta: f64) -> Result<f64, SlipDomainError> {
        let left = wheel == 0 || wheel == 2;
        let t = self.triple_at(x_m, left);
        Ok((friction_mu(eta, &t)? * self.wheel_scale[wheel]).max(0.0))
    }

    /// Mirrors the surface left/right, including per-wheel multipliers.
    pub fn mirrored(&self) -> SurfaceMap {
        let mut out = self.clone();
        for seg in out.segments.iter_mut() {
            seg.side = match seg.side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
                Side::Both => Side::Both,
            };
        }
        out.wheel_scale = [
            self.wheel_scale[1],
            self.wheel_scale[0],
            self.wheel_scale[3],
            self.wheel_scale[2],
        ];
        out
    }

    /// Scales friction on all wheels, for parameter-perturbation studies.
    pub fn globally_scaled(&self, factor: f64) -> SurfaceMap {
        let mut out = self.clone();
        for s in out.wheel_scale.iter_mut() {
            *s *= factor;
        }
        out
    }
}
