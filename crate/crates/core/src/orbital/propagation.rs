use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{GroundNodeSpec, OrbitSpec, OrbitalError, PhysicalConstants};

/// Position in the Earth-centred inertial frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EciVector {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

impl EciVector {
    pub const fn new(x_m: f64, y_m: f64, z_m: f64) -> Self {
        Self { x_m, y_m, z_m }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x_m * o.x_m + self.y_m * o.y_m + self.z_m * o.z_m
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y_m * o.z_m - self.z_m * o.y_m,
            self.z_m * o.x_m - self.x_m * o.z_m,
            self.x_m * o.y_m - self.y_m * o.x_m,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x_m.is_finite() && self.y_m.is_finite() && self.z_m.is_finite()
    }

    /// Unsigned angle between two vectors, robust near 0 and π.
    pub fn angle_to(self, o: Self) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }
}

impl Add for EciVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x_m + o.x_m, self.y_m + o.y_m, self.z_m + o.z_m)
    }
}

impl Sub for EciVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x_m - o.x_m, self.y_m - o.y_m, self.z_m - o.z_m)
    }
}

impl Mul<f64> for EciVector {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x_m * k, self.y_m * k, self.z_m * k)
    }
}

impl Neg for EciVector {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// Period of a circular orbit at altitude `altitude_m`:
/// `2π (R_E + h)^{3/2} / √(GM)`.
pub fn orbital_period(altitude_m: f64, consts: &PhysicalConstants) -> Result<f64, OrbitalError> {
    if !(altitude_m > 0.0 && altitude_m.is_finite()) {
        return Err(OrbitalError::NonPositiveAltitude(altitude_m));
    }
    let a = consts.earth_radius_m + altitude_m;
    Ok(2.0 * PI * a.powf(1.5) / consts.gm().sqrt())
}

/// Circular orbital speed, `2π (R_E + h) / T`.
pub fn orbital_speed(altitude_m: f64, consts: &PhysicalConstants) -> Result<f64, OrbitalError> {
    let period = orbital_period(altitude_m, consts)?;
    Ok(2.0 * PI * (consts.earth_radius_m + altitude_m) / period)
}

/// Circular Keplerian position. The argument of latitude of `slot` is
/// `phase_offset + 2π·slot/K + n·t`, rotated by inclination about the node
/// line and then by RAAN about the polar axis.
pub(crate) fn circular_orbit_position(
    orbit: &OrbitSpec,
    slot: u16,
    t: f64,
    mean_motion: f64,
    consts: &PhysicalConstants,
) -> EciVector {
    let a = consts.earth_radius_m + orbit.altitude_m;
    let u = orbit.phase_offset_rad + orbit.slot_spacing_rad() * f64::from(slot) + mean_motion * t;
    let (su, cu) = u.sin_cos();
    let (si, ci) = orbit.inclination_rad.sin_cos();
    let (so, co) = orbit.raan_rad.sin_cos();
    EciVector::new(
        a * (co * cu - so * su * ci),
        a * (so * cu + co * su * ci),
        a * (su * si),
    )
}

/// Spherical-Earth position of a ground node; longitude advances with the
/// Earth's rotation (Greenwich aligned with the inertial x axis at t = 0).
pub(crate) fn ground_node_position(
    node: &GroundNodeSpec,
    t: f64,
    consts: &PhysicalConstants,
) -> EciVector {
    let r = consts.earth_radius_m + node.altitude_m;
    let lon = node.longitude_rad + consts.earth_rotation_rate_rad_s * t;
    let (slat, clat) = node.latitude_rad.sin_cos();
    let (slon, clon) = lon.sin_cos();
    EciVector::new(r * clat * clon, r * clat * slon, r * slat)
}
