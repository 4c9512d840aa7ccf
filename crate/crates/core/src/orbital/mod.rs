//! Constellation geometry: Walker-delta generation, circular-orbit
//! propagation, Earth-fixed ground/HAP positions and pairwise visibility.
//!
//! Everything here is a pure function of its inputs. Satellites move on
//! ideal circular orbits whose planes are fixed in an Earth-centred
//! inertial frame; the Earth (a sphere) rotates underneath them.

mod contacts;
mod ids;
mod propagation;
mod visibility;

pub use contacts::{
    compute_contact_plan, compute_contact_windows, ContactIndex, ContactPlan, ContactWindow,
    WindowSearch,
};
pub use ids::{NodeId, ParseNodeIdError, SatId};
pub use propagation::{orbital_period, orbital_speed, EciVector};
pub use visibility::{elevation_angle, line_of_sight_clear};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitalError {
    #[error("altitude must be positive, got {0} m")]
    NonPositiveAltitude(f64),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("invalid orbit spec: {0}")]
    InvalidOrbit(String),
    #[error("invalid ground node {node}: {reason}")]
    InvalidGroundNode { node: u16, reason: String },
    #[error("invalid window search: {0}")]
    InvalidSearch(String),
}

/// Physical constants used by every geometric and link computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    pub earth_radius_m: f64,
    pub gravitational_constant: f64,
    pub earth_mass_kg: f64,
    pub speed_of_light_m_s: f64,
    pub boltzmann_j_per_k: f64,
    pub earth_rotation_rate_rad_s: f64,
}

/// Standard gravitational parameter of the Earth, m³/s².
pub const EARTH_GM: f64 = 3.986004418e14;
const GRAVITATIONAL_CONSTANT: f64 = 6.6743e-11;

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            earth_radius_m: 6_371_000.0,
            gravitational_constant: GRAVITATIONAL_CONSTANT,
            earth_mass_kg: EARTH_GM / GRAVITATIONAL_CONSTANT,
            speed_of_light_m_s: 299_792_458.0,
            boltzmann_j_per_k: 1.380649e-23,
            earth_rotation_rate_rad_s: 7.292_115_9e-5,
        }
    }
}

impl PhysicalConstants {
    /// G·M.
    pub fn gm(&self) -> f64 {
        self.gravitational_constant * self.earth_mass_kg
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("earth_radius_m", self.earth_radius_m),
            ("gravitational_constant", self.gravitational_constant),
            ("earth_mass_kg", self.earth_mass_kg),
            ("speed_of_light_m_s", self.speed_of_light_m_s),
            ("boltzmann_j_per_k", self.boltzmann_j_per_k),
            ("earth_rotation_rate_rad_s", self.earth_rotation_rate_rad_s),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be finite and positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// One circular orbital plane carrying equally spaced satellites.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSpec {
    pub orbit_index: u16,
    pub altitude_m: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    pub num_satellites: u16,
    /// Argument of latitude of slot 0 at the epoch.
    pub phase_offset_rad: f64,
}

impl OrbitSpec {
    pub fn validate(&self) -> Result<(), OrbitalError> {
        if !(self.altitude_m.is_finite() && self.altitude_m > 0.0) {
            return Err(OrbitalError::NonPositiveAltitude(self.altitude_m));
        }
        if self.num_satellites == 0 {
            return Err(OrbitalError::InvalidOrbit(format!(
                "orbit {} has no satellites",
                self.orbit_index
            )));
        }
        if !(self.inclination_rad.is_finite()
            && self.raan_rad.is_finite()
            && self.phase_offset_rad.is_finite())
        {
            return Err(OrbitalError::InvalidOrbit(format!(
                "orbit {} has non-finite angles",
                self.orbit_index
            )));
        }
        Ok(())
    }

    /// In-orbit angular separation between neighbouring satellites.
    pub fn slot_spacing_rad(&self) -> f64 {
        2.0 * PI / f64::from(self.num_satellites)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstellationSpec {
    pub orbits: Vec<OrbitSpec>,
    pub epoch_s: f64,
}

impl ConstellationSpec {
    /// Walker-delta pattern: `num_orbits` planes with RAAN spread evenly over
    /// `raan_spread_rad`, `sats_per_orbit` satellites each, and an
    /// inter-plane phase offset of `2π·phasing·l / (L·K)` for plane `l`.
    pub fn walker_delta(
        num_orbits: u16,
        sats_per_orbit: u16,
        altitude_m: f64,
        inclination_rad: f64,
        raan_spread_rad: f64,
        phasing: f64,
    ) -> Result<Self, OrbitalError> {
        let total = f64::from(num_orbits) * f64::from(sats_per_orbit);
        let orbits = (0..num_orbits)
            .map(|l| OrbitSpec {
                orbit_index: l,
                altitude_m,
                inclination_rad,
                raan_rad: raan_spread_rad * f64::from(l) / f64::from(num_orbits),
                num_satellites: sats_per_orbit,
                phase_offset_rad: 2.0 * PI * phasing * f64::from(l) / total,
            })
            .collect();
        let spec = Self { orbits, epoch_s: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), OrbitalError> {
        for (i, o) in self.orbits.iter().enumerate() {
            if usize::from(o.orbit_index) != i {
                return Err(OrbitalError::InvalidOrbit(format!(
                    "orbit at position {i} carries index {}",
                    o.orbit_index
                )));
            }
            o.validate()?;
        }
        Ok(())
    }

    pub fn orbit(&self, index: u16) -> Option<&OrbitSpec> {
        self.orbits.get(usize::from(index))
    }

    pub fn contains(&self, sat: SatId) -> bool {
        self.orbit(sat.orbit)
            .is_some_and(|o| sat.slot < o.num_satellites)
    }

    /// All satellite IDs, ordered by (orbit, slot).
    pub fn satellites(&self) -> impl Iterator<Item = SatId> + '_ {
        self.orbits.iter().flat_map(|o| {
            (0..o.num_satellites).map(move |slot| SatId::new(o.orbit_index, slot))
        })
    }

    pub fn orbit_members(&self, orbit: u16) -> Vec<SatId> {
        self.orbit(orbit)
            .map(|o| (0..o.num_satellites).map(|s| SatId::new(orbit, s)).collect())
            .unwrap_or_default()
    }

    pub fn num_satellites(&self) -> usize {
        self.orbits.iter().map(|o| usize::from(o.num_satellites)).sum()
    }

    /// Ring neighbour of `sat` in its orbit, stepping `+1` slot for
    /// clockwise and `-1` for counter-clockwise.
    pub fn ring_neighbor(&self, sat: SatId, direction: Direction) -> Option<SatId> {
        let k = self.orbit(sat.orbit)?.num_satellites;
        let slot = match direction {
            Direction::Clockwise => (sat.slot + 1) % k,
            Direction::CounterClockwise => (sat.slot + k - 1) % k,
        };
        Some(SatId::new(sat.orbit, slot))
    }

    pub fn are_ring_adjacent(&self, a: SatId, b: SatId) -> bool {
        if a.orbit != b.orbit || a == b {
            return false;
        }
        self.ring_neighbor(a, Direction::Clockwise) == Some(b)
            || self.ring_neighbor(a, Direction::CounterClockwise) == Some(b)
    }
}

/// Intra-orbit dissemination direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    #[serde(alias = "cw")]
    Clockwise,
    #[serde(alias = "ccw")]
    CounterClockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundKind {
    Gs,
    Hap,
}

/// Reference plane the minimum elevation angle is measured from.
///
/// `LocalHorizontal` is the plane orthogonal to the node's radius vector.
/// `ApparentHorizon` lowers that plane by the horizon dip
/// `acos(R_E / (R_E + altitude))`, so an elevated platform's mask sits the
/// same angle above the visible Earth limb as a ground station's does. The
/// two coincide for nodes on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ElevationReference {
    #[default]
    LocalHorizontal,
    ApparentHorizon,
}

/// A ground station or high-altitude platform acting as parameter server.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundNodeSpec {
    pub node_id: u16,
    pub name: String,
    pub kind: GroundKind,
    pub latitude_rad: f64,
    pub longitude_rad: f64,
    pub altitude_m: f64,
    pub min_elevation_rad: f64,
    pub elevation_reference: ElevationReference,
}

impl GroundNodeSpec {
    pub fn validate(&self) -> Result<(), OrbitalError> {
        let err = |reason: String| OrbitalError::InvalidGroundNode {
            node: self.node_id,
            reason,
        };
        if !(self.latitude_rad.abs() <= PI / 2.0) {
            return Err(err(format!("latitude {} rad out of range", self.latitude_rad)));
        }
        if !self.longitude_rad.is_finite() {
            return Err(err("longitude is not finite".into()));
        }
        if !(self.min_elevation_rad.abs() < PI / 2.0) {
            return Err(err(format!(
                "min elevation {} rad outside (-pi/2, pi/2)",
                self.min_elevation_rad
            )));
        }
        match self.kind {
            GroundKind::Gs if self.altitude_m != 0.0 => {
                Err(err(format!("ground station altitude must be 0, got {}", self.altitude_m)))
            }
            GroundKind::Hap if !(self.altitude_m > 0.0 && self.altitude_m.is_finite()) => {
                Err(err(format!("HAP altitude must be positive, got {}", self.altitude_m)))
            }
            _ => Ok(()),
        }
    }

    /// Angle by which the visible Earth limb lies below the local horizontal.
    pub fn horizon_dip_rad(&self, consts: &PhysicalConstants) -> f64 {
        let r = consts.earth_radius_m;
        (r / (r + self.altitude_m.max(0.0))).clamp(-1.0, 1.0).acos()
    }

    /// Threshold compared against [`elevation_angle`] measured from the
    /// local horizontal.
    pub fn effective_min_elevation_rad(&self, consts: &PhysicalConstants) -> f64 {
        match self.elevation_reference {
            ElevationReference::LocalHorizontal => self.min_elevation_rad,
            ElevationReference::ApparentHorizon => {
                self.min_elevation_rad - self.horizon_dip_rad(consts)
            }
        }
    }

    /// Same site with the node replaced by a ground station on the surface.
    pub fn as_ground_station(&self) -> Self {
        Self {
            kind: GroundKind::Gs,
            altitude_m: 0.0,
            elevation_reference: ElevationReference::LocalHorizontal,
            ..self.clone()
        }
    }
}

/// Static scenario geometry: constellation, server-tier nodes and constants.
#[derive(Debug, Clone)]
pub struct Geometry {
    constellation: ConstellationSpec,
    ground: Vec<GroundNodeSpec>,
    consts: PhysicalConstants,
    los_margin_m: f64,
    mean_motion: Vec<f64>,
}

impl Geometry {
    pub fn new(
        constellation: ConstellationSpec,
        ground: Vec<GroundNodeSpec>,
        consts: PhysicalConstants,
        los_margin_m: f64,
    ) -> Result<Self, OrbitalError> {
        constellation.validate()?;
        for g in &ground {
            g.validate()?;
        }
        for (i, g) in ground.iter().enumerate() {
            if ground[..i].iter().any(|o| o.node_id == g.node_id) {
                return Err(OrbitalError::InvalidGroundNode {
                    node: g.node_id,
                    reason: "duplicate node id".into(),
                });
            }
        }
        let mean_motion = constellation
            .orbits
            .iter()
            .map(|o| orbital_period(o.altitude_m, &consts).map(|t| 2.0 * PI / t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            constellation,
            ground,
            consts,
            los_margin_m,
            mean_motion,
        })
    }

    pub fn constellation(&self) -> &ConstellationSpec {
        &self.constellation
    }

    pub fn ground_nodes(&self) -> &[GroundNodeSpec] {
        &self.ground
    }

    pub fn ground_node(&self, id: u16) -> Option<&GroundNodeSpec> {
        self.ground.iter().find(|g| g.node_id == id)
    }

    pub fn consts(&self) -> &PhysicalConstants {
        &self.consts
    }

    pub fn los_margin_m(&self) -> f64 {
        self.los_margin_m
    }

    pub fn satellite_position(&self, sat: SatId, t: f64) -> Result<EciVector, OrbitalError> {
        let orbit = self
            .constellation
            .orbit(sat.orbit)
            .filter(|o| sat.slot < o.num_satellites)
            .ok_or(OrbitalError::UnknownNode(NodeId::Sat(sat)))?;
        let n = self.mean_motion[usize::from(sat.orbit)];
        Ok(propagation::circular_orbit_position(
            orbit,
            sat.slot,
            t - self.constellation.epoch_s,
            n,
            &self.consts,
        ))
    }

    pub fn ground_node_position(&self, id: u16, t: f64) -> Result<EciVector, OrbitalError> {
        let node = self
            .ground_node(id)
            .ok_or(OrbitalError::UnknownNode(NodeId::Ground(id)))?;
        Ok(propagation::ground_node_position(
            node,
            t - self.constellation.epoch_s,
            &self.consts,
        ))
    }

    pub fn position(&self, node: NodeId, t: f64) -> Result<EciVector, OrbitalError> {
        match node {
            NodeId::Sat(s) => self.satellite_position(s, t),
            NodeId::Ground(g) => self.ground_node_position(g, t),
        }
    }

    pub fn distance(&self, a: NodeId, b: NodeId, t: f64) -> Result<f64, OrbitalError> {
        Ok((self.position(a, t)? - self.position(b, t)?).norm())
    }

    /// Altitude of a node above the spherical Earth.
    pub fn altitude(&self, node: NodeId) -> Result<f64, OrbitalError> {
        match node {
            NodeId::Sat(s) => self
                .constellation
                .orbit(s.orbit)
                .map(|o| o.altitude_m)
                .ok_or(OrbitalError::UnknownNode(node)),
            NodeId::Ground(g) => self
                .ground_node(g)
                .map(|n| n.altitude_m)
                .ok_or(OrbitalError::UnknownNode(node)),
        }
    }

    /// Whether `a` and `b` can exchange data at time `t`.
    ///
    /// Satellite-to-ground pairs need the satellite above the ground node's
    /// elevation mask and an unobstructed line of sight. Satellites only link
    /// to their intra-orbit ring neighbours. Server-tier nodes are always
    /// connected to each other.
    pub fn is_visible(&self, a: NodeId, b: NodeId, t: f64) -> Result<bool, OrbitalError> {
        match (a, b) {
            (NodeId::Ground(x), NodeId::Ground(y)) => {
                self.ground_node(x).ok_or(OrbitalError::UnknownNode(a))?;
                self.ground_node(y).ok_or(OrbitalError::UnknownNode(b))?;
                Ok(true)
            }
            (NodeId::Sat(s), NodeId::Ground(g)) | (NodeId::Ground(g), NodeId::Sat(s)) => {
                let node = self
                    .ground_node(g)
                    .ok_or(OrbitalError::UnknownNode(NodeId::Ground(g)))?;
                let gp = self.ground_node_position(g, t)?;
                let sp = self.satellite_position(s, t)?;
                let elev = elevation_angle(gp, sp)?;
                Ok(elev >= node.effective_min_elevation_rad(&self.consts)
                    && line_of_sight_clear(gp, sp, &self.consts, self.los_margin_m))
            }
            (NodeId::Sat(x), NodeId::Sat(y)) => {
                if !self.constellation.contains(x) {
                    return Err(OrbitalError::UnknownNode(a));
                }
                if !self.constellation.contains(y) {
                    return Err(OrbitalError::UnknownNode(b));
                }
                if !self.constellation.are_ring_adjacent(x, y) {
                    return Ok(false);
                }
                let pa = self.satellite_position(x, t)?;
                let pb = self.satellite_position(y, t)?;
                Ok(line_of_sight_clear(pa, pb, &self.consts, self.los_margin_m))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    pub(crate) fn polar_gs(min_elev_deg: f64) -> GroundNodeSpec {
        GroundNodeSpec {
            node_id: 0,
            name: "pole".into(),
            kind: GroundKind::Gs,
            latitude_rad: PI / 2.0,
            longitude_rad: 0.0,
            altitude_m: 0.0,
            min_elevation_rad: deg(min_elev_deg),
            elevation_reference: ElevationReference::LocalHorizontal,
        }
    }

    #[test]
    fn walker_delta_layout() {
        let c = ConstellationSpec::walker_delta(5, 8, 2.0e6, deg(80.0), 2.0 * PI, 0.0).unwrap();
        assert_eq!(c.num_satellites(), 40);
        assert!((c.orbits[1].raan_rad - 2.0 * PI / 5.0).abs() < 1e-12);
        assert!((c.orbits[0].slot_spacing_rad() - PI / 4.0).abs() < 1e-12);
        let ids: Vec<_> = c.satellites().collect();
        let mut dedup = ids.clone();
        dedup.dedup();
        assert_eq!(ids.len(), dedup.len());
    }

    #[test]
    fn ring_neighbors_wrap() {
        let c = ConstellationSpec::walker_delta(1, 8, 2.0e6, 0.0, 0.0, 0.0).unwrap();
        let s7 = SatId::new(0, 7);
        assert_eq!(c.ring_neighbor(s7, Direction::Clockwise), Some(SatId::new(0, 0)));
        assert_eq!(
            c.ring_neighbor(SatId::new(0, 0), Direction::CounterClockwise),
            Some(s7)
        );
        assert!(c.are_ring_adjacent(s7, SatId::new(0, 0)));
        assert!(!c.are_ring_adjacent(s7, SatId::new(0, 5)));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ConstellationSpec::walker_delta(1, 8, -5.0, 0.0, 0.0, 0.0).is_err());
        assert!(ConstellationSpec::walker_delta(1, 0, 2.0e6, 0.0, 0.0, 0.0).is_err());
        let mut gs = polar_gs(10.0);
        gs.altitude_m = 100.0;
        assert!(gs.validate().is_err());
        let mut hap = polar_gs(10.0);
        hap.kind = GroundKind::Hap;
        assert!(hap.validate().is_err());
        let mut bad = polar_gs(90.0);
        bad.min_elevation_rad = PI / 2.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn polar_station_sees_zenith_satellite() {
        // Polar orbit: slot 0 starts over the equator and crosses the north
        // pole a quarter period later.
        let c = ConstellationSpec {
            orbits: vec![OrbitSpec {
                orbit_index: 0,
                altitude_m: 2.0e6,
                inclination_rad: PI / 2.0,
                raan_rad: 0.0,
                num_satellites: 1,
                phase_offset_rad: 0.0,
            }],
            epoch_s: 0.0,
        };
        let period = orbital_period(2.0e6, &PhysicalConstants::default()).unwrap();
        let geom =
            Geometry::new(c, vec![polar_gs(10.0)], PhysicalConstants::default(), 0.0).unwrap();
        let sat = NodeId::Sat(SatId::new(0, 0));
        let gs = NodeId::Ground(0);
        assert!(geom.is_visible(sat, gs, period / 4.0).unwrap());
        assert!(geom.is_visible(gs, sat, period / 4.0).unwrap());
        // Over the south pole the satellite is below the horizon.
        assert!(!geom.is_visible(sat, gs, 3.0 * period / 4.0).unwrap());
    }

    #[test]
    fn grazing_satellite_flips_with_negative_mask() {
        // HAP at 20 km on the equator; satellite placed at -3.05 deg elevation
        // (below local horizontal but above the limb, whose dip is ~4.5 deg).
        let consts = PhysicalConstants::default();
        let r_hap = consts.earth_radius_m + 20_000.0;
        let observer = EciVector::new(r_hap, 0.0, 0.0);
        let r_sat = consts.earth_radius_m + 2.0e6;
        // Solve |observer + s * dir| = r_sat for a ray at -3 deg elevation.
        let e = (-3.05f64).to_radians();
        let dir = EciVector::new(e.sin(), e.cos(), 0.0);
        let b = 2.0 * observer.dot(dir);
        let c = observer.dot(observer) - r_sat * r_sat;
        let s = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
        let target = observer + dir * s;
        let elev = elevation_angle(observer, target).unwrap();
        assert!((elev - e).abs() < 1e-9);
        assert!(line_of_sight_clear(observer, target, &consts, 0.0));

        // Brute-force sweep of the mask: visible exactly when mask <= -3.05 deg.
        let mut flips = 0;
        let mut prev = None;
        for tenth in -50..=100 {
            let mask = f64::from(tenth) / 10.0;
            let vis = elev >= mask.to_radians();
            if prev.is_some_and(|p| p != vis) {
                flips += 1;
                assert!((mask - (-3.0)).abs() < 1e-9, "flip at {mask}");
            }
            prev = Some(vis);
        }
        assert_eq!(flips, 1);
        assert!(elev < 10f64.to_radians());
        assert!(elev >= (-5f64).to_radians());
    }

    #[test]
    fn apparent_horizon_lowers_the_mask_by_the_dip() {
        let consts = PhysicalConstants::default();
        let mut hap = polar_gs(10.0);
        hap.kind = GroundKind::Hap;
        hap.altitude_m = 20_000.0;
        hap.elevation_reference = ElevationReference::ApparentHorizon;
        let dip = hap.horizon_dip_rad(&consts);
        assert!((dip.to_degrees() - 4.537).abs() < 0.01, "{}", dip.to_degrees());
        assert!(
            (hap.effective_min_elevation_rad(&consts) - (deg(10.0) - dip)).abs() < 1e-15
        );
        let gs = hap.as_ground_station();
        assert_eq!(gs.horizon_dip_rad(&consts), 0.0);
        assert_eq!(gs.effective_min_elevation_rad(&consts), deg(10.0));
    }

    #[test]
    fn ground_ground_always_connected() {
        let mut other = polar_gs(10.0);
        other.node_id = 1;
        other.latitude_rad = -PI / 2.0;
        let geom = Geometry::new(
            ConstellationSpec::default(),
            vec![polar_gs(10.0), other],
            PhysicalConstants::default(),
            0.0,
        )
        .unwrap();
        assert!(geom
            .is_visible(NodeId::Ground(0), NodeId::Ground(1), 1234.0)
            .unwrap());
        assert!(geom
            .is_visible(NodeId::Ground(0), NodeId::Ground(7), 0.0)
            .is_err());
    }

    #[test]
    fn isl_only_between_ring_neighbors() {
        let c = ConstellationSpec::walker_delta(2, 8, 2.0e6, deg(80.0), 2.0 * PI, 0.0).unwrap();
        let geom = Geometry::new(c, vec![], PhysicalConstants::default(), 0.0).unwrap();
        let s = |o, k| NodeId::Sat(SatId::new(o, k));
        assert!(geom.is_visible(s(0, 0), s(0, 1), 0.0).unwrap());
        assert!(geom.is_visible(s(0, 0), s(0, 7), 0.0).unwrap());
        assert!(!geom.is_visible(s(0, 0), s(0, 2), 0.0).unwrap());
        assert!(!geom.is_visible(s(0, 0), s(1, 0), 0.0).unwrap());
    }
}
