use std::f64::consts::FRAC_PI_2;

use super::{EciVector, OrbitalError, PhysicalConstants};

/// Elevation of `target` above the observer's local horizontal plane:
/// `π/2 − ∠(r_obs, r_target − r_obs)`, in `[−π/2, π/2]`.
pub fn elevation_angle(observer: EciVector, target: EciVector) -> Result<f64, OrbitalError> {
    if !(observer.is_finite() && target.is_finite()) {
        return Err(OrbitalError::Degenerate("non-finite position"));
    }
    if observer.norm() == 0.0 {
        return Err(OrbitalError::Degenerate("observer at the Earth centre"));
    }
    let los = target - observer;
    if los.norm() == 0.0 {
        return Err(OrbitalError::Degenerate("target coincides with observer"));
    }
    Ok(FRAC_PI_2 - observer.angle_to(los))
}

/// True iff the segment `a–b` stays above `R_E + margin_m`. When the point of
/// the line closest to the Earth centre falls outside the segment the
/// endpoints themselves are the closest points, and they are above the
/// surface by construction.
pub fn line_of_sight_clear(
    a: EciVector,
    b: EciVector,
    consts: &PhysicalConstants,
    margin_m: f64,
) -> bool {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return true;
    }
    let s = -a.dot(d) / len2;
    if s <= 0.0 || s >= 1.0 {
        return true;
    }
    (a + d * s).norm() > consts.earth_radius_m + margin_m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zenith_and_horizon() {
        let obs = EciVector::new(7.0e6, 0.0, 0.0);
        let up = elevation_angle(obs, obs * 1.5).unwrap();
        assert!((up - FRAC_PI_2).abs() < 1e-15);
        let flat = elevation_angle(obs, EciVector::new(7.0e6, 3.0e6, 0.0)).unwrap();
        assert!(flat.abs() < 1e-15);
        let down = elevation_angle(obs, EciVector::new(0.0, 0.0, 0.0)).unwrap();
        assert!((down + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn hand_geometry_example() {
        // Target (7e6, 7e6, 0) sits exactly in the observer's horizontal
        // plane: the line-of-sight vector (0, 7e6, 0) is orthogonal to
        // (7e6, 0, 0).
        let obs = EciVector::new(7.0e6, 0.0, 0.0);
        let tgt = EciVector::new(7.0e6, 7.0e6, 0.0);
        let oracle = {
            let los = [tgt.x_m - obs.x_m, tgt.y_m - obs.y_m, tgt.z_m - obs.z_m];
            let dot = los[0] * obs.x_m + los[1] * obs.y_m + los[2] * obs.z_m;
            let n1 = (obs.x_m.powi(2) + obs.y_m.powi(2) + obs.z_m.powi(2)).sqrt();
            let n2 = (los[0].powi(2) + los[1].powi(2) + los[2].powi(2)).sqrt();
            FRAC_PI_2 - (dot / (n1 * n2)).acos()
        };
        let e = elevation_angle(obs, tgt).unwrap();
        assert!(oracle.abs() < 1e-15 && e.abs() < 1e-15);
        let e45 = elevation_angle(obs, EciVector::new(8.0e6, 1.0e6, 0.0)).unwrap();
        assert!((e45 - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let z = EciVector::default();
        let p = EciVector::new(1.0, 2.0, 3.0);
        assert!(elevation_angle(z, p).is_err());
        assert!(elevation_angle(p, p).is_err());
        assert!(elevation_angle(p, EciVector::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn line_of_sight_cases() {
        let consts = PhysicalConstants::default();
        let r = consts.earth_radius_m + 2.0e6;
        let at = |deg: f64| {
            let a = deg.to_radians();
            EciVector::new(r * a.cos(), r * a.sin(), 0.0)
        };
        // 45 deg apart: closest approach r cos 22.5 ≈ 7 734 km.
        assert!(line_of_sight_clear(at(0.0), at(45.0), &consts, 0.0));
        let mid = (at(0.0) + at(45.0)) * 0.5;
        assert!((mid.norm() - 7_733_795.566_651_981).abs() < 1e-6);
        assert!(!line_of_sight_clear(at(0.0), at(180.0), &consts, 0.0));
        // Chord grazes the surface at cos(θ/2) = R_E / r.
        let half = (consts.earth_radius_m / r).acos().to_degrees();
        assert!(line_of_sight_clear(at(0.0), at(2.0 * half - 0.01), &consts, 0.0));
        assert!(!line_of_sight_clear(at(0.0), at(2.0 * half + 0.01), &consts, 0.0));
        // Margin shrinks the clear region.
        assert!(!line_of_sight_clear(at(0.0), at(2.0 * half - 0.01), &consts, 50_000.0));
        // Radially aligned endpoints.
        let low = EciVector::new(consts.earth_radius_m + 20_000.0, 0.0, 0.0);
        assert!(line_of_sight_clear(low, at(0.0), &consts, 0.0));
        assert!(line_of_sight_clear(at(0.0), low, &consts, 0.0));
    }

    #[test]
    fn line_of_sight_is_symmetric() {
        let consts = PhysicalConstants::default();
        let r = consts.earth_radius_m + 2.0e6;
        for k in 0..72 {
            let a = f64::from(k) * 5f64.to_radians();
            let p = EciVector::new(r, 0.0, 0.0);
            let q = EciVector::new(r * a.cos(), r * a.sin() * 0.6, r * a.sin() * 0.8);
            assert_eq!(
                line_of_sight_clear(p, q, &consts, 0.0),
                line_of_sight_clear(q, p, &consts, 0.0)
            );
        }
    }
}
