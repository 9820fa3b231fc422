//! Geometry of sphere centers confined to a cylindrical surface.
//!
//! Unit-diameter spheres packed inside a cylinder of diameter `D` (in sphere
//! diameters), with `D` small enough that every sphere touches the wall, have
//! their centers on a coaxial cylinder of diameter `D - 1`. A center is the
//! pair `(phi, z)`: azimuthal angle and axial height. All lengths are in
//! sphere diameters.
//!
//! Two spheres at angular separation `dphi` and axial separation `dz` touch
//! exactly when
//!
//! ```text
//! dz^2 + (D - 1)^2 sin^2(dphi / 2) = 1
//! ```
//!
//! i.e. the straight-line distance between centers (axial offset plus the
//! chord across the center cylinder) equals one diameter. The half-angle form
//! is used throughout instead of the equivalent `(1 - cos dphi)` expression
//! because it avoids catastrophic cancellation at small angles, which matters
//! when probing the large-`D` planar limit.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest supported diameter ratio: `1 + 1/sin(pi/5)`.
///
/// At this ratio five spheres exactly fit around the circumference at a
/// common height; beyond it the inner-wall monolayer assumption breaks down.
pub const MAX_RATIO: f64 = 2.7013016167040798;

/// Densest-sphere-packing volume fraction, `pi / sqrt(18)`, rounded to the
/// five digits used as a strict upper bound on any columnar packing.
pub const BULK_BOUND: f64 = 0.74048;

/// Validated cylinder-to-sphere diameter ratio `D` in `[1, MAX_RATIO]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DiameterRatio(f64);

impl DiameterRatio {
    /// Validates `value` into the supported range. A slack of `1e-12` is
    /// allowed at the upper end so that the exact boundary survives
    /// formatting round-trips.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (1.0..=MAX_RATIO + 1e-12).contains(&value) {
            Ok(DiameterRatio(value))
        } else {
            Err(Error::RatioOutOfRange(value))
        }
    }

    /// Bypasses range validation. Only intended for probing asymptotic
    /// behaviour (e.g. the large-`D` planar limit) in tests.
    #[doc(hidden)]
    pub fn new_unchecked(value: f64) -> Self {
        DiameterRatio(value)
    }

    /// The raw ratio `D`.
    pub fn get(self) -> f64 {
        self.0
    }

    /// Diameter `D - 1` of the cylinder the sphere centers live on.
    pub fn span(self) -> f64 {
        self.0 - 1.0
    }

    /// Radius `(D - 1) / 2` of the center cylinder.
    pub fn rho(self) -> f64 {
        0.5 * (self.0 - 1.0)
    }
}

/// A sphere center on the cylindrical surface.
///
/// `phi` is kept *unwrapped* (cumulative, not reduced mod 2 pi) so that
/// deposition order and total winding stay reconstructible; wrap it with
/// [`wrap_angle`] before comparing positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSite {
    /// Deposition index, 0-based.
    pub index: usize,
    /// Unwrapped azimuthal angle in radians.
    pub phi: f64,
    /// Axial height in sphere diameters.
    pub z: f64,
}

impl SurfaceSite {
    pub fn new(index: usize, phi: f64, z: f64) -> Self {
        SurfaceSite { index, phi, z }
    }
}

/// Solution of the contact equation at a given angular offset: the unique
/// non-negative axial offset `dz` at which two spheres touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactOffset {
    /// Angular separation the offset was solved at, in radians.
    pub dphi: f64,
    /// Non-negative axial separation at contact, in diameters.
    pub dz: f64,
}

/// Reduces an angle to the interval `(-pi, pi]`.
pub fn wrap_angle(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// In-plane chord between two centers at angular separation `dphi`:
/// `(D - 1) |sin(dphi / 2)|`.
fn chord(d: DiameterRatio, dphi: f64) -> f64 {
    d.span() * (0.5 * dphi).sin().abs()
}

/// Solves the contact equation for the axial offset at angular separation
/// `dphi`, returning `None` when the chord across the center cylinder
/// already exceeds one diameter (no axial offset can make the spheres touch).
///
/// Tiny negative radicands from rounding at the feasibility boundary are
/// clamped to zero, so `dz` is exactly 0 where the boundary is hit.
pub fn contact_offset(d: DiameterRatio, dphi: f64) -> Option<ContactOffset> {
    let c = chord(d, dphi);
    let radicand = 1.0 - c * c;
    if radicand < -1e-12 {
        None
    } else {
        Some(ContactOffset {
            dphi,
            dz: radicand.max(0.0).sqrt(),
        })
    }
}

/// Half-width of the angular window within which a sphere can be contacted:
/// `pi` for `D <= 2`, otherwise `2 asin(1 / (D - 1))`.
///
/// For `D <= 2` the center-cylinder chord never exceeds one diameter, so a
/// sphere can rest on another at any angular separation; beyond `D = 2` the
/// window shrinks and reaches `2 pi / 5` at [`MAX_RATIO`].
pub fn angular_window(d: DiameterRatio) -> f64 {
    let span = d.span();
    if span <= 1.0 {
        PI
    } else {
        2.0 * (1.0 / span).asin()
    }
}

/// Straight-line (3D) distance between two site centers.
///
/// The chord term depends on the angle difference only through
/// `sin^2(dphi/2)`, which is 2 pi-periodic, so unwrapped angles are fine.
pub fn center_distance(d: DiameterRatio, a: &SurfaceSite, b: &SurfaceSite) -> f64 {
    let c = chord(d, a.phi - b.phi);
    let dz = a.z - b.z;
    (dz * dz + c * c).sqrt()
}

/// Arc length swept on the center cylinder by an angle `phi`:
/// `(D - 1) phi / 2`.
pub fn arc_length(d: DiameterRatio, phi: f64) -> f64 {
    d.rho() * phi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(v: f64) -> DiameterRatio {
        DiameterRatio::new(v).unwrap()
    }

    #[test]
    fn max_ratio_matches_five_fold_closure() {
        // Five spheres around the circumference: sin(pi/5) = 1/(D-1).
        let expected = 1.0 + 1.0 / (PI / 5.0).sin();
        assert!((MAX_RATIO - expected).abs() < 1e-15);
    }

    #[test]
    fn ratio_validation() {
        assert!(DiameterRatio::new(1.0).is_ok());
        assert!(DiameterRatio::new(2.0).is_ok());
        assert!(DiameterRatio::new(MAX_RATIO).is_ok());
        assert!(DiameterRatio::new(0.999).is_err());
        assert!(DiameterRatio::new(2.702).is_err());
        assert!(DiameterRatio::new(f64::NAN).is_err());
        assert!(DiameterRatio::new(f64::INFINITY).is_err());
    }

    #[test]
    fn contact_offset_known_values() {
        // Independently computed with 128-bit arithmetic and frozen.
        let c = contact_offset(ratio(1.5), PI / 2.0).unwrap();
        assert!((c.dz - 0.9354143466934853).abs() < 1e-15);

        let c = contact_offset(ratio(1.8), PI).unwrap();
        assert!((c.dz - 0.6).abs() < 1e-12);

        let c = contact_offset(ratio(2.0), PI / 2.0).unwrap();
        assert!((c.dz - 0.7071067811865476).abs() < 1e-15);
    }

    #[test]
    fn contact_offset_degenerate_angles() {
        // Stacked straight up: dz = 1 exactly.
        let c = contact_offset(ratio(1.7), 0.0).unwrap();
        assert_eq!(c.dz, 1.0);

        // At D = 2 the antipodal contact is exactly in-plane.
        let c = contact_offset(ratio(2.0), PI).unwrap();
        assert!(c.dz.abs() < 1e-12);

        // Beyond the window there is no contact at all.
        assert!(contact_offset(ratio(MAX_RATIO), PI).is_none());
        assert!(contact_offset(ratio(2.4), 2.0 * PI / 3.0).is_none());
    }

    #[test]
    fn contact_offset_at_window_edge_is_zero() {
        for d in [2.1, 2.4, MAX_RATIO] {
            let d = ratio(d);
            let w = angular_window(d);
            let c = contact_offset(d, w).expect("edge of window still solvable");
            assert!(c.dz < 1e-7, "dz at window edge was {}", c.dz);
        }
    }

    #[test]
    fn contact_offset_monotone_in_angle() {
        // dz decreases as the angular separation grows across [0, window].
        for d in [1.0, 1.3, 1.8660254, 2.0, 2.3, MAX_RATIO] {
            let d = ratio(d);
            let w = angular_window(d);
            let mut prev = f64::INFINITY;
            for k in 0..=200 {
                let dphi = w * k as f64 / 200.0;
                let dz = contact_offset(d, dphi).unwrap().dz;
                assert!(dz <= prev + 1e-12);
                prev = dz;
            }
        }
    }

    #[test]
    fn angular_window_known_values() {
        assert_eq!(angular_window(ratio(1.5)), PI);
        assert_eq!(angular_window(ratio(2.0)), PI);
        // Frozen oracle values.
        assert!((angular_window(ratio(2.4)) - 1.5912059069690707).abs() < 1e-15);
        assert!((angular_window(ratio(2.7013)) - 1.2566384422677093).abs() < 1e-15);
        // At the maximum ratio the window is exactly 2 pi / 5.
        assert!((angular_window(ratio(MAX_RATIO)) - 2.0 * PI / 5.0).abs() < 1e-12);
    }

    #[test]
    fn center_distance_examples() {
        let d = ratio(1.8);
        let a = SurfaceSite::new(0, 0.0, 0.0);
        let b = SurfaceSite::new(1, PI, 0.5999999999999999);
        assert!((center_distance(d, &a, &b) - 1.0).abs() < 1e-12);
        assert_eq!(center_distance(d, &a, &a), 0.0);

        // Angle differences are only meaningful mod 2 pi.
        let d = ratio(2.0);
        let c = SurfaceSite::new(2, 2.0 * PI, 0.0);
        assert!(center_distance(d, &a, &c) < 1e-12);
    }

    #[test]
    fn arc_length_examples() {
        assert!((arc_length(ratio(2.0), 2.0 * PI) - PI).abs() < 1e-15);
        assert_eq!(arc_length(ratio(1.0), 123.0), 0.0);
        assert!((arc_length(ratio(1.5), 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_range_and_values() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        for k in -20..=20 {
            let w = wrap_angle(0.37 + k as f64 * 2.0 * PI);
            assert!(w > -PI && w <= PI);
            assert!((w - 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_ratio_behaves_like_a_line() {
        // At D = 1 the chord vanishes: every contact is a vertical stack.
        let d = ratio(1.0);
        for dphi in [0.0, 0.5, PI, 5.0] {
            assert_eq!(contact_offset(d, dphi).unwrap().dz, 1.0);
        }
    }

    #[test]
    fn planar_limit_of_contact_equation() {
        // As D grows with the arc separation ds held fixed, the contact
        // equation must approach ds^2 + dz^2 = 1 (flat wall). The half-angle
        // form keeps this accurate even at D = 1e6.
        let d = DiameterRatio::new_unchecked(1.0e6);
        for ds in [0.1, 0.5, 0.9] {
            let dphi = 2.0 * ds / d.span();
            let dz = contact_offset(d, dphi).unwrap().dz;
            assert!((dz * dz + ds * ds - 1.0).abs() < 1e-9);
        }
    }
}
