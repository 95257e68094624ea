//! Velocity-obstacle cone geometry for disc-shaped agents.
//!
//! All quantities are relative: `p_rel = p_j - p_i`, `v_rel = v_j - v_i`. The
//! cone barrier is
//!
//! ```text
//! h_vo = p_rel . v_rel + |p_rel| |v_rel| cos(gamma)
//! cos(gamma) = sqrt(|p_rel|^2 - r^2) / |p_rel|
//! ```
//!
//! which is negative exactly when `v_rel` points into the collision cone,
//! i.e. when keeping the current relative velocity leads to contact.

use crate::error::GeometryError;
use crate::vec2::Vec2;

/// Below this relative speed the `|v|`-dependent terms of the cone
/// derivative are dropped.
pub const VELOCITY_EPS: f64 = 1e-6;

/// Upper bound on the inverse time-to-collision weight.
pub const WEIGHT_MAX: f64 = 1e3;

/// Relative geometry of an ordered agent pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub p_rel: Vec2,
    pub v_rel: Vec2,
    pub r_comb: f64,
    pub dist: f64,
}

impl PairGeometry {
    pub fn new(p_rel: Vec2, v_rel: Vec2, r_comb: f64) -> Self {
        debug_assert!(r_comb >= 0.0);
        Self {
            p_rel,
            v_rel,
            r_comb,
            dist: p_rel.length(),
        }
    }

    /// Geometry of obstacle `j` as seen from agent `i`.
    pub fn between(p_i: Vec2, v_i: Vec2, r_i: f64, p_j: Vec2, v_j: Vec2, r_j: f64) -> Self {
        Self::new(p_j - p_i, v_j - v_i, r_i + r_j)
    }

    /// The same pair seen from the other agent.
    pub fn reversed(&self) -> Self {
        Self::new(-self.p_rel, -self.v_rel, self.r_comb)
    }

    pub fn is_overlapping(&self) -> bool {
        self.dist <= self.r_comb
    }

    fn check(&self) -> Result<(), GeometryError> {
        if self.dist > 0.0 {
            Ok(())
        } else {
            Err(GeometryError::DegeneratePair)
        }
    }

    /// `sqrt(dist^2 - r^2)`, clamped to zero in overlap.
    fn tangent_length(&self) -> f64 {
        if self.is_overlapping() {
            0.0
        } else {
            ((self.dist - self.r_comb) * (self.dist + self.r_comb)).sqrt()
        }
    }
}

/// Value of the cone barrier together with its control-affine derivative,
/// `h_dot = grad_u . u_rel + drift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeCbfValue {
    pub h: f64,
    pub grad_u: Vec2,
    pub drift: f64,
}

impl ConeCbfValue {
    pub fn h_dot(&self, u_rel: Vec2) -> f64 {
        self.grad_u.dot(u_rel) + self.drift
    }
}

/// Cosine of the cone half-angle. Zero once the discs overlap, where the cone
/// opens to a half-plane.
pub fn cone_cos(pair: &PairGeometry) -> Result<f64, GeometryError> {
    pair.check()?;
    Ok(pair.tangent_length() / pair.dist)
}

pub fn h_vo(pair: &PairGeometry) -> Result<f64, GeometryError> {
    pair.check()?;
    Ok(pair.p_rel.dot(pair.v_rel) + pair.v_rel.length() * pair.tangent_length())
}

/// Cone barrier value and its derivative terms with respect to the relative
/// acceleration.
///
/// Differentiates `p.v + |v| s` with `s = sqrt(|p|^2 - r^2)`:
///
/// ```text
/// h_dot = u . (p + v_hat s) + |v|^2 + |v| (p.v) / s
/// ```
///
/// At (near) zero relative speed or in overlap only `p.v` is differentiated.
pub fn h_vo_dot_terms(pair: &PairGeometry) -> Result<ConeCbfValue, GeometryError> {
    let h = h_vo(pair)?;
    let p = pair.p_rel;
    let v = pair.v_rel;
    let speed = v.length();
    let s = pair.tangent_length();
    if speed <= VELOCITY_EPS || s <= 0.0 {
        return Ok(ConeCbfValue {
            h,
            grad_u: p,
            drift: v.length_squared(),
        });
    }
    let v_hat = v / speed;
    Ok(ConeCbfValue {
        h,
        grad_u: p + v_hat * s,
        drift: speed * speed + speed * p.dot(v) / s,
    })
}

/// Smallest `t >= 0` with `|p_rel + t v_rel| = r_comb`, or infinity when the
/// extrapolated discs never touch. Zero if they already overlap.
pub fn time_to_collision(pair: &PairGeometry) -> f64 {
    let p = pair.p_rel;
    let v = pair.v_rel;
    let c = p.length_squared() - pair.r_comb * pair.r_comb;
    if c <= 0.0 {
        return 0.0;
    }
    let a = v.length_squared();
    let b = p.dot(v);
    if a == 0.0 || b >= 0.0 {
        return f64::INFINITY;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    // Numerically stable smaller root of a t^2 + 2 b t + c with b < 0.
    let t = c / (-b + disc.sqrt());
    t.max(0.0)
}

/// Inverse time-to-collision weight, zero when no collision is predicted and
/// capped at [`WEIGHT_MAX`].
pub fn vo_weight(t_col: f64) -> f64 {
    if t_col.is_infinite() {
        0.0
    } else if t_col * WEIGHT_MAX <= 1.0 {
        WEIGHT_MAX
    } else {
        1.0 / t_col
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(px: f64, py: f64, vx: f64, vy: f64, r: f64) -> PairGeometry {
        PairGeometry::new(Vec2::new(px, py), Vec2::new(vx, vy), r)
    }

    fn random_pair(rng: &mut ChaCha8Rng) -> PairGeometry {
        let r = rng.random_range(0.2..2.0);
        let dist = r + rng.random_range(0.05..8.0);
        let p = Vec2::from_angle(rng.random_range(-3.2..3.2)) * dist;
        let v = Vec2::from_angle(rng.random_range(-3.2..3.2)) * rng.random_range(0.01..3.0);
        PairGeometry::new(p, v, r)
    }

    /// Closest distance between the origin and `p + t v` over `t >= 0`.
    fn closest_approach(p: Vec2, v: Vec2) -> f64 {
        let vv = v.length_squared();
        let t = if vv > 0.0 {
            (-p.dot(v) / vv).max(0.0)
        } else {
            0.0
        };
        (p + v * t).length()
    }

    #[test]
    fn cone_cos_examples() {
        assert_relative_eq!(
            cone_cos(&pair(2.0, 0.0, 0.0, 0.0, 1.0)).unwrap(),
            3f64.sqrt() / 2.0,
            epsilon = 1e-15
        );
        assert_eq!(cone_cos(&pair(2.0, 0.0, 0.0, 0.0, 2.0)).unwrap(), 0.0);
        assert_eq!(cone_cos(&pair(10.0, 0.0, 0.0, 0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(
            cone_cos(&pair(0.0, 0.0, 1.0, 0.0, 1.0)),
            Err(GeometryError::DegeneratePair)
        );
    }

    #[test]
    fn cone_cos_matches_tangent_construction() {
        // Tangent from the origin to the disc of radius 1 centered at (2, 0)
        // touches at (1.5, sqrt(3)/2).
        let tangent_point = Vec2::new(1.5, 3f64.sqrt() / 2.0);
        let radius_vec = tangent_point - Vec2::new(2.0, 0.0);
        assert_relative_eq!(radius_vec.length(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(radius_vec.dot(tangent_point), 0.0, epsilon = 1e-15);
        let expected = tangent_point.normalized().unwrap().x;
        assert_relative_eq!(
            cone_cos(&pair(2.0, 0.0, 0.0, 0.0, 1.0)).unwrap(),
            expected,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cone_cos_increases_with_distance() {
        let mut last = -1.0;
        for k in 0..200 {
            let d = 1.0 + 0.05 * k as f64;
            let c = cone_cos(&pair(d, 0.0, 0.0, 0.0, 1.0)).unwrap();
            assert!(c > last || (k == 0 && c == 0.0));
            last = c;
        }
    }

    #[test]
    fn h_vo_examples() {
        assert_relative_eq!(
            h_vo(&pair(2.0, 0.0, -1.0, 0.0, 1.0)).unwrap(),
            -2.0 + 3f64.sqrt(),
            epsilon = 1e-14
        );
        assert_eq!(h_vo(&pair(2.0, 0.0, 0.0, 0.0, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(
            h_vo(&pair(2.0, 0.0, 0.0, 1.0, 1.0)).unwrap(),
            3f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn h_vo_overlap_is_half_plane() {
        let p = pair(0.5, 0.0, -1.0, 0.3, 1.0);
        assert!(p.is_overlapping());
        assert_eq!(h_vo(&p).unwrap(), -0.5);
    }

    #[test]
    fn h_vo_sign_matches_ray_disc_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let pg = random_pair(&mut rng);
            let h = h_vo(&pg).unwrap();
            let miss = closest_approach(pg.p_rel, pg.v_rel);
            if (miss - pg.r_comb).abs() < 1e-9 {
                continue;
            }
            assert_eq!(h >= 0.0, miss > pg.r_comb, "{pg:?} h={h} miss={miss}");
            assert_eq!(h >= 0.0, time_to_collision(&pg).is_infinite());
        }
    }

    #[test]
    fn h_vo_dot_example() {
        let terms = h_vo_dot_terms(&pair(2.0, 0.0, 0.0, 1.0, 1.0)).unwrap();
        assert_relative_eq!(terms.drift, 1.0, epsilon = 1e-14);
        assert_eq!(terms.h_dot(Vec2::ZERO), terms.drift);
    }

    fn flow_h(pg: &PairGeometry, u: Vec2, eps: f64) -> f64 {
        let moved = PairGeometry::new(
            pg.p_rel + pg.v_rel * eps + u * (0.5 * eps * eps),
            pg.v_rel + u * eps,
            pg.r_comb,
        );
        h_vo(&moved).unwrap()
    }

    #[test]
    fn h_vo_dot_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let step = 1e-6;
        for _ in 0..1000 {
            let pg = random_pair(&mut rng);
            let u = Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let fd = (flow_h(&pg, u, step) - flow_h(&pg, u, -step)) / (2.0 * step);
            let analytic = h_vo_dot_terms(&pg).unwrap().h_dot(u);
            assert!(
                (fd - analytic).abs() <= 1e-5 * fd.abs().max(1.0),
                "{pg:?} u={u:?} fd={fd} analytic={analytic}"
            );
        }
    }

    #[test]
    fn zero_velocity_fallback() {
        let terms = h_vo_dot_terms(&pair(3.0, 1.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(terms.grad_u, Vec2::new(3.0, 1.0));
        assert_eq!(terms.drift, 0.0);
    }

    #[test]
    fn time_to_collision_examples() {
        assert_relative_eq!(
            time_to_collision(&pair(2.0, 0.0, -1.0, 0.0, 1.0)),
            1.0,
            epsilon = 1e-15
        );
        assert!(time_to_collision(&pair(2.0, 0.0, 0.0, 1.0, 1.0)).is_infinite());
        assert_eq!(time_to_collision(&pair(3.0, 4.0, -3.0, -4.0, 5.0)), 0.0);
        assert!(time_to_collision(&pair(2.0, 0.0, 0.0, 0.0, 1.0)).is_infinite());
    }

    #[test]
    fn time_to_collision_lands_on_contact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let pg = random_pair(&mut rng);
            let t = time_to_collision(&pg);
            if t.is_finite() {
                let d = (pg.p_rel + pg.v_rel * t).length();
                assert_relative_eq!(d, pg.r_comb, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(vo_weight(2.0), 0.5);
        assert_eq!(vo_weight(f64::INFINITY), 0.0);
        assert_eq!(vo_weight(0.0), WEIGHT_MAX);
        assert_eq!(vo_weight(1e-4), WEIGHT_MAX);
    }

    #[test]
    fn weights_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let pg = random_pair(&mut rng);
            assert_eq!(
                vo_weight(time_to_collision(&pg)),
                vo_weight(time_to_collision(&pg.reversed()))
            );
        }
    }
}
