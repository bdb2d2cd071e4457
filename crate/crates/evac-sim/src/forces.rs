//! Microscopic force laws: the human-human interaction potential, unknown
//! environment forces, and the robot navigation kernel with its spatial and
//! angular derivatives.

use crate::domain::{Domain, HumanCrowdState, ObstacleRegime, RobotTeamState};
use crate::error::{Result, SimError};
use crate::field::VectorField;
use crate::geom::{Mat2, Vec2};

/// Parameters of the pairwise potential
/// `U(xi) = C_r exp(-|xi|/s_r) - C_a exp(-|xi|/s_a)`:
/// short-range repulsion to keep social distance, long-range attraction for
/// the self-organizing pull of a crowd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionPotentialParams {
    pub repulsion_strength: f64,
    pub repulsion_range: f64,
    pub attraction_strength: f64,
    pub attraction_range: f64,
}

impl Default for InteractionPotentialParams {
    fn default() -> Self {
        Self {
            repulsion_strength: 0.02,
            repulsion_range: 0.05,
            attraction_strength: 0.01,
            attraction_range: 0.1,
        }
    }
}

impl InteractionPotentialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.repulsion_strength > 0.0
            && self.repulsion_range > 0.0
            && self.attraction_strength > 0.0
            && self.attraction_range > 0.0)
        {
            return Err(SimError::InvalidConfig(
                "interaction potential constants must be positive".into(),
            ));
        }
        // Typical regime: repulsion dominates at short range and decays
        // faster. Unusual values are allowed but flagged.
        if self.repulsion_strength / self.repulsion_range
            <= self.attraction_strength / self.attraction_range
            || self.repulsion_range >= self.attraction_range
        {
            log::warn!(
                "interaction potential outside the typical regime \
                 (C_r/s_r > C_a/s_a and s_r < s_a)"
            );
        }
        Ok(())
    }
}

/// The pair potential itself; exposed for finite-difference oracles.
pub fn potential(offset: Vec2, p: &InteractionPotentialParams) -> f64 {
    let r = offset.norm();
    p.repulsion_strength * (-r / p.repulsion_range).exp()
        - p.attraction_strength * (-r / p.attraction_range).exp()
}

/// Analytic gradient of the pair potential. The potential has a cusp at the
/// origin; coinciding points get the zero vector.
pub fn potential_gradient(offset: Vec2, p: &InteractionPotentialParams) -> Vec2 {
    let r = offset.norm();
    if r == 0.0 {
        return Vec2::default();
    }
    let radial = -(p.repulsion_strength / p.repulsion_range) * (-r / p.repulsion_range).exp()
        + (p.attraction_strength / p.attraction_range) * (-r / p.attraction_range).exp();
    offset * (radial / r)
}

/// Per-human social force `-(1/N) sum_{k != j} grad U(x_j - x_k)`.
///
/// The pair sum exploits the exact antisymmetry of the gradient (each pair is
/// evaluated once and applied with opposite signs); it must agree with the
/// naive per-human double loop to within summation reordering.
pub fn pairwise_forces(crowd: &HumanCrowdState, p: &InteractionPotentialParams) -> Vec<Vec2> {
    let n = crowd.len();
    let mut forces = vec![Vec2::default(); n];
    for j in 0..n {
        for k in j + 1..n {
            let g = potential_gradient(crowd.positions[j] - crowd.positions[k], p);
            forces[j] -= g;
            forces[k] += g;
        }
    }
    let scale = 1.0 / n as f64;
    for f in &mut forces {
        *f = *f * scale;
    }
    forces
}

/// Environment forces: a spatially uniform time-varying drift (always on) and
/// an obstacle repulsion active within a short activation radius of an
/// obstacle center (static/dynamic regimes only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvForceParams {
    pub drift_amplitude: f64,
    pub drift_rate: f64,
    pub obstacle_coefficient: f64,
    pub activation_radius: f64,
    /// Distance floor before evaluating the inverse-distance gradient, so a
    /// human landing on an obstacle center cannot blow up the force.
    pub min_distance: f64,
}

impl Default for EnvForceParams {
    fn default() -> Self {
        Self {
            drift_amplitude: 0.01,
            drift_rate: std::f64::consts::PI / 5.0,
            obstacle_coefficient: 0.0005,
            activation_radius: 0.03,
            min_distance: 0.005,
        }
    }
}

impl EnvForceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.drift_amplitude >= 0.0
            && self.drift_rate > 0.0
            && self.obstacle_coefficient >= 0.0
            && self.activation_radius > 0.0
            && self.min_distance > 0.0)
        {
            return Err(SimError::InvalidConfig(
                "environment force parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The ambient drift component, independent of position.
pub fn ambient_drift(t: f64, p: &EnvForceParams) -> Vec2 {
    let v = -p.drift_amplitude * (p.drift_rate * t).sin();
    Vec2::new(v, v)
}

/// Total unknown environment force at a point. Distance to an obstacle is
/// measured to its center; the repulsion is the gradient of the
/// inverse-distance potential, active only within the activation radius.
pub fn env_force(
    x: Vec2,
    t: f64,
    obstacle_centers: &[Vec2],
    p: &EnvForceParams,
    regime: ObstacleRegime,
) -> Vec2 {
    let mut f = ambient_drift(t, p);
    if regime == ObstacleRegime::None {
        return f;
    }
    for s in obstacle_centers {
        let delta = x - *s;
        let dist = delta.norm();
        if dist <= p.activation_radius && dist > 0.0 {
            let d = dist.max(p.min_distance);
            // -grad (c / |x - s|) = c (x - s) / |x - s|^3, away from the center.
            f += delta * (p.obstacle_coefficient / (dist * d * d));
        }
    }
    f
}

/// Navigation kernel parameters: peak amplitude, squared-distance divisor,
/// and hard support radius. The paper's concrete kernel jumps to zero at the
/// support edge; the formula is implemented verbatim, cutoff included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavigationKernelParams {
    pub amplitude: f64,
    pub shape: f64,
    pub support_radius: f64,
}

impl Default for NavigationKernelParams {
    fn default() -> Self {
        Self { amplitude: 0.05, shape: 0.03, support_radius: 0.15 }
    }
}

impl NavigationKernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.shape > 0.0 && self.support_radius > 0.0) {
            return Err(SimError::InvalidConfig(
                "navigation kernel parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Kernel magnitude `A exp(-|xi|^2 / s)` inside the support disk, zero outside.
pub fn kernel_value(offset: Vec2, p: &NavigationKernelParams) -> f64 {
    let r2 = offset.norm_squared();
    if r2 >= p.support_radius * p.support_radius {
        return 0.0;
    }
    p.amplitude * (-r2 / p.shape).exp()
}

/// Analytic spatial gradient of the kernel inside the support, zero outside.
pub fn kernel_gradient(offset: Vec2, p: &NavigationKernelParams) -> Vec2 {
    let v = kernel_value(offset, p);
    if v == 0.0 {
        return Vec2::default();
    }
    offset * (-2.0 * v / p.shape)
}

/// Navigation force from the whole team at one point:
/// `sum_i K(x - r_i) (cos theta_i, sin theta_i)`.
pub fn navigation_force(x: Vec2, robots: &RobotTeamState, p: &NavigationKernelParams) -> Vec2 {
    let mut f = Vec2::default();
    for i in 0..robots.len() {
        let k = kernel_value(x - robots.positions[i], p);
        if k != 0.0 {
            f += Vec2::from_angle(robots.directions[i]) * k;
        }
    }
    f
}

/// Navigation force evaluated at every grid node.
pub fn navigation_force_field(
    robots: &RobotTeamState,
    domain: &Domain,
    p: &NavigationKernelParams,
) -> VectorField {
    VectorField::from_fn(domain, |x| navigation_force(x, robots, p))
}

/// Jacobians of one robot's navigation force at a point: the spatial
/// derivative (2x2, rows scaled by cos/sin of the sign direction) and the
/// angular derivative `K (-sin theta, cos theta)`. Both vanish outside the
/// robot's support disk.
pub fn force_jacobians(
    x: Vec2,
    robot_position: Vec2,
    robot_direction: f64,
    p: &NavigationKernelParams,
) -> (Mat2, Vec2) {
    let offset = x - robot_position;
    let k = kernel_value(offset, p);
    if k == 0.0 {
        return (Mat2::default(), Vec2::default());
    }
    let g = offset * (-2.0 * k / p.shape);
    let (sin, cos) = robot_direction.sin_cos();
    let spatial = Mat2::new(g.x * cos, g.y * cos, g.x * sin, g.y * sin);
    let angular = Vec2::new(-k * sin, k * cos);
    (spatial, angular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn potential_gradient_matches_spec_values() {
        let p = InteractionPotentialParams::default();
        assert_eq!(potential_gradient(Vec2::default(), &p), Vec2::default());

        // Radial derivative at |xi| = 0.05: -0.4 e^-1 + 0.1 e^-0.5.
        let expected = -0.4 * (-1.0f64).exp() + 0.1 * (-0.5f64).exp();
        assert!((expected - (-0.086499)).abs() < 1e-6);
        let g = potential_gradient(Vec2::new(0.05, 0.0), &p);
        assert!((g.x - expected).abs() < 1e-12);
        assert!(g.y.abs() < 1e-15);
    }

    #[test]
    fn potential_gradient_matches_finite_differences() {
        let p = InteractionPotentialParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let eps = 1e-6;
        for _ in 0..100 {
            let xi = Vec2::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
            if xi.norm() < 1e-3 {
                continue;
            }
            let g = potential_gradient(xi, &p);
            let fd = Vec2::new(
                (potential(xi + Vec2::new(eps, 0.0), &p) - potential(xi - Vec2::new(eps, 0.0), &p))
                    / (2.0 * eps),
                (potential(xi + Vec2::new(0.0, eps), &p) - potential(xi - Vec2::new(0.0, eps), &p))
                    / (2.0 * eps),
            );
            assert!((g - fd).norm() < 1e-8, "at {xi:?}: {g:?} vs {fd:?}");
        }
    }

    #[test]
    fn pairwise_forces_edge_cases() {
        let p = InteractionPotentialParams::default();
        let single = HumanCrowdState::new(vec![Vec2::new(0.3, 0.3)], vec![Vec2::default()]).unwrap();
        assert_eq!(pairwise_forces(&single, &p)[0], Vec2::default());

        // Separation 0.1 is inside the repulsive regime (the crossover for
        // the default constants sits at ln(4)/10, about 0.139).
        let pair = HumanCrowdState::new(
            vec![Vec2::new(0.45, 0.5), Vec2::new(0.55, 0.5)],
            vec![Vec2::default(); 2],
        )
        .unwrap();
        let f = pairwise_forces(&pair, &p);
        assert!((f[0] + f[1]).norm() < 1e-15, "third-law symmetry");
        assert!(f[0].x < 0.0, "left human pushed left at short range");
    }

    #[test]
    fn pairwise_forces_match_naive_oracle() {
        let p = InteractionPotentialParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let positions: Vec<Vec2> =
            (0..50).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
        let crowd =
            HumanCrowdState::new(positions.clone(), vec![Vec2::default(); 50]).unwrap();
        let fast = pairwise_forces(&crowd, &p);
        let n = positions.len();
        let mut total = Vec2::default();
        for j in 0..n {
            let mut acc = Vec2::default();
            for (k, pos) in positions.iter().enumerate() {
                if k != j {
                    acc -= potential_gradient(positions[j] - *pos, &p);
                }
            }
            acc = acc * (1.0 / n as f64);
            assert!((fast[j].x - acc.x).abs() <= 1e-12);
            assert!((fast[j].y - acc.y).abs() <= 1e-12);
            total += fast[j];
        }
        assert!(total.norm() < 1e-10, "momentum balance");
    }

    #[test]
    fn env_force_drift_and_activation() {
        let p = EnvForceParams::default();
        let x = Vec2::new(0.5, 0.5);
        assert_eq!(env_force(x, 0.0, &[], &p, ObstacleRegime::None), Vec2::default());

        let f = env_force(x, 2.5, &[], &p, ObstacleRegime::None);
        assert!((f.x - (-0.01)).abs() < 1e-12);
        assert!((f.y - (-0.01)).abs() < 1e-12);

        // Farther than the activation radius from every obstacle the force
        // reduces to the drift, and it is independent of position.
        let centers = vec![Vec2::new(0.2, 0.2)];
        let far = env_force(Vec2::new(0.8, 0.8), 2.5, &centers, &p, ObstacleRegime::Static);
        assert_eq!(far, ambient_drift(2.5, &p));
        let elsewhere = env_force(Vec2::new(0.9, 0.1), 2.5, &[], &p, ObstacleRegime::None);
        assert_eq!(elsewhere, ambient_drift(2.5, &p));

        // Inside the activation radius the repulsion points away from the
        // center and the distance floor keeps it finite.
        let near = env_force(Vec2::new(0.21, 0.2), 0.0, &centers, &p, ObstacleRegime::Static);
        assert!(near.x > 0.0);
        let on_center =
            env_force(Vec2::new(0.2 + 1e-9, 0.2), 0.0, &centers, &p, ObstacleRegime::Dynamic);
        assert!(on_center.is_finite());
        assert!(on_center.x <= p.obstacle_coefficient / (p.min_distance * p.min_distance) * 1.01);
    }

    #[test]
    fn kernel_values_match_paper_setup() {
        let p = NavigationKernelParams::default();
        assert_eq!(kernel_value(Vec2::default(), &p), 0.05);
        assert_eq!(kernel_value(Vec2::new(0.16, 0.0), &p), 0.0);
        assert_eq!(kernel_value(Vec2::new(0.15, 0.0), &p), 0.0);
        let v = kernel_value(Vec2::new(0.1, 0.0), &p);
        assert!((v - 0.05 * (-1.0f64 / 3.0).exp()).abs() < 1e-12);
        assert!((v - 0.035827).abs() < 1e-6);

        // Strictly decreasing in radius inside the support.
        let mut prev = kernel_value(Vec2::default(), &p);
        for i in 1..15 {
            let r = 0.01 * i as f64;
            let v = kernel_value(Vec2::new(r, 0.0), &p);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn navigation_force_cases() {
        let kp = NavigationKernelParams::default();
        let robots = RobotTeamState {
            positions: vec![Vec2::new(0.5, 0.5)],
            velocities: vec![Vec2::default()],
            directions: vec![0.0],
            masses: vec![1.0],
        };
        // At the robot position the force is the kernel peak along the sign.
        let f = navigation_force(Vec2::new(0.5, 0.5), &robots, &kp);
        assert!((f - Vec2::new(0.05, 0.0)).norm() < 1e-15);
        // Outside the support disk the force vanishes.
        assert_eq!(navigation_force(Vec2::new(0.9, 0.5), &robots, &kp), Vec2::default());

        // Two coincident robots with opposite signs cancel everywhere.
        let pair = RobotTeamState {
            positions: vec![Vec2::new(0.5, 0.5); 2],
            velocities: vec![Vec2::default(); 2],
            directions: vec![1.0, 1.0 + std::f64::consts::PI],
            masses: vec![1.0; 2],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = Vec2::new(rng.gen(), rng.gen());
            assert!(navigation_force(x, &pair, &kp).norm() < 1e-16);
        }

        // Removing a robot whose disk excludes x leaves the force unchanged.
        let two = RobotTeamState {
            positions: vec![Vec2::new(0.5, 0.5), Vec2::new(0.05, 0.05)],
            velocities: vec![Vec2::default(); 2],
            directions: vec![0.7, 2.1],
            masses: vec![1.0; 2],
        };
        let x = Vec2::new(0.55, 0.45);
        assert_eq!(
            navigation_force(x, &two, &kp),
            navigation_force(x, &robots_with_direction(0.7), &kp)
        );

        // The field version matches the point evaluation exactly at nodes.
        let d = Domain::default();
        let node = d.node_position(15, 15);
        let at_node = RobotTeamState { positions: vec![node], ..robots.clone() };
        let field = navigation_force_field(&at_node, &d, &kp);
        assert_eq!(field.get(15, 15), Vec2::new(0.05, 0.0));
        assert_eq!(field.get(3, 20), navigation_force(d.node_position(3, 20), &at_node, &kp));
    }

    fn robots_with_direction(theta: f64) -> RobotTeamState {
        RobotTeamState {
            positions: vec![Vec2::new(0.5, 0.5)],
            velocities: vec![Vec2::default()],
            directions: vec![theta],
            masses: vec![1.0],
        }
    }

    #[test]
    fn jacobians_at_peak_and_outside() {
        let kp = NavigationKernelParams::default();
        let r = Vec2::new(0.4, 0.6);
        let (_, ang) = force_jacobians(r, r, 0.0, &kp);
        assert!((ang - Vec2::new(0.0, 0.05)).norm() < 1e-15);
        let (_, ang) = force_jacobians(r, r, std::f64::consts::FRAC_PI_2, &kp);
        assert!((ang - Vec2::new(-0.05, 0.0)).norm() < 1e-12);

        let (spatial, angular) = force_jacobians(Vec2::new(0.9, 0.9), r, 1.0, &kp);
        assert_eq!(spatial, Mat2::default());
        assert_eq!(angular, Vec2::default());
    }

    #[test]
    fn angular_jacobian_matches_finite_difference_and_norm() {
        let kp = NavigationKernelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let eps = 1e-7;
        for _ in 0..100 {
            let rp = Vec2::new(rng.gen(), rng.gen());
            let x = rp + Vec2::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let robots = RobotTeamState {
                positions: vec![rp],
                velocities: vec![Vec2::default()],
                directions: vec![theta],
                masses: vec![1.0],
            };
            let (_, angular) = force_jacobians(x, rp, theta, &kp);

            let mut plus = robots.clone();
            plus.directions[0] = theta + eps;
            let mut minus = robots.clone();
            minus.directions[0] = theta - eps;
            let fd = (navigation_force(x, &plus, &kp) - navigation_force(x, &minus, &kp))
                * (1.0 / (2.0 * eps));
            assert!((angular - fd).norm() < 1e-8);

            // |F_theta| equals the kernel magnitude exactly.
            assert!((angular.norm() - kernel_value(x - rp, &kp)).abs() < 1e-15);
        }
    }

    #[test]
    fn spatial_jacobian_matches_finite_difference() {
        let kp = NavigationKernelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let eps = 1e-7;
        for _ in 0..100 {
            let rp = Vec2::new(rng.gen(), rng.gen());
            // Stay strictly inside the support so the cutoff is not straddled.
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let radius: f64 = rng.gen_range(0.0..0.13);
            let x = rp + Vec2::from_angle(angle) * radius;
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (spatial, _) = force_jacobians(x, rp, theta, &kp);
            let robots = RobotTeamState {
                positions: vec![rp],
                velocities: vec![Vec2::default()],
                directions: vec![theta],
                masses: vec![1.0],
            };
            // Columns of the spatial Jacobian are d F / d xi in each direction.
            let fx = (navigation_force(x + Vec2::new(eps, 0.0), &robots, &kp)
                - navigation_force(x - Vec2::new(eps, 0.0), &robots, &kp))
                * (1.0 / (2.0 * eps));
            let fy = (navigation_force(x + Vec2::new(0.0, eps), &robots, &kp)
                - navigation_force(x - Vec2::new(0.0, eps), &robots, &kp))
                * (1.0 / (2.0 * eps));
            assert!((spatial.rows[0][0] - fx.x).abs() < 1e-7);
            assert!((spatial.rows[1][0] - fx.y).abs() < 1e-7);
            assert!((spatial.rows[0][1] - fy.x).abs() < 1e-7);
            assert!((spatial.rows[1][1] - fy.y).abs() < 1e-7);
        }
    }
}
