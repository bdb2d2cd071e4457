//! Reconstruction of the crowd density and velocity field on the grid from
//! the particle samples.

use crate::domain::Domain;
use crate::error::{Result, SimError};
use crate::field::{ScalarField, VectorField};
use crate::geom::Vec2;

/// Kernel density estimator configuration. The kernel is the standard
/// Gaussian `H(x) = (1/2pi) exp(-|x|^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self { bandwidth: 0.07 }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(SimError::InvalidConfig("KDE bandwidth must be positive".into()));
        }
        Ok(())
    }
}

/// Velocity-field estimator configuration: kernel-regression bandwidth and
/// the zero fill used where no sample carries weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimatorConfig {
    pub bandwidth: f64,
}

impl Default for VelocityEstimatorConfig {
    fn default() -> Self {
        Self { bandwidth: 0.07 }
    }
}

impl VelocityEstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(SimError::InvalidConfig(
                "velocity estimator bandwidth must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Weight sum below which a node is considered out of reach of every sample.
pub const WEIGHT_FLOOR: f64 = 1e-12;

fn gaussian_kernel(z2: f64) -> f64 {
    (1.0 / std::f64::consts::TAU) * (-0.5 * z2).exp()
}

/// Raw kernel density estimate `(1/(N h^2)) sum_j H((x - x_j)/h)` at every
/// grid node, without renormalization (it integrates to one over the plane,
/// not over the domain).
pub fn kde_density_raw(
    positions: &[Vec2],
    cfg: &KdeConfig,
    domain: &Domain,
) -> Result<ScalarField> {
    cfg.validate()?;
    if positions.is_empty() {
        return Err(SimError::Estimation("density estimate requires at least one sample".into()));
    }
    let h = cfg.bandwidth;
    let inv_h2 = 1.0 / (h * h);
    let scale = inv_h2 / positions.len() as f64;
    Ok(ScalarField::from_fn(domain, |node| {
        let mut acc = 0.0;
        for x in positions {
            acc += gaussian_kernel((node - *x).norm_squared() * inv_h2);
        }
        acc * scale
    }))
}

/// Kernel density estimate renormalized to unit grid integral over the
/// domain, so it is directly comparable with the equally normalized target.
pub fn kde_density(positions: &[Vec2], cfg: &KdeConfig, domain: &Domain) -> Result<ScalarField> {
    let raw = kde_density_raw(positions, cfg, domain)?;
    let mass = raw.integrate();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(SimError::Estimation(
            "density estimate carries no mass on the grid".into(),
        ));
    }
    Ok(raw.scaled(1.0 / mass))
}

/// Kernel-regression (Nadaraya-Watson) estimate of the crowd velocity field:
/// at every node the weighted average of sample velocities with Gaussian
/// weights, zero where the total weight underflows.
///
/// The particle samples satisfy `u(x_j) = v_j`; scattered-data interpolation
/// is undefined outside the samples' convex hull, so kernel regression is
/// used instead: it agrees with local averaging where samples are dense and
/// degrades gracefully in empty regions.
pub fn velocity_field_estimate(
    positions: &[Vec2],
    velocities: &[Vec2],
    cfg: &VelocityEstimatorConfig,
    domain: &Domain,
) -> Result<VectorField> {
    cfg.validate()?;
    if positions.is_empty() {
        return Err(SimError::Estimation(
            "velocity estimate requires at least one sample".into(),
        ));
    }
    if positions.len() != velocities.len() {
        return Err(SimError::Estimation(format!(
            "positions ({}) and velocities ({}) must align",
            positions.len(),
            velocities.len()
        )));
    }
    let inv_h2 = 1.0 / (cfg.bandwidth * cfg.bandwidth);
    Ok(VectorField::from_fn(domain, |node| {
        let mut weight_sum = 0.0;
        let mut acc = Vec2::default();
        for (x, v) in positions.iter().zip(velocities) {
            let w = gaussian_kernel((node - *x).norm_squared() * inv_h2);
            weight_sum += w;
            acc += *v * w;
        }
        if weight_sum < WEIGHT_FLOOR {
            Vec2::default()
        } else {
            acc * (1.0 / weight_sum)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn domain() -> Domain {
        Domain::default()
    }

    #[test]
    fn kde_rejects_empty_sample() {
        assert!(matches!(
            kde_density(&[], &KdeConfig::default(), &domain()),
            Err(SimError::Estimation(_))
        ));
    }

    #[test]
    fn kde_peak_value_at_single_sample() {
        // Direct evaluation of the estimator: a single sample at a node puts
        // 1/(2 pi h^2) there before renormalization.
        let d = domain();
        let node = d.node_position(10, 14);
        let cfg = KdeConfig::default();
        let raw = kde_density_raw(&[node], &cfg, &d).unwrap();
        let expected = 1.0 / (std::f64::consts::TAU * cfg.bandwidth * cfg.bandwidth);
        assert!((expected - 32.48).abs() < 0.01);
        assert!((raw.get(10, 14) - expected).abs() < 1e-9);
    }

    #[test]
    fn kde_unit_integral_after_renormalization() {
        let d = domain();
        let cfg = KdeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 10, 250] {
            let pts: Vec<Vec2> = (0..n).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
            let f = kde_density(&pts, &cfg, &d).unwrap();
            assert!((f.integrate() - 1.0).abs() < 1e-9, "N = {n}");
            assert!(f.values().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn kde_mirror_symmetry() {
        // Two equal clusters mirrored about the domain center produce a field
        // symmetric under the same mirror.
        let d = domain();
        let cfg = KdeConfig::default();
        let cluster = [
            Vec2::new(0.2, 0.3),
            Vec2::new(0.25, 0.35),
            Vec2::new(0.22, 0.28),
        ];
        let mirrored: Vec<Vec2> = cluster.iter().map(|p| Vec2::new(1.0 - p.x, p.y)).collect();
        let all: Vec<Vec2> = cluster.iter().copied().chain(mirrored).collect();
        let f = kde_density(&all, &cfg, &d).unwrap();
        for iy in 0..d.ny() {
            for ix in 0..d.nx() {
                let jx = d.nx() - 1 - ix;
                assert!(
                    (f.get(ix, iy) - f.get(jx, iy)).abs() < 1e-10,
                    "asymmetry at ({ix},{iy})"
                );
            }
        }
    }

    #[test]
    fn kde_permutation_invariant() {
        let d = domain();
        let cfg = KdeConfig::default();
        let pts = vec![Vec2::new(0.1, 0.9), Vec2::new(0.6, 0.4), Vec2::new(0.3, 0.3)];
        let mut reversed = pts.clone();
        reversed.reverse();
        let a = kde_density(&pts, &cfg, &d).unwrap();
        let b = kde_density(&reversed, &cfg, &d).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn velocity_estimate_constant_and_single_sample() {
        let d = domain();
        let cfg = VelocityEstimatorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec2> = (0..40).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
        let c = Vec2::new(0.3, -0.7);
        let vels = vec![c; pts.len()];
        let field = velocity_field_estimate(&pts, &vels, &cfg, &d).unwrap();
        for iy in 0..d.ny() {
            for ix in 0..d.nx() {
                let v = field.get(ix, iy);
                // Every node keeps nonzero weight at this sample count.
                assert!((v - c).norm() < 1e-9);
            }
        }

        // A single human pins the field to its own velocity nearby and the
        // fill value far away.
        let single = velocity_field_estimate(
            &[Vec2::new(0.1, 0.1)],
            &[Vec2::new(1.0, 2.0)],
            &cfg,
            &d,
        )
        .unwrap();
        assert!((single.sample(Vec2::new(0.1, 0.1)) - Vec2::new(1.0, 2.0)).norm() < 1e-9);
        assert_eq!(single.get(d.nx() - 1, d.ny() - 1), Vec2::default());
    }

    #[test]
    fn velocity_estimate_rejects_mismatched_lengths() {
        let d = domain();
        assert!(velocity_field_estimate(
            &[Vec2::default(); 3],
            &[Vec2::default(); 2],
            &VelocityEstimatorConfig::default(),
            &d
        )
        .is_err());
    }

    #[test]
    fn velocity_estimate_recovers_linear_field_where_dense() {
        // Samples drawn from v(x) = (x_1, 0); node error is O(h) at densely
        // sampled nodes (interior, away from the boundary bias).
        let d = domain();
        let cfg = VelocityEstimatorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec2> = (0..10_000).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
        let vels: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p.x, 0.0)).collect();
        let field = velocity_field_estimate(&pts, &vels, &cfg, &d).unwrap();
        let mut max_err: f64 = 0.0;
        for iy in 3..d.ny() - 3 {
            for ix in 3..d.nx() - 3 {
                let p = d.node_position(ix, iy);
                let err = (field.get(ix, iy) - Vec2::new(p.x, 0.0)).norm();
                max_err = max_err.max(err);
            }
        }
        assert!(max_err < 2.0 * cfg.bandwidth, "max interior error {max_err}");
    }

    #[test]
    fn velocity_estimate_stays_in_convex_hull() {
        // Weighted-average property: every node value is a convex combination
        // of the sample velocities. Tested through support functions in
        // random directions.
        let d = Domain::unit_square(8).unwrap();
        let cfg = VelocityEstimatorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(1..6);
            let pts: Vec<Vec2> = (0..n).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
            let vels: Vec<Vec2> = (0..n)
                .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let field = velocity_field_estimate(&pts, &vels, &cfg, &d).unwrap();
            for _ in 0..5 {
                let dir = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
                let support = vels.iter().map(|v| v.dot(dir)).fold(f64::MIN, f64::max);
                for iy in 0..d.ny() {
                    for ix in 0..d.nx() {
                        let v = field.get(ix, iy);
                        if v != Vec2::default() {
                            assert!(v.dot(dir) <= support.max(0.0) + 1e-9);
                        }
                    }
                }
            }
        }
    }
}
