//! The robot control stack: potential-field coverage position control,
//! density-feedback virtual velocity, adaptive RBF approximation of the
//! unknown environment force, the desired navigation force field, and the
//! sign-direction rate allocation.

use crate::domain::{Domain, RobotTeamState};
use crate::error::{Result, SimError};
use crate::field::{
    integrate_vector_weighted, interaction_convolution, ScalarField, VectorField,
};
use crate::forces::{kernel_gradient, kernel_value, InteractionPotentialParams, NavigationKernelParams};
use crate::geom::Vec2;

/// Gains for the coverage position controller.
///
/// The domain boundary is treated as four sensed obstacles (repelling with
/// `wall_gain` inside the sensing radius): without it the mutually repelling
/// team collapses onto the walls and interior coverage is lost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionControlParams {
    pub robot_gain: f64,
    pub obstacle_gain: f64,
    pub wall_gain: f64,
    pub viscosity: f64,
    pub sensing_radius: f64,
    /// Distance floor in the inverse-distance potentials; bounds the force
    /// when robots nearly collide.
    pub min_distance: f64,
}

impl Default for PositionControlParams {
    fn default() -> Self {
        Self {
            robot_gain: 0.003,
            obstacle_gain: 0.002,
            wall_gain: 0.002,
            viscosity: 1.0,
            sensing_radius: 0.2,
            min_distance: 0.01,
        }
    }
}

impl PositionControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.robot_gain > 0.0
            && self.obstacle_gain > 0.0
            && self.wall_gain >= 0.0
            && self.viscosity > 0.0
            && self.sensing_radius > 0.0
            && self.min_distance > 0.0)
        {
            return Err(SimError::InvalidConfig(
                "position control gains must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Inverse-distance repulsion `gain / d^2` along `delta`, with the distance
/// clamped below at the floor.
fn repulsion(delta: Vec2, gain: f64, floor: f64) -> Vec2 {
    let dist = delta.norm();
    if dist == 0.0 {
        return Vec2::default();
    }
    let d = dist.max(floor);
    delta * (gain / (dist * d * d))
}

/// Coverage acceleration for robot `i`: repulsion from the other robots,
/// from obstacle centers within the sensing radius, and from the domain
/// walls, minus viscous damping, divided by the robot mass.
pub fn position_control(
    i: usize,
    robots: &RobotTeamState,
    obstacle_centers: &[Vec2],
    domain: &Domain,
    p: &PositionControlParams,
) -> Vec2 {
    let r = robots.positions[i];
    let mut f = Vec2::default();
    for k in 0..robots.len() {
        if k != i {
            f += repulsion(r - robots.positions[k], p.robot_gain, p.min_distance);
        }
    }
    for s in obstacle_centers {
        if (r - *s).norm() < p.sensing_radius {
            f += repulsion(r - *s, p.obstacle_gain, p.min_distance);
        }
    }
    if p.wall_gain > 0.0 {
        let (lo, hi) = (domain.lower(), domain.upper());
        let walls = [
            Vec2::new(lo.x, r.y),
            Vec2::new(hi.x, r.y),
            Vec2::new(r.x, lo.y),
            Vec2::new(r.x, hi.y),
        ];
        for w in walls {
            if (r - w).norm() < p.sensing_radius {
                f += repulsion(r - w, p.wall_gain, p.min_distance);
            }
        }
    }
    (f - robots.velocities[i] * p.viscosity) * (1.0 / robots.masses[i])
}

/// Gains for the direction controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionControlParams {
    /// Normalized density-feedback gain; also the speed the virtual velocity
    /// commands wherever the density-error gradient is appreciable.
    pub density_gain: f64,
    pub velocity_gain: f64,
    pub alignment_gain: f64,
    /// Regularizer added to the gradient norm in the normalized feedback.
    pub gradient_floor: f64,
    /// Threshold below which a robot's angular-sensitivity integral counts
    /// as zero (the robot cannot affect the force error).
    pub integral_floor: f64,
    /// Saturation on the sign turn rate. The raw law divides by integrals
    /// that can be arbitrarily small just above the floor; saturation bounds
    /// the update without moving the equilibrium.
    pub max_turn_rate: f64,
}

impl Default for DirectionControlParams {
    fn default() -> Self {
        Self {
            density_gain: 0.05,
            velocity_gain: 0.1,
            alignment_gain: 0.1,
            gradient_floor: 1e-6,
            integral_floor: 1e-8,
            max_turn_rate: std::f64::consts::PI,
        }
    }
}

impl DirectionControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.density_gain > 0.0
            && self.velocity_gain > 0.0
            && self.alignment_gain > 0.0
            && self.gradient_floor > 0.0
            && self.integral_floor > 0.0
            && self.max_turn_rate > 0.0)
        {
            return Err(SimError::InvalidConfig(
                "direction control gains must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Virtual stabilizing crowd velocity: the negative density-error gradient,
/// normalized node-wise so the commanded speed is the density gain wherever
/// the gradient is appreciable.
pub fn virtual_velocity(
    density: &ScalarField,
    target: &ScalarField,
    p: &DirectionControlParams,
) -> Result<VectorField> {
    let err = density.sub(target)?;
    let grad = err.gradient();
    let n = density.domain().node_count();
    let mut out = VectorField::zeros(density.domain());
    for k in 0..n {
        let g = grad.get_flat(k);
        let scale = -p.density_gain / (g.norm() + p.gradient_floor);
        let iy = k / density.domain().nx();
        let ix = k % density.domain().nx();
        out.set(ix, iy, g * scale);
    }
    Ok(out)
}

/// Parameters of the adaptive RBF approximator for the unknown force field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    /// Adaptation gain (a scalar multiple of the identity).
    pub gain: f64,
    /// Leakage coefficient pulling the weights toward zero.
    pub leakage: f64,
    /// RBF centers form a regular lattice with this many per axis.
    pub basis_per_axis: usize,
    /// RBF width: `phi_k(x) = exp(-|x - c_k|^2 / width^2)`, so neighboring
    /// basis functions on the default 0.25-pitch lattice cross at about half
    /// their peak.
    pub basis_width: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self { gain: 0.1, leakage: 0.1, basis_per_axis: 5, basis_width: 0.15 }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.leakage > 0.0 && self.basis_width > 0.0) {
            return Err(SimError::InvalidConfig("adaptive gains must be positive".into()));
        }
        if self.basis_per_axis == 0 {
            return Err(SimError::InvalidConfig("adaptive basis needs at least one center".into()));
        }
        Ok(())
    }
}

/// Linear-in-weights RBF expansion of the unknown force field, with the
/// weight estimate driven by the velocity-error update law.
///
/// Weight layout: entries `0..m` weight the shared features in the first
/// force component, entries `m..2m` in the second.
#[derive(Debug, Clone)]
pub struct AdaptiveApproximator {
    params: AdaptiveParams,
    domain: Domain,
    centers: Vec<Vec2>,
    node_features: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl AdaptiveApproximator {
    pub fn new(params: AdaptiveParams, domain: &Domain) -> Result<Self> {
        params.validate()?;
        let per_axis = params.basis_per_axis;
        let (lo, hi) = (domain.lower(), domain.upper());
        let mut centers = Vec::with_capacity(per_axis * per_axis);
        for iy in 0..per_axis {
            for ix in 0..per_axis {
                let frac = |i: usize| {
                    if per_axis == 1 {
                        0.5
                    } else {
                        i as f64 / (per_axis - 1) as f64
                    }
                };
                centers.push(Vec2::new(
                    lo.x + frac(ix) * (hi.x - lo.x),
                    lo.y + frac(iy) * (hi.y - lo.y),
                ));
            }
        }
        let inv_w2 = 1.0 / (params.basis_width * params.basis_width);
        let node_features = centers
            .iter()
            .map(|c| {
                let mut vals = Vec::with_capacity(domain.node_count());
                for iy in 0..domain.ny() {
                    for ix in 0..domain.nx() {
                        let d2 = (domain.node_position(ix, iy) - *c).norm_squared();
                        vals.push((-d2 * inv_w2).exp());
                    }
                }
                vals
            })
            .collect::<Vec<_>>();
        let m = centers.len();
        Ok(Self { params, domain: *domain, centers, node_features, weights: vec![0.0; 2 * m] })
    }

    pub fn feature_count(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec2] {
        &self.centers
    }

    pub fn node_features(&self) -> &[Vec<f64>] {
        &self.node_features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != 2 * self.feature_count() {
            return Err(SimError::InvalidConfig(format!(
                "expected {} weights, got {}",
                2 * self.feature_count(),
                weights.len()
            )));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Feature value of center `k` at an arbitrary point.
    pub fn feature_at(&self, k: usize, x: Vec2) -> f64 {
        let inv_w2 = 1.0 / (self.params.basis_width * self.params.basis_width);
        (-(x - self.centers[k]).norm_squared() * inv_w2).exp()
    }

    /// The weighted expansion on the grid.
    pub fn predict(&self) -> VectorField {
        let m = self.feature_count();
        let n = self.domain.node_count();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for (k, feat) in self.node_features.iter().enumerate() {
            let (wx, wy) = (self.weights[k], self.weights[m + k]);
            if wx != 0.0 || wy != 0.0 {
                for i in 0..n {
                    x[i] += wx * feat[i];
                    y[i] += wy * feat[i];
                }
            }
        }
        VectorField::from_components(&self.domain, x, y).expect("feature grids match the domain")
    }

    /// Forward-Euler step of the adaptive update law:
    /// `w += dt * gain * (integral(phi u_err) - leakage * w)`.
    pub fn update(&mut self, velocity_error: &VectorField, dt: f64) -> Result<()> {
        if velocity_error.domain() != &self.domain {
            return Err(SimError::GridMismatch(
                "velocity error lives on a different grid than the approximator".into(),
            ));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let drive = integrate_vector_weighted(&self.node_features, velocity_error)?;
        for (w, d) in self.weights.iter_mut().zip(&drive) {
            *w += dt * self.params.gain * (d - self.params.leakage * *w);
        }
        Ok(())
    }
}

/// Desired navigation force field from the backstepping design:
/// `F_d = -k_u u_err - rho grad(rho_err) + (u.grad)u + gradU*rho - g_hat + d/dt u_d`.
#[allow(clippy::too_many_arguments)]
pub fn desired_force(
    density: &ScalarField,
    target: &ScalarField,
    velocity: &VectorField,
    desired_velocity_rate: &VectorField,
    velocity_error: &VectorField,
    approx_prediction: &VectorField,
    dc: &DirectionControlParams,
    potential: &InteractionPotentialParams,
) -> Result<VectorField> {
    let domain = density.domain();
    for d in [
        target.domain(),
        velocity.domain(),
        desired_velocity_rate.domain(),
        velocity_error.domain(),
        approx_prediction.domain(),
    ] {
        crate::field::check_same_grid(domain, d)?;
    }
    let density_err = density.sub(target)?;
    let grad_err = density_err.gradient();
    let convective = velocity.advection();
    let interaction = interaction_convolution(density, potential);

    let n = domain.node_count();
    let mut out = VectorField::zeros(domain);
    let nx = domain.nx();
    for k in 0..n {
        let rho = density.values()[k];
        let v = velocity_error.get_flat(k) * (-dc.velocity_gain)
            - grad_err.get_flat(k) * rho
            + convective.get_flat(k)
            + interaction.get_flat(k)
            - approx_prediction.get_flat(k)
            + desired_velocity_rate.get_flat(k);
        out.set(k % nx, k / nx, v);
    }
    Ok(out)
}

/// Inclusive node-index ranges of the grid window covering a disk.
fn disk_window(domain: &Domain, center: Vec2, radius: f64) -> (usize, usize, usize, usize) {
    let h = domain.spacing();
    let lo = domain.lower();
    let x0 = ((center.x - radius - lo.x) / h.x).floor().max(0.0) as usize;
    let y0 = ((center.y - radius - lo.y) / h.y).floor().max(0.0) as usize;
    let x1 = (((center.x + radius - lo.x) / h.x).ceil() as usize).min(domain.nx() - 1);
    let y1 = (((center.y + radius - lo.y) / h.y).ceil() as usize).min(domain.ny() - 1);
    (x0, x1.max(x0), y0, y1.max(y0))
}

/// Angular-sensitivity integral of one robot: the force error integrated
/// against the angular derivative of its navigation force over its support
/// disk (grid quadrature).
fn angular_sensitivity(
    force_error: &VectorField,
    position: Vec2,
    direction: f64,
    kernel: &NavigationKernelParams,
) -> f64 {
    let domain = force_error.domain();
    let (x0, x1, y0, y1) = disk_window(domain, position, kernel.support_radius);
    let (sin, cos) = direction.sin_cos();
    let mut acc = 0.0;
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            let k = kernel_value(domain.node_position(ix, iy) - position, kernel);
            if k != 0.0 {
                let e = force_error.get(ix, iy);
                acc += e.x * (-k * sin) + e.y * (k * cos);
            }
        }
    }
    acc * domain.cell_area()
}

/// The allocation rule on given sensitivity integrals: equal weights
/// `1/n'` over the robots whose integral magnitude exceeds the floor, zero
/// for the rest. Returns the weights and whether any robot is active.
pub fn allocate_beta(integrals: &[f64], integral_floor: f64) -> (Vec<f64>, bool) {
    let active = integrals.iter().filter(|v| v.abs() > integral_floor).count();
    if active == 0 {
        return (vec![0.0; integrals.len()], false);
    }
    let share = 1.0 / active as f64;
    (
        integrals
            .iter()
            .map(|v| if v.abs() > integral_floor { share } else { 0.0 })
            .collect(),
        true,
    )
}

/// Compute each robot's sensitivity integral and the equal-share allocation
/// over the robots that can still affect the force error. When none can, the
/// returned flag is false and every turn rate must be zero.
pub fn beta_weights(
    force_error: &VectorField,
    robots: &RobotTeamState,
    kernel: &NavigationKernelParams,
    dc: &DirectionControlParams,
) -> (Vec<f64>, Vec<f64>, bool) {
    let integrals: Vec<f64> = (0..robots.len())
        .map(|i| {
            angular_sensitivity(force_error, robots.positions[i], robots.directions[i], kernel)
        })
        .collect();
    let (beta, controllable) = allocate_beta(&integrals, dc.integral_floor);
    (beta, integrals, controllable)
}

/// Sign turn rates: for each active robot
/// `eta_i = -(beta_i A + k_eta B) / I_i`, where `A` integrates the force
/// error against the shared drive `u_err - d/dt F_d - sum_k Fxi_k rdot_k`,
/// `B` is the squared force-error norm, and `I_i` is the robot's sensitivity
/// integral. Inactive robots get zero; rates saturate at the configured bound.
#[allow(clippy::too_many_arguments)]
pub fn direction_rates(
    force_error: &VectorField,
    desired_force_rate: &VectorField,
    velocity_error: &VectorField,
    robots: &RobotTeamState,
    beta: &[f64],
    integrals: &[f64],
    kernel: &NavigationKernelParams,
    dc: &DirectionControlParams,
) -> Result<Vec<f64>> {
    let domain = force_error.domain();
    crate::field::check_same_grid(domain, desired_force_rate.domain())?;
    crate::field::check_same_grid(domain, velocity_error.domain())?;
    if beta.len() != robots.len() || integrals.len() != robots.len() {
        return Err(SimError::Internal(
            "beta/integral lists out of step with the robot team".into(),
        ));
    }

    // Shared integrand: u_err - dFd/dt - sum_k (grad K . rdot_k)(cos, sin).
    let n = domain.node_count();
    let nx = domain.nx();
    let mut drive_x = vec![0.0; n];
    let mut drive_y = vec![0.0; n];
    for k in 0..n {
        let v = velocity_error.get_flat(k) - desired_force_rate.get_flat(k);
        drive_x[k] = v.x;
        drive_y[k] = v.y;
    }
    for i in 0..robots.len() {
        let rdot = robots.velocities[i];
        if rdot == Vec2::default() {
            continue;
        }
        let dir = Vec2::from_angle(robots.directions[i]);
        let (x0, x1, y0, y1) = disk_window(domain, robots.positions[i], kernel.support_radius);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let g = kernel_gradient(
                    domain.node_position(ix, iy) - robots.positions[i],
                    kernel,
                );
                if g != Vec2::default() {
                    let pull = g.dot(rdot);
                    let k = iy * nx + ix;
                    drive_x[k] -= pull * dir.x;
                    drive_y[k] -= pull * dir.y;
                }
            }
        }
    }

    let area = domain.cell_area();
    let mut shared = 0.0;
    let mut error_energy = 0.0;
    for k in 0..n {
        let e = force_error.get_flat(k);
        shared += e.x * drive_x[k] + e.y * drive_y[k];
        error_energy += e.norm_squared();
    }
    shared *= area;
    error_energy *= area;

    let mut rates = Vec::with_capacity(robots.len());
    for i in 0..robots.len() {
        if beta[i] == 0.0 {
            rates.push(0.0);
            continue;
        }
        if integrals[i].abs() <= dc.integral_floor {
            return Err(SimError::Internal(format!(
                "robot {i} is marked active but its sensitivity integral {} is below the floor",
                integrals[i]
            )));
        }
        let raw = -(beta[i] * shared + dc.alignment_gain * error_energy) / integrals[i];
        rates.push(raw.clamp(-dc.max_turn_rate, dc.max_turn_rate));
    }
    Ok(rates)
}

/// Backward-difference memory for the time derivatives of the designed
/// fields; cleared at run start so the first iteration sees zero rates.
#[derive(Debug, Clone, Default)]
pub struct ControllerMemory {
    pub prev_desired_velocity: Option<VectorField>,
    pub prev_desired_force: Option<VectorField>,
}

impl ControllerMemory {
    pub fn clear(&mut self) {
        self.prev_desired_velocity = None;
        self.prev_desired_force = None;
    }
}
