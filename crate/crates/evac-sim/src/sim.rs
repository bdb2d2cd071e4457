//! The time-stepping engine: advance humans and robots under the assembled
//! forces and controllers, move obstacles, enforce boundaries, and record
//! per-iteration metrics.
//!
//! Each iteration estimates the macrostates from the current particles,
//! evaluates the full control stack on time-t data, then integrates both
//! species with semi-implicit Euler and projects them back into the domain
//! (position clamp plus zeroed outward normal velocity, the discrete
//! zero-flux rule).

use crate::control::{
    beta_weights, desired_force, direction_rates, position_control, virtual_velocity,
    AdaptiveApproximator, ControllerMemory,
};
use crate::domain::{
    init_humans_uniform, init_robots_corner_array, place_obstacles, target_density_field,
    wrap_angle, Domain, HumanCrowdState, ObstacleSet, RobotTeamState, SimConfig,
};
use crate::error::{Result, SimError};
use crate::estimation::{kde_density, velocity_field_estimate};
use crate::field::{ScalarField, VectorField};
use crate::forces::{env_force, navigation_force, navigation_force_field, pairwise_forces};
use crate::geom::Vec2;
use crate::rng;

/// Robot position and sign direction snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPose {
    pub position: Vec2,
    pub direction: f64,
}

/// One metrics row per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    /// L2 norm of the density error (estimate minus target).
    pub density_err: f64,
    /// L2 norm of the velocity error (estimate minus virtual velocity).
    pub velocity_err: f64,
    /// L2 norm of the navigation-force error (actual minus desired).
    pub force_err: f64,
    /// Euclidean norm of the adaptive weight estimate.
    pub weight_norm: f64,
    /// Monitor `V4 = (density^2 + velocity^2 + force^2) / 2`.
    pub lyapunov: f64,
    /// Percentage of humans inside the evacuation disk.
    pub evac_rate: f64,
    pub mean_speed: f64,
    pub robots: Vec<RobotPose>,
}

impl MetricsRow {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.density_err.is_finite()
            && self.velocity_err.is_finite()
            && self.force_err.is_finite()
            && self.weight_norm.is_finite()
            && self.lyapunov.is_finite()
            && self.evac_rate.is_finite()
            && self.mean_speed.is_finite()
            && self.robots.iter().all(|r| r.position.is_finite() && r.direction.is_finite())
    }
}

/// Per-iteration records of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
}

impl RunMetrics {
    pub fn final_row(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// The first row at or after the given time.
    pub fn row_at(&self, t: f64) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.t >= t - 1e-12)
    }
}

/// Grid fields cached for the current iteration, refreshed after every step.
#[derive(Debug, Clone)]
pub struct StepFields {
    pub density: ScalarField,
    pub velocity: VectorField,
    pub desired_velocity: VectorField,
    pub desired_velocity_rate: VectorField,
    pub velocity_error: VectorField,
    pub approx_prediction: VectorField,
    pub desired_force: VectorField,
    pub desired_force_rate: VectorField,
    pub navigation: VectorField,
    pub force_error: VectorField,
    pub beta: Vec<f64>,
    pub integrals: Vec<f64>,
    pub turn_rates: Vec<f64>,
    pub accelerations: Vec<Vec2>,
    pub controllable: bool,
    pub density_error_norm: f64,
}

/// A running simulation: owns the particle states, controller state, cached
/// fields, and the metrics trace.
pub struct Simulation {
    config: SimConfig,
    target_field: ScalarField,
    humans: HumanCrowdState,
    robots: RobotTeamState,
    obstacles: ObstacleSet,
    approximator: AdaptiveApproximator,
    memory: ControllerMemory,
    fields: StepFields,
    metrics: RunMetrics,
    step_index: usize,
    total_steps: usize,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let domain = config.domain;
        let target_field = target_density_field(&config.target, &domain)?;
        let humans = init_humans_uniform(config.humans, &domain, config.seed)?;
        let mut dir_rng = rng::substream(config.seed, rng::STREAM_ROBOT_DIRECTIONS);
        let robots = init_robots_corner_array(config.robots, &domain, &mut dir_rng)?;
        let mut obstacle_rng = rng::substream(config.seed, rng::STREAM_OBSTACLES);
        let obstacles = place_obstacles(
            config.obstacle_count,
            config.regime,
            &domain,
            &config.target,
            config.evac_radius,
            &mut obstacle_rng,
        )?;
        let approximator = AdaptiveApproximator::new(config.adaptive, &domain)?;
        let memory = ControllerMemory::default();
        let total_steps = ((config.horizon / config.dt) - 1e-9).ceil().max(0.0) as usize;

        let fields = compute_fields(
            config,
            &target_field,
            &humans,
            &robots,
            &obstacles,
            &approximator,
            &memory,
            0.0,
        )?;
        let mut sim = Self {
            config: config.clone(),
            target_field,
            humans,
            robots,
            obstacles,
            approximator,
            memory,
            fields,
            metrics: RunMetrics::default(),
            step_index: 0,
            total_steps,
        };
        sim.record_row()?;
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.dt
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn humans(&self) -> &HumanCrowdState {
        &self.humans
    }

    /// Test hook: scenario setup may overwrite particle states in place.
    #[doc(hidden)]
    pub fn humans_mut(&mut self) -> &mut HumanCrowdState {
        &mut self.humans
    }

    /// Test hook: scenario setup may overwrite robot states in place.
    #[doc(hidden)]
    pub fn robots_mut(&mut self) -> &mut RobotTeamState {
        &mut self.robots
    }

    pub fn robots(&self) -> &RobotTeamState {
        &self.robots
    }

    pub fn obstacle_centers(&self) -> Vec<Vec2> {
        self.obstacles.centers_at(self.time())
    }

    pub fn fields(&self) -> &StepFields {
        &self.fields
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> RunMetrics {
        self.metrics
    }

    /// The run ends at the horizon or as soon as the density error norm
    /// drops to the stop threshold.
    pub fn finished(&self) -> bool {
        if self.step_index >= self.total_steps {
            return true;
        }
        match self.metrics.final_row() {
            Some(row) => row.density_err <= self.config.stop_threshold,
            None => false,
        }
    }

    /// Advance one iteration; a no-op once the run has finished.
    pub fn step(&mut self) -> Result<()> {
        if self.finished() {
            return Ok(());
        }
        let dt = self.config.dt;
        let t = self.time();
        let switches = self.config.switches;

        // Adaptive update and derivative memory, from time-t fields.
        if switches.direction_control {
            self.approximator.update(&self.fields.velocity_error, dt)?;
        }
        self.memory.prev_desired_velocity = Some(self.fields.desired_velocity.clone());
        self.memory.prev_desired_force = Some(self.fields.desired_force.clone());

        // Human accelerations read time-t states of everything.
        let obstacle_centers = self.obstacles.centers_at(t);
        let social = if switches.social {
            pairwise_forces(&self.humans, &self.config.potential)
        } else {
            vec![Vec2::default(); self.humans.len()]
        };
        let mut human_accel = social;
        for (j, a) in human_accel.iter_mut().enumerate() {
            let x = self.humans.positions[j];
            if switches.environment {
                *a += env_force(x, t, &obstacle_centers, &self.config.env, self.config.regime);
            }
            if switches.navigation {
                *a += navigation_force(x, &self.robots, &self.config.kernel);
            }
            if switches.damping {
                *a -= self.humans.velocities[j] * self.config.human_damping;
            }
        }

        // Robots: semi-implicit Euler plus sign-direction rates.
        for i in 0..self.robots.len() {
            self.robots.velocities[i] += self.fields.accelerations[i] * dt;
            self.robots.positions[i] += self.robots.velocities[i] * dt;
            self.robots.directions[i] =
                wrap_angle(self.robots.directions[i] + dt * self.fields.turn_rates[i]);
            project_into_domain(
                &self.config.domain,
                &mut self.robots.positions[i],
                &mut self.robots.velocities[i],
            );
        }

        // Humans: semi-implicit Euler under the assembled forces.
        for j in 0..self.humans.len() {
            self.humans.velocities[j] += human_accel[j] * dt;
            self.humans.positions[j] += self.humans.velocities[j] * dt;
            project_into_domain(
                &self.config.domain,
                &mut self.humans.positions[j],
                &mut self.humans.velocities[j],
            );
        }

        self.step_index += 1;
        let diverged = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(SimError::Diverged { iteration: self.step_index })
            }
        };
        diverged(self.humans.positions.iter().all(|p| p.is_finite()))?;
        diverged(self.humans.velocities.iter().all(|v| v.is_finite()))?;
        diverged(self.robots.positions.iter().all(|p| p.is_finite()))?;
        diverged(
            self.robots
                .velocities
                .iter()
                .all(|v| v.is_finite())
                && self.robots.directions.iter().all(|d| d.is_finite()),
        )?;

        self.fields = compute_fields(
            &self.config,
            &self.target_field,
            &self.humans,
            &self.robots,
            &self.obstacles,
            &self.approximator,
            &self.memory,
            self.time(),
        )?;
        self.record_row()
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.finished() {
            self.step()?;
        }
        Ok(())
    }

    fn record_row(&mut self) -> Result<()> {
        let f = &self.fields;
        let density_err = f.density_error_norm;
        let velocity_err = f.velocity_error.l2_norm();
        let force_err = f.force_error.l2_norm();
        let row = MetricsRow {
            t: self.time(),
            density_err,
            velocity_err,
            force_err,
            weight_norm: self.approximator.weight_norm(),
            lyapunov: 0.5
                * (density_err * density_err + velocity_err * velocity_err
                    + force_err * force_err),
            evac_rate: evacuation_rate(
                &self.humans,
                self.config.target.safe_location,
                self.config.evac_radius,
            ),
            mean_speed: self.humans.velocities.iter().map(|v| v.norm()).sum::<f64>()
                / self.humans.len() as f64,
            robots: self
                .robots
                .positions
                .iter()
                .zip(&self.robots.directions)
                .map(|(p, d)| RobotPose { position: *p, direction: *d })
                .collect(),
        };
        if !row.is_finite() {
            return Err(SimError::Diverged { iteration: self.step_index });
        }
        self.metrics.rows.push(row);
        Ok(())
    }
}

/// Run a configuration to completion.
pub fn run(config: &SimConfig) -> Result<RunMetrics> {
    let mut sim = Simulation::new(config)?;
    sim.run_to_end()?;
    Ok(sim.into_metrics())
}

/// Estimate macrostates and evaluate the full control stack for the current
/// particle states at time `t`.
#[allow(clippy::too_many_arguments)]
fn compute_fields(
    config: &SimConfig,
    target_field: &ScalarField,
    humans: &HumanCrowdState,
    robots: &RobotTeamState,
    obstacles: &ObstacleSet,
    approximator: &AdaptiveApproximator,
    memory: &ControllerMemory,
    t: f64,
) -> Result<StepFields> {
    let domain = &config.domain;
    let dt = config.dt;
    let density = kde_density(&humans.positions, &config.kde, domain)?;
    let velocity = velocity_field_estimate(
        &humans.positions,
        &humans.velocities,
        &config.velocity_estimator,
        domain,
    )?;
    let desired_velocity = virtual_velocity(&density, target_field, &config.direction_control)?;
    let desired_velocity_rate = VectorField::time_derivative(
        memory.prev_desired_velocity.as_ref(),
        &desired_velocity,
        dt,
    )?;
    let velocity_error = velocity.sub(&desired_velocity)?;
    let approx_prediction = approximator.predict();
    let desired = desired_force(
        &density,
        target_field,
        &velocity,
        &desired_velocity_rate,
        &velocity_error,
        &approx_prediction,
        &config.direction_control,
        &config.potential,
    )?;
    let desired_force_rate =
        VectorField::time_derivative(memory.prev_desired_force.as_ref(), &desired, dt)?;
    let navigation = if config.switches.navigation {
        navigation_force_field(robots, domain, &config.kernel)
    } else {
        VectorField::zeros(domain)
    };
    let force_error = navigation.sub(&desired)?;
    let (beta, integrals, controllable) =
        beta_weights(&force_error, robots, &config.kernel, &config.direction_control);
    let turn_rates = if config.switches.direction_control {
        direction_rates(
            &force_error,
            &desired_force_rate,
            &velocity_error,
            robots,
            &beta,
            &integrals,
            &config.kernel,
            &config.direction_control,
        )?
    } else {
        vec![0.0; robots.len()]
    };
    let obstacle_centers = obstacles.centers_at(t);
    let accelerations = if config.switches.position_control {
        (0..robots.len())
            .map(|i| {
                position_control(i, robots, &obstacle_centers, domain, &config.position_control)
            })
            .collect()
    } else {
        vec![Vec2::default(); robots.len()]
    };
    let density_error_norm = density.sub(target_field)?.l2_norm();
    Ok(StepFields {
        density,
        velocity,
        desired_velocity,
        desired_velocity_rate,
        velocity_error,
        approx_prediction,
        desired_force: desired,
        desired_force_rate,
        navigation,
        force_error,
        beta,
        integrals,
        turn_rates,
        accelerations,
        controllable,
        density_error_norm,
    })
}

/// Clamp a particle into the domain and zero the outward normal velocity
/// component on contact.
fn project_into_domain(domain: &Domain, position: &mut Vec2, velocity: &mut Vec2) {
    let (lo, hi) = (domain.lower(), domain.upper());
    if position.x <= lo.x {
        position.x = lo.x;
        if velocity.x < 0.0 {
            velocity.x = 0.0;
        }
    } else if position.x >= hi.x {
        position.x = hi.x;
        if velocity.x > 0.0 {
            velocity.x = 0.0;
        }
    }
    if position.y <= lo.y {
        position.y = lo.y;
        if velocity.y < 0.0 {
            velocity.y = 0.0;
        }
    } else if position.y >= hi.y {
        position.y = hi.y;
        if velocity.y > 0.0 {
            velocity.y = 0.0;
        }
    }
}

/// Percentage of humans within the closed evacuation disk.
pub fn evacuation_rate(crowd: &HumanCrowdState, safe_location: Vec2, radius: f64) -> f64 {
    let evacuated = crowd
        .positions
        .iter()
        .filter(|p| (**p - safe_location).norm() <= radius)
        .count();
    100.0 * evacuated as f64 / crowd.len() as f64
}

/// Fraction of grid nodes within the influence radius of at least one robot.
pub fn coverage_fraction(robot_positions: &[Vec2], domain: &Domain, radius: f64) -> f64 {
    if robot_positions.is_empty() {
        return 0.0;
    }
    let r2 = radius * radius;
    let mut covered = 0usize;
    for iy in 0..domain.ny() {
        for ix in 0..domain.nx() {
            let node = domain.node_position(ix, iy);
            if robot_positions.iter().any(|p| (node - *p).norm_squared() <= r2) {
                covered += 1;
            }
        }
    }
    covered as f64 / domain.node_count() as f64
}
