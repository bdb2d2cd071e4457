//! Spatial domain, particle states, obstacles, target density, and run
//! configuration.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::control::{AdaptiveParams, DirectionControlParams, PositionControlParams};
use crate::error::{Result, SimError};
use crate::estimation::{KdeConfig, VelocityEstimatorConfig};
use crate::field::ScalarField;
use crate::forces::{EnvForceParams, InteractionPotentialParams, NavigationKernelParams};
use crate::geom::Vec2;
use crate::rng;

/// Axis-aligned rectangular workspace with a node-centered grid.
///
/// Node `(ix, iy)` sits at `lower + (ix * hx, iy * hy)` where the spacing is
/// `h = side / (resolution - 1)`, so the outermost nodes lie on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    lower: Vec2,
    upper: Vec2,
    nx: usize,
    ny: usize,
}

impl Domain {
    pub const DEFAULT_RESOLUTION: usize = 30;

    pub fn new(lower: Vec2, upper: Vec2, nx: usize, ny: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(SimError::InvalidConfig("domain corners must be finite".into()));
        }
        if upper.x <= lower.x || upper.y <= lower.y {
            return Err(SimError::InvalidConfig(
                "domain upper corner must exceed lower corner component-wise".into(),
            ));
        }
        if nx < 4 || ny < 4 {
            return Err(SimError::InvalidConfig(
                "grid resolution must be at least 4 on each axis".into(),
            ));
        }
        Ok(Self { lower, upper, nx, ny })
    }

    /// The paper's workspace: `[0,1]^2` at the given resolution per axis.
    pub fn unit_square(resolution: usize) -> Result<Self> {
        Self::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), resolution, resolution)
    }

    pub fn lower(&self) -> Vec2 {
        self.lower
    }

    pub fn upper(&self) -> Vec2 {
        self.upper
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Grid spacing per axis; strictly positive by construction.
    pub fn spacing(&self) -> Vec2 {
        Vec2::new(
            (self.upper.x - self.lower.x) / (self.nx - 1) as f64,
            (self.upper.y - self.lower.y) / (self.ny - 1) as f64,
        )
    }

    /// Quadrature weight of one node under the plain-summation rule.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h.x * h.y
    }

    pub fn node_position(&self, ix: usize, iy: usize) -> Vec2 {
        let h = self.spacing();
        Vec2::new(
            self.lower.x + ix as f64 * h.x,
            self.lower.y + iy as f64 * h.y,
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.lower.x && p.x <= self.upper.x && p.y >= self.lower.y && p.y <= self.upper.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.lower.x, self.upper.x),
            p.y.clamp(self.lower.y, self.upper.y),
        )
    }

    pub fn center(&self) -> Vec2 {
        (self.lower + self.upper) * 0.5
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::unit_square(Self::DEFAULT_RESOLUTION).expect("default domain is valid")
    }
}

/// Positions and velocities of all humans.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanCrowdState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl HumanCrowdState {
    pub fn new(positions: Vec<Vec2>, velocities: Vec<Vec2>) -> Result<Self> {
        if positions.is_empty() {
            return Err(SimError::InvalidConfig("crowd must contain at least one human".into()));
        }
        if positions.len() != velocities.len() {
            return Err(SimError::InvalidConfig(
                "crowd position and velocity lists must have equal length".into(),
            ));
        }
        Ok(Self { positions, velocities })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Positions, velocities, sign directions, and masses of the robot team.
///
/// Directions are the orientations of the carried arrow signs, wrapped to
/// `[0, 2*pi)`; they are independent of the robot chassis pose.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotTeamState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub directions: Vec<f64>,
    pub masses: Vec<f64>,
}

impl RobotTeamState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Wrap an angle to `[0, 2*pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut t = theta.rem_euclid(two_pi);
    if t >= two_pi {
        t = 0.0;
    }
    t
}

/// Obstacle field regimes studied in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObstacleRegime {
    None,
    Static,
    Dynamic,
}

impl ObstacleRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            ObstacleRegime::None => "none",
            ObstacleRegime::Static => "static",
            ObstacleRegime::Dynamic => "dynamic",
        }
    }
}

impl std::str::FromStr for ObstacleRegime {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ObstacleRegime::None),
            "static" => Ok(ObstacleRegime::Static),
            "dynamic" => Ok(ObstacleRegime::Dynamic),
            other => Err(SimError::InvalidConfig(format!(
                "unknown obstacle regime '{other}' (expected none|static|dynamic)"
            ))),
        }
    }
}

/// How a single obstacle moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObstacleMotion {
    Static,
    /// Oscillates along x with the signed amplitude.
    HorizontalOscillating { amplitude: f64 },
    /// Oscillates along y with the signed amplitude.
    VerticalOscillating { amplitude: f64 },
}

/// A square obstacle anchored at `base_center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub base_center: Vec2,
    pub half_extent: Vec2,
    pub motion: ObstacleMotion,
}

pub const OBSTACLE_HALF_EXTENT: f64 = 0.025;
pub const OBSTACLE_OSCILLATION_AMPLITUDE: f64 = 0.1;
pub const OBSTACLE_OSCILLATION_RATE: f64 = 0.2;

impl Obstacle {
    /// Center at time `t`: the base center, with `amplitude * sin(rate * t)`
    /// added to exactly one coordinate for the oscillating modes.
    pub fn center_at(&self, t: f64) -> Vec2 {
        match self.motion {
            ObstacleMotion::Static => self.base_center,
            ObstacleMotion::HorizontalOscillating { amplitude } => Vec2::new(
                self.base_center.x + amplitude * (OBSTACLE_OSCILLATION_RATE * t).sin(),
                self.base_center.y,
            ),
            ObstacleMotion::VerticalOscillating { amplitude } => Vec2::new(
                self.base_center.x,
                self.base_center.y + amplitude * (OBSTACLE_OSCILLATION_RATE * t).sin(),
            ),
        }
    }
}

/// The set of obstacles present in a run; empty in the obstacle-free regime.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObstacleSet {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn centers_at(&self, t: f64) -> Vec<Vec2> {
        self.obstacles.iter().map(|o| o.center_at(t)).collect()
    }
}

/// Gaussian target density concentrated at the safe location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDensity {
    pub safe_location: Vec2,
    pub spread: f64,
}

impl Default for TargetDensity {
    fn default() -> Self {
        Self {
            safe_location: Vec2::new(13.0 / 16.0, 0.5),
            spread: 0.085,
        }
    }
}

impl TargetDensity {
    pub fn validate(&self) -> Result<()> {
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(SimError::InvalidConfig("target density spread must be positive".into()));
        }
        if !self.safe_location.is_finite() {
            return Err(SimError::InvalidConfig("safe location must be finite".into()));
        }
        Ok(())
    }
}

/// Evaluate the target Gaussian at every grid node and renormalize so the
/// grid quadrature over the domain equals one.
///
/// The analytic Gaussian leaks mass outside the domain, so renormalization is
/// required for the field to be comparable with the (equally renormalized)
/// density estimate; any constant prefactor cancels.
pub fn target_density_field(target: &TargetDensity, domain: &Domain) -> Result<ScalarField> {
    target.validate()?;
    let inv_two_sigma_sq = 1.0 / (2.0 * target.spread * target.spread);
    let field = ScalarField::from_fn(domain, |p| {
        (-(p - target.safe_location).norm_squared() * inv_two_sigma_sq).exp()
    });
    let mass = field.integrate();
    if !(mass > 0.0) {
        return Err(SimError::InvalidConfig(
            "target density has no mass on the grid (spread too small?)".into(),
        ));
    }
    Ok(field.scaled(1.0 / mass))
}

/// Draw N humans i.i.d. uniform over the domain with zero initial velocity.
///
/// Deterministic for a fixed seed: the sampler consumes the human sub-stream
/// of the master seed, x coordinate before y, in index order.
pub fn init_humans_uniform(n: usize, domain: &Domain, seed: u64) -> Result<HumanCrowdState> {
    if n == 0 {
        return Err(SimError::InvalidConfig("human count must be at least 1".into()));
    }
    let mut rng = rng::substream(seed, rng::STREAM_HUMANS);
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(lo.x..hi.x);
        let y = rng.gen_range(lo.y..hi.y);
        positions.push(Vec2::new(x, y));
    }
    HumanCrowdState::new(positions, vec![Vec2::default(); n])
}

/// Lattice spacing of the initial robot array and its offset from the corner.
pub const ROBOT_ARRAY_SPACING: f64 = 0.05;

/// Place n robots on a regular `ceil(sqrt(n))`-per-row lattice anchored at
/// the lower-left corner, with zero velocity, unit mass, and sign directions
/// drawn i.i.d. uniform from `[0, 2*pi)`.
pub fn init_robots_corner_array(
    n: usize,
    domain: &Domain,
    direction_rng: &mut ChaCha8Rng,
) -> Result<RobotTeamState> {
    if n == 0 {
        return Err(SimError::InvalidConfig("robot count must be at least 1".into()));
    }
    let per_row = (n as f64).sqrt().ceil() as usize;
    let anchor = domain.lower() + Vec2::new(ROBOT_ARRAY_SPACING, ROBOT_ARRAY_SPACING);
    let mut positions = Vec::with_capacity(n);
    for i in 0..n {
        let col = i % per_row;
        let row = i / per_row;
        let p = anchor
            + Vec2::new(
                col as f64 * ROBOT_ARRAY_SPACING,
                row as f64 * ROBOT_ARRAY_SPACING,
            );
        if !domain.contains(p) {
            return Err(SimError::InvalidConfig(format!(
                "initial robot lattice does not fit inside the domain (robot {i} at ({}, {}))",
                p.x, p.y
            )));
        }
        positions.push(p);
    }
    let directions = (0..n)
        .map(|_| direction_rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    Ok(RobotTeamState {
        positions,
        velocities: vec![Vec2::default(); n],
        directions,
        masses: vec![1.0; n],
    })
}

/// Rejection-sample obstacle centers uniformly over the domain, rejecting any
/// square that intersects the evacuation disk around the safe location (the
/// crowd must be able to settle there unobstructed). For the dynamic regime
/// each obstacle gets a random oscillation axis and sign.
pub fn place_obstacles(
    count: usize,
    regime: ObstacleRegime,
    domain: &Domain,
    target: &TargetDensity,
    evac_radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ObstacleSet> {
    if regime == ObstacleRegime::None || count == 0 {
        return Ok(ObstacleSet::empty());
    }
    let half = Vec2::new(OBSTACLE_HALF_EXTENT, OBSTACLE_HALF_EXTENT);
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut obstacles = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while obstacles.len() < count {
        attempts += 1;
        if attempts > 10_000 * count {
            return Err(SimError::InvalidConfig(
                "could not place obstacles outside the evacuation disk".into(),
            ));
        }
        let center = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if square_intersects_disk(center, half, target.safe_location, evac_radius) {
            continue;
        }
        let motion = match regime {
            ObstacleRegime::Static => ObstacleMotion::Static,
            ObstacleRegime::Dynamic => {
                let horizontal: bool = rng.gen();
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let amplitude = sign * OBSTACLE_OSCILLATION_AMPLITUDE;
                if horizontal {
                    ObstacleMotion::HorizontalOscillating { amplitude }
                } else {
                    ObstacleMotion::VerticalOscillating { amplitude }
                }
            }
            ObstacleRegime::None => unreachable!(),
        };
        obstacles.push(Obstacle { base_center: center, half_extent: half, motion });
    }
    Ok(ObstacleSet { obstacles })
}

fn square_intersects_disk(center: Vec2, half: Vec2, disk_center: Vec2, radius: f64) -> bool {
    let dx = ((center.x - disk_center.x).abs() - half.x).max(0.0);
    let dy = ((center.y - disk_center.y).abs() - half.y).max(0.0);
    dx * dx + dy * dy <= radius * radius
}

/// Diagnostic switches that zero out individual force/controller channels.
/// All channels are on in normal runs; tests use these to isolate the
/// integrator or a single force law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSwitches {
    pub social: bool,
    pub environment: bool,
    pub navigation: bool,
    pub damping: bool,
    pub position_control: bool,
    pub direction_control: bool,
}

impl Default for ForceSwitches {
    fn default() -> Self {
        Self {
            social: true,
            environment: true,
            navigation: true,
            damping: true,
            position_control: true,
            direction_control: true,
        }
    }
}

impl ForceSwitches {
    pub fn all_disabled() -> Self {
        Self {
            social: false,
            environment: false,
            navigation: false,
            damping: false,
            position_control: false,
            direction_control: false,
        }
    }
}

/// Full parameterization of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub humans: usize,
    pub robots: usize,
    pub dt: f64,
    pub horizon: f64,
    pub regime: ObstacleRegime,
    pub obstacle_count: usize,
    pub seed: u64,
    pub evac_radius: f64,
    /// Stop threshold gamma on the density-error norm; 0 runs the full horizon.
    pub stop_threshold: f64,
    /// Viscous damping on human velocities; mirrors the robots' viscosity.
    /// At 1.0 the terminal speed under one full-strength navigation kernel
    /// equals the virtual-velocity design speed.
    pub human_damping: f64,
    pub domain: Domain,
    pub target: TargetDensity,
    pub potential: InteractionPotentialParams,
    pub kernel: NavigationKernelParams,
    pub env: EnvForceParams,
    pub kde: KdeConfig,
    pub velocity_estimator: VelocityEstimatorConfig,
    pub position_control: PositionControlParams,
    pub direction_control: DirectionControlParams,
    pub adaptive: AdaptiveParams,
    pub switches: ForceSwitches,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            humans: 250,
            robots: 16,
            dt: 0.1,
            horizon: 80.0,
            regime: ObstacleRegime::None,
            obstacle_count: 5,
            seed: 0,
            evac_radius: 0.15,
            stop_threshold: 0.0,
            human_damping: 1.0,
            domain: Domain::default(),
            target: TargetDensity::default(),
            potential: InteractionPotentialParams::default(),
            kernel: NavigationKernelParams::default(),
            env: EnvForceParams::default(),
            kde: KdeConfig::default(),
            velocity_estimator: VelocityEstimatorConfig::default(),
            position_control: PositionControlParams::default(),
            direction_control: DirectionControlParams::default(),
            adaptive: AdaptiveParams::default(),
            switches: ForceSwitches::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.humans == 0 {
            return Err(SimError::InvalidConfig("humans must be at least 1".into()));
        }
        if self.robots == 0 {
            return Err(SimError::InvalidConfig("robots must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig("dt must be positive".into()));
        }
        // The horizon may be zero (initial state only); negative makes no sense.
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidConfig("horizon must be nonnegative".into()));
        }
        if !(self.evac_radius > 0.0) {
            return Err(SimError::InvalidConfig("evacuation radius must be positive".into()));
        }
        if !(self.stop_threshold >= 0.0) {
            return Err(SimError::InvalidConfig("stop threshold must be nonnegative".into()));
        }
        if !(self.human_damping >= 0.0 && self.human_damping.is_finite()) {
            return Err(SimError::InvalidConfig("human damping must be nonnegative".into()));
        }
        self.target.validate()?;
        self.potential.validate()?;
        self.kernel.validate()?;
        self.env.validate()?;
        self.kde.validate()?;
        self.velocity_estimator.validate()?;
        self.position_control.validate()?;
        self.direction_control.validate()?;
        self.adaptive.validate()?;
        Ok(())
    }
}
