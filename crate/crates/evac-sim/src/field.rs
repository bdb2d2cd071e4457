//! Grid-sampled scalar/vector fields over the domain and the discrete
//! calculus consumed by the controllers.
//!
//! Stencils: second-order central differences at interior nodes, first-order
//! one-sided differences on the boundary. Quadrature: plain node summation
//! weighted by the cell area (the quadrature constant on the unit square is
//! `(nx * hx) * (ny * hy) = (30/29)^2`, close to but not exactly 1; analytic
//! expectations in tests account for it).

use crate::domain::Domain;
use crate::error::{Result, SimError};
use crate::forces::{potential_gradient, InteractionPotentialParams};
use crate::geom::Vec2;

/// A scalar function sampled at the grid nodes, stored row-major
/// (`values[iy * nx + ix]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Domain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &Domain) -> Self {
        Self { domain: *domain, values: vec![0.0; domain.node_count()] }
    }

    pub fn from_fn(domain: &Domain, mut f: impl FnMut(Vec2) -> f64) -> Self {
        let mut values = Vec::with_capacity(domain.node_count());
        for iy in 0..domain.ny() {
            for ix in 0..domain.nx() {
                values.push(f(domain.node_position(ix, iy)));
            }
        }
        Self { domain: *domain, values }
    }

    pub fn from_values(domain: &Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(SimError::GridMismatch(format!(
                "expected {} node values, got {}",
                domain.node_count(),
                values.len()
            )));
        }
        Ok(Self { domain: *domain, values })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.domain.nx() + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.values[iy * self.domain.nx() + ix] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            domain: self.domain,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_grid(&self.domain, &other.domain)?;
        Ok(Self {
            domain: self.domain,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Gradient with the central/one-sided stencil policy.
    pub fn gradient(&self) -> VectorField {
        let (nx, ny) = (self.domain.nx(), self.domain.ny());
        let h = self.domain.spacing();
        let mut gx = vec![0.0; nx * ny];
        let mut gy = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let k = iy * nx + ix;
                gx[k] = if ix == 0 {
                    (self.get(1, iy) - self.get(0, iy)) / h.x
                } else if ix == nx - 1 {
                    (self.get(nx - 1, iy) - self.get(nx - 2, iy)) / h.x
                } else {
                    (self.get(ix + 1, iy) - self.get(ix - 1, iy)) / (2.0 * h.x)
                };
                gy[k] = if iy == 0 {
                    (self.get(ix, 1) - self.get(ix, 0)) / h.y
                } else if iy == ny - 1 {
                    (self.get(ix, ny - 1) - self.get(ix, ny - 2)) / h.y
                } else {
                    (self.get(ix, iy + 1) - self.get(ix, iy - 1)) / (2.0 * h.y)
                };
            }
        }
        VectorField { domain: self.domain, x: gx, y: gy }
    }

    /// Grid quadrature of the field over the domain.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_area()
    }

    /// Discrete L2 norm: `sqrt(sum(v^2) * cell_area)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.domain.cell_area()).sqrt()
    }

    /// Bilinear interpolation from the four surrounding nodes; points outside
    /// the domain are clamped to the boundary first.
    pub fn sample(&self, p: Vec2) -> f64 {
        let (ix, iy, fx, fy) = bilinear_cell(&self.domain, p);
        let nx = self.domain.nx();
        let k = iy * nx + ix;
        let v00 = self.values[k];
        let v10 = self.values[k + 1];
        let v01 = self.values[k + nx];
        let v11 = self.values[k + nx + 1];
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// Backward time difference `(curr - prev) / dt`; the first iteration has
    /// no previous field and yields the zero field.
    pub fn time_derivative(prev: Option<&Self>, curr: &Self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(SimError::InvalidConfig("time derivative requires dt > 0".into()));
        }
        match prev {
            None => Ok(Self::zeros(&curr.domain)),
            Some(p) => {
                check_same_grid(&p.domain, &curr.domain)?;
                Ok(Self {
                    domain: curr.domain,
                    values: curr
                        .values
                        .iter()
                        .zip(&p.values)
                        .map(|(c, q)| (c - q) / dt)
                        .collect(),
                })
            }
        }
    }
}

/// A vector-valued function on the same grid layout as [`ScalarField`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    domain: Domain,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(domain: &Domain) -> Self {
        let n = domain.node_count();
        Self { domain: *domain, x: vec![0.0; n], y: vec![0.0; n] }
    }

    pub fn from_fn(domain: &Domain, mut f: impl FnMut(Vec2) -> Vec2) -> Self {
        let n = domain.node_count();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for iy in 0..domain.ny() {
            for ix in 0..domain.nx() {
                let v = f(domain.node_position(ix, iy));
                x.push(v.x);
                y.push(v.y);
            }
        }
        Self { domain: *domain, x, y }
    }

    pub fn from_components(domain: &Domain, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != domain.node_count() || y.len() != domain.node_count() {
            return Err(SimError::GridMismatch(format!(
                "expected {} node values per component, got {} and {}",
                domain.node_count(),
                x.len(),
                y.len()
            )));
        }
        Ok(Self { domain: *domain, x, y })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    pub fn get(&self, ix: usize, iy: usize) -> Vec2 {
        let k = iy * self.domain.nx() + ix;
        Vec2::new(self.x[k], self.y[k])
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: Vec2) {
        let k = iy * self.domain.nx() + ix;
        self.x[k] = v.x;
        self.y[k] = v.y;
    }

    pub fn get_flat(&self, k: usize) -> Vec2 {
        Vec2::new(self.x[k], self.y[k])
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            domain: self.domain,
            x: self.x.iter().map(|v| v * s).collect(),
            y: self.y.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_grid(&self.domain, &other.domain)?;
        Ok(Self {
            domain: self.domain,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a - b).collect(),
        })
    }

    /// Divergence with the same stencil policy as the gradient.
    pub fn divergence(&self) -> ScalarField {
        let (nx, ny) = (self.domain.nx(), self.domain.ny());
        let h = self.domain.spacing();
        let mut values = vec![0.0; nx * ny];
        let at_x = |ix: usize, iy: usize| self.x[iy * nx + ix];
        let at_y = |ix: usize, iy: usize| self.y[iy * nx + ix];
        for iy in 0..ny {
            for ix in 0..nx {
                let dx = if ix == 0 {
                    (at_x(1, iy) - at_x(0, iy)) / h.x
                } else if ix == nx - 1 {
                    (at_x(nx - 1, iy) - at_x(nx - 2, iy)) / h.x
                } else {
                    (at_x(ix + 1, iy) - at_x(ix - 1, iy)) / (2.0 * h.x)
                };
                let dy = if iy == 0 {
                    (at_y(ix, 1) - at_y(ix, 0)) / h.y
                } else if iy == ny - 1 {
                    (at_y(ix, ny - 1) - at_y(ix, ny - 2)) / h.y
                } else {
                    (at_y(ix, iy + 1) - at_y(ix, iy - 1)) / (2.0 * h.y)
                };
                values[iy * nx + ix] = dx + dy;
            }
        }
        ScalarField { domain: self.domain, values }
    }

    /// Convective derivative `(u . grad) u`, component-wise with the gradient
    /// stencil applied to each component.
    pub fn advection(&self) -> VectorField {
        let ux = ScalarField { domain: self.domain, values: self.x.clone() };
        let uy = ScalarField { domain: self.domain, values: self.y.clone() };
        let gx = ux.gradient();
        let gy = uy.gradient();
        let n = self.domain.node_count();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        for k in 0..n {
            ax[k] = self.x[k] * gx.x[k] + self.y[k] * gx.y[k];
            ay[k] = self.x[k] * gy.x[k] + self.y[k] * gy.y[k];
        }
        VectorField { domain: self.domain, x: ax, y: ay }
    }

    /// L2 norm over both components.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self
            .x
            .iter()
            .map(|v| v * v)
            .chain(self.y.iter().map(|v| v * v))
            .sum();
        (sum * self.domain.cell_area()).sqrt()
    }

    pub fn sample(&self, p: Vec2) -> Vec2 {
        let (ix, iy, fx, fy) = bilinear_cell(&self.domain, p);
        let nx = self.domain.nx();
        let k = iy * nx + ix;
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        Vec2::new(
            self.x[k] * w00 + self.x[k + 1] * w10 + self.x[k + nx] * w01 + self.x[k + nx + 1] * w11,
            self.y[k] * w00 + self.y[k + 1] * w10 + self.y[k + nx] * w01 + self.y[k + nx + 1] * w11,
        )
    }

    pub fn time_derivative(prev: Option<&Self>, curr: &Self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(SimError::InvalidConfig("time derivative requires dt > 0".into()));
        }
        match prev {
            None => Ok(Self::zeros(&curr.domain)),
            Some(p) => {
                check_same_grid(&p.domain, &curr.domain)?;
                Ok(Self {
                    domain: curr.domain,
                    x: curr.x.iter().zip(&p.x).map(|(c, q)| (c - q) / dt).collect(),
                    y: curr.y.iter().zip(&p.y).map(|(c, q)| (c - q) / dt).collect(),
                })
            }
        }
    }
}

pub fn check_same_grid(a: &Domain, b: &Domain) -> Result<()> {
    if a != b {
        return Err(SimError::GridMismatch(
            "fields live on different domains or grid resolutions".into(),
        ));
    }
    Ok(())
}

/// Locate the cell containing `p` (after clamping to the domain) and the
/// fractional offsets within it. Returns (ix, iy, fx, fy) with ix < nx-1.
fn bilinear_cell(domain: &Domain, p: Vec2) -> (usize, usize, f64, f64) {
    let p = domain.clamp(p);
    let h = domain.spacing();
    let rel = p - domain.lower();
    let mut ix = (rel.x / h.x).floor() as usize;
    let mut iy = (rel.y / h.y).floor() as usize;
    ix = ix.min(domain.nx() - 2);
    iy = iy.min(domain.ny() - 2);
    let fx = (rel.x / h.x - ix as f64).clamp(0.0, 1.0);
    let fy = (rel.y / h.y - iy as f64).clamp(0.0, 1.0);
    (ix, iy, fx, fy)
}

/// Interaction convolution `(grad U * rho)(x)`: direct quadrature of the
/// analytic pair-potential gradient against the density over the full grid.
///
/// On the regular grid the offset between two nodes depends only on their
/// index difference, so the gradient is tabulated once per call over all
/// `(2nx-1) x (2ny-1)` offsets and the double loop reduces to table lookups.
pub fn interaction_convolution(
    density: &ScalarField,
    params: &InteractionPotentialParams,
) -> VectorField {
    let domain = *density.domain();
    let (nx, ny) = (domain.nx(), domain.ny());
    let h = domain.spacing();
    let area = domain.cell_area();

    // Offset table indexed by (di + nx - 1, dj + ny - 1).
    let tw = 2 * nx - 1;
    let th = 2 * ny - 1;
    let mut table = vec![Vec2::default(); tw * th];
    for dj in 0..th {
        for di in 0..tw {
            let offset = Vec2::new(
                (di as i64 - (nx as i64 - 1)) as f64 * h.x,
                (dj as i64 - (ny as i64 - 1)) as f64 * h.y,
            );
            table[dj * tw + di] = potential_gradient(offset, params);
        }
    }

    let mut out = VectorField::zeros(&domain);
    let rho = density.values();
    for iy in 0..ny {
        for ix in 0..nx {
            let mut acc = Vec2::default();
            for jy in 0..ny {
                let dj = iy + (ny - 1) - jy;
                let row = dj * tw + ix + (nx - 1);
                let rho_row = &rho[jy * nx..(jy + 1) * nx];
                for (jx, r) in rho_row.iter().enumerate() {
                    if *r != 0.0 {
                        let g = table[row - jx];
                        acc.x += g.x * r;
                        acc.y += g.y * r;
                    }
                }
            }
            out.set(ix, iy, acc * area);
        }
    }
    out
}

/// Assemble the weight-space vector `integral(phi * v) dx` used by the
/// adaptive update law: entry k integrates feature k against the first
/// component, entry m+k against the second.
pub fn integrate_vector_weighted(features: &[Vec<f64>], v: &VectorField) -> Result<Vec<f64>> {
    let n = v.domain().node_count();
    let m = features.len();
    for (k, f) in features.iter().enumerate() {
        if f.len() != n {
            return Err(SimError::GridMismatch(format!(
                "feature {k} has {} samples, expected {n}",
                f.len()
            )));
        }
    }
    let area = v.domain().cell_area();
    let mut out = vec![0.0; 2 * m];
    for (k, f) in features.iter().enumerate() {
        let mut sx = 0.0;
        let mut sy = 0.0;
        for (i, phi) in f.iter().enumerate() {
            sx += phi * v.x_values()[i];
            sy += phi * v.y_values()[i];
        }
        out[k] = sx * area;
        out[m + k] = sy * area;
    }
    Ok(out)
}
