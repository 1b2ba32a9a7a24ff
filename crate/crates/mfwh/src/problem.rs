//! Multi-frequency Helmholtz problem definition: frequencies, interior
//! forcings, boundary data, and the composite wave-equation forcings built
//! from them.

use crate::error::{MfwhError, Result};
use crate::grid::{BoundaryCondition, Grid, GridFunction};
use crate::wave::TimePlan;
use std::sync::Arc;

/// Gaussian interior source `a * exp(-b^2 ||x - x0||^2)`.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
}

impl GaussianSpec {
    pub fn eval(&self, x: &[f64; 2]) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        self.amplitude * (-self.width * self.width * (dx * dx + dy * dy)).exp()
    }
}

/// Interior forcing: parameterized Gaussian or an arbitrary tabulated field.
#[derive(Debug, Clone)]
pub enum ForcingSpec {
    Gaussian(GaussianSpec),
    Tabulated(GridFunction),
}

/// One Helmholtz component: frequency, interior forcing, boundary data.
#[derive(Debug, Clone)]
pub struct Component {
    pub omega: f64,
    pub forcing: ForcingSpec,
    /// Boundary data g, read at boundary points; `None` means zero.
    pub boundary: Option<GridFunction>,
}

/// The set of Helmholtz problems solved simultaneously.
#[derive(Debug, Clone)]
pub struct MultiHelmholtzProblem {
    components: Vec<Component>,
    bc: BoundaryCondition,
    wave_speed: f64,
}

impl MultiHelmholtzProblem {
    pub fn new(
        components: Vec<Component>,
        bc: BoundaryCondition,
        wave_speed: f64,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(MfwhError::Problem("need at least one frequency".into()));
        }
        if !(wave_speed > 0.0) {
            return Err(MfwhError::Problem(format!(
                "wave speed must be positive, got {wave_speed}"
            )));
        }
        for (m, c) in components.iter().enumerate() {
            if !(c.omega > 0.0) {
                return Err(MfwhError::Problem(format!(
                    "frequency {} is {}; all frequencies must be positive",
                    m + 1,
                    c.omega
                )));
            }
            if let ForcingSpec::Gaussian(g) = &c.forcing {
                if !(g.width > 0.0) {
                    return Err(MfwhError::Problem(format!(
                        "gaussian width for frequency {} must be positive, got {}",
                        m + 1,
                        g.width
                    )));
                }
            }
        }
        for w in components.windows(2) {
            if !(w[0].omega < w[1].omega) {
                return Err(MfwhError::Problem(format!(
                    "frequencies must be sorted ascending and distinct; got {} before {}",
                    w[0].omega, w[1].omega
                )));
            }
        }
        Ok(Self {
            components,
            bc,
            wave_speed,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.components.len()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.omega).collect()
    }

    pub fn omega(&self, m: usize) -> f64 {
        self.components[m].omega
    }

    pub fn component(&self, m: usize) -> &Component {
        &self.components[m]
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    /// Spatial factor of the m-th source at a point (1-based m).
    pub fn gaussian_source(&self, m: usize, x: &[f64; 2]) -> Result<f64> {
        let c = self
            .components
            .get(m.wrapping_sub(1))
            .ok_or_else(|| MfwhError::Problem(format!("frequency index {m} out of range")))?;
        match &c.forcing {
            ForcingSpec::Gaussian(g) => Ok(g.eval(x)),
            ForcingSpec::Tabulated(_) => Err(MfwhError::Problem(
                "tabulated forcing has no pointwise closed form; evaluate on the grid".into(),
            )),
        }
    }

    /// Tabulate f^(m) on the grid (1-based m).
    pub fn forcing_field(&self, m: usize, grid: &Arc<Grid>) -> Result<GridFunction> {
        let c = self
            .components
            .get(m.wrapping_sub(1))
            .ok_or_else(|| MfwhError::Problem(format!("frequency index {m} out of range")))?;
        match &c.forcing {
            ForcingSpec::Gaussian(g) => Ok(GridFunction::from_fn(grid, |x| g.eval(x))),
            ForcingSpec::Tabulated(t) => {
                if t.grid().as_ref() != grid.as_ref() {
                    return Err(MfwhError::Problem(format!(
                        "tabulated forcing for frequency {m} lives on a different grid"
                    )));
                }
                Ok(t.clone())
            }
        }
    }

    /// Composite wave forcing at a point and time step:
    /// `sum_m f^(m)(x) cos(omega_tilde_m t) (beta_I + 2 alpha_I cos(omega_tilde_m dt))`.
    ///
    /// Requires all forcings to be Gaussian; the solver uses the tabulated
    /// per-component fields instead.
    pub fn composite_wave_forcing(&self, x: &[f64; 2], t: f64, plan: &TimePlan) -> Result<f64> {
        let mut sum = 0.0;
        for (m, c) in self.components.iter().enumerate() {
            let f = match &c.forcing {
                ForcingSpec::Gaussian(g) => g.eval(x),
                ForcingSpec::Tabulated(_) => {
                    return Err(MfwhError::Problem(
                        "composite_wave_forcing on tabulated forcing requires grid evaluation"
                            .into(),
                    ))
                }
            };
            sum += f * plan.forcing_cos(m, t);
        }
        Ok(sum)
    }

    /// Composite boundary forcing `sum_m g^(m)(x_j) cos(omega_tilde_m t)` at
    /// a boundary point given by its grid indices.
    pub fn composite_boundary_forcing(
        &self,
        i: usize,
        j: usize,
        t: f64,
        plan: &TimePlan,
    ) -> f64 {
        let mut sum = 0.0;
        for (m, c) in self.components.iter().enumerate() {
            if let Some(g) = &c.boundary {
                sum += g.get(i as isize, j as isize) * (plan.omega_tilde(m) * t).cos();
            }
        }
        sum
    }

    /// True when every component has zero boundary data.
    pub fn homogeneous_boundary(&self) -> bool {
        self.components.iter().all(|c| c.boundary.is_none())
    }

    /// Tabulate the composite boundary data `G(., t)` on the grid.
    pub fn boundary_field(&self, grid: &Arc<Grid>, t: f64, plan: &TimePlan) -> Option<GridFunction> {
        if self.homogeneous_boundary() {
            return None;
        }
        let mut g = GridFunction::zeros(grid);
        for (m, c) in self.components.iter().enumerate() {
            if let Some(gm) = &c.boundary {
                let ct = (plan.omega_tilde(m) * t).cos();
                g.axpy(ct, gm);
            }
        }
        Some(g)
    }
}

/// Convenience builder for all-Gaussian problems.
pub fn gaussian_problem(
    omegas: &[f64],
    amplitudes: &[f64],
    widths: &[f64],
    centers: &[[f64; 2]],
    bc: BoundaryCondition,
    wave_speed: f64,
) -> Result<MultiHelmholtzProblem> {
    if omegas.len() != amplitudes.len()
        || omegas.len() != widths.len()
        || omegas.len() != centers.len()
    {
        return Err(MfwhError::Problem(
            "frequency, amplitude, width, and center lists must have equal length".into(),
        ));
    }
    let components = omegas
        .iter()
        .zip(amplitudes)
        .zip(widths)
        .zip(centers)
        .map(|(((&omega, &amplitude), &width), &center)| Component {
            omega,
            forcing: ForcingSpec::Gaussian(GaussianSpec {
                amplitude,
                width,
                center,
            }),
            boundary: None,
        })
        .collect();
    MultiHelmholtzProblem::new(components, bc, wave_speed)
}

/// The three-source test set used throughout the experiments.
pub fn three_frequency_problem(bc: BoundaryCondition) -> MultiHelmholtzProblem {
    gaussian_problem(
        &[5.1, 10.1, 15.1],
        &[25.0, 100.0, 225.0],
        &[15.0, 15.0, 15.0],
        &[[0.6, 0.45], [0.4, 0.5], [0.55, 0.5]],
        bc,
        1.0,
    )
    .expect("static parameters are valid")
}

/// The seven-source test set.
pub fn seven_frequency_problem(bc: BoundaryCondition) -> MultiHelmholtzProblem {
    gaussian_problem(
        &[15.0, 21.0, 26.0, 32.0, 41.0, 49.0, 58.0],
        &[400.0; 7],
        &[18.0, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0],
        &[
            [0.6, 0.45],
            [0.4, 0.55],
            [0.55, 0.5],
            [0.5, 0.5],
            [0.44, 0.54],
            [0.53, 0.45],
            [0.44, 0.47],
        ],
        bc,
        1.0,
    )
    .expect("static parameters are valid")
}
