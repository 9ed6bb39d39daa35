//! Drude dispersive metals.
//!
//! The polarization current obeys `dJ/dt + gamma J = eps0 wp^2 E` and is
//! advanced with the time-centred (averaged) discretization
//!
//! ```text
//! J^{n+1/2} = alpha J^{n-1/2} + beta E^n
//! alpha = (2 - gamma dt) / (2 + gamma dt)
//! beta  = 2 eps0 wp^2 dt / (2 + gamma dt)
//! ```
//!
//! after which the E update subtracts `Cb * J^{n+1/2}` from the curl term.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::grid::GridSpec;
use crate::{Error, Result};

/// Material index of empty space in a [`MaterialMap`].
pub const VACUUM: u8 = 0;
/// Material index of silver in the scenario scenes.
pub const SILVER: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeParams {
    pub eps_inf: f64,
    /// Plasma frequency, rad/s.
    pub omega_p: f64,
    /// Collision rate, rad/s.
    pub gamma: f64,
}

impl DrudeParams {
    /// Literature Drude fit for silver near 700 nm.
    pub const SILVER: DrudeParams = DrudeParams {
        eps_inf: 1.0,
        omega_p: 1.37e16,
        gamma: 2.73e13,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inf >= 1.0) {
            return Err(Error::Configuration(format!("eps_inf = {} must be >= 1", self.eps_inf)));
        }
        if !(self.omega_p >= 0.0) || !self.omega_p.is_finite() {
            return Err(Error::Configuration(format!("omega_p = {} must be >= 0", self.omega_p)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Configuration(format!("gamma = {} must be >= 0", self.gamma)));
        }
        Ok(())
    }
}

impl Default for DrudeParams {
    fn default() -> Self {
        Self::SILVER
    }
}

/// Closed-form Drude permittivity `eps_inf - wp^2 / (w^2 + i gamma w)`
/// (time dependence `exp(-i w t)`, so `Im eps >= 0` for a lossy metal).
pub fn drude_permittivity(omega: f64, p: &DrudeParams) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("angular frequency {omega} must be positive")));
    }
    let denom = Complex64::new(omega * omega, p.gamma * omega);
    Ok(Complex64::new(p.eps_inf, 0.0) - p.omega_p * p.omega_p / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Material {
    Vacuum,
    Drude(DrudeParams),
}

/// Per-material E-update and current-update coefficients.
///
/// `ca` is always 1 for the media supported here; it is kept so the table
/// reads like the usual `E <- Ca E + Cb (curl H - J)` form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCoefficients {
    pub ca: f64,
    pub cb: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dispersive: bool,
}

/// Coefficient table indexed by material id.
pub fn build_update_coefficients(materials: &[Material], dt: f64) -> Result<Vec<UpdateCoefficients>> {
    materials
        .iter()
        .map(|m| match *m {
            Material::Vacuum => Ok(UpdateCoefficients {
                ca: 1.0,
                cb: dt / EPS0,
                alpha: 0.0,
                beta: 0.0,
                dispersive: false,
            }),
            Material::Drude(p) => {
                p.validate()?;
                let gdt = p.gamma * dt;
                if gdt >= 2.0 {
                    return Err(Error::UnstableParameters(format!(
                        "gamma * dt = {gdt} must be below 2"
                    )));
                }
                Ok(UpdateCoefficients {
                    ca: 1.0,
                    cb: dt / (EPS0 * p.eps_inf),
                    alpha: (2.0 - gdt) / (2.0 + gdt),
                    beta: 2.0 * EPS0 * p.omega_p * p.omega_p * dt / (2.0 + gdt),
                    dispersive: true,
                })
            }
        })
        .collect()
}

/// Material id per E sample plus the coefficient table.
///
/// Index `0` is the background and is applied to every sample by the bulk
/// update; all other samples are listed in `special` per component so the
/// solver can correct them without touching the whole grid.
#[derive(Debug, Clone)]
pub struct MaterialMap {
    pub dims: [usize; 3],
    pub index: [Vec<u8>; 3],
    pub materials: Vec<Material>,
    pub coefficients: Vec<UpdateCoefficients>,
    special: [Vec<usize>; 3],
}

impl MaterialMap {
    pub fn new(grid: &GridSpec, index: [Vec<u8>; 3], materials: Vec<Material>, dt: f64) -> Result<Self> {
        let n = grid.len();
        for (c, idx) in index.iter().enumerate() {
            if idx.len() != n {
                return Err(Error::Configuration(format!(
                    "material index for component {c} has {} samples, grid has {n}",
                    idx.len()
                )));
            }
            if let Some(&bad) = idx.iter().find(|&&m| m as usize >= materials.len()) {
                return Err(Error::Configuration(format!("material id {bad} has no table entry")));
            }
        }
        if materials.first() != Some(&Material::Vacuum) {
            return Err(Error::Configuration("material 0 must be vacuum".into()));
        }
        let coefficients = build_update_coefficients(&materials, dt)?;
        let special = std::array::from_fn(|c| {
            index[c]
                .iter()
                .enumerate()
                .filter(|(_, &m)| m != VACUUM)
                .map(|(i, _)| i)
                .collect()
        });
        Ok(Self {
            dims: grid.dims(),
            index,
            materials,
            coefficients,
            special,
        })
    }

    pub fn vacuum(grid: &GridSpec, dt: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(
            grid,
            [vec![VACUUM; n], vec![VACUUM; n], vec![VACUUM; n]],
            vec![Material::Vacuum],
            dt,
        )
    }

    /// Flat indices of non-background samples of E component `c`.
    pub fn special_samples(&self, c: usize) -> &[usize] {
        &self.special[c]
    }

    pub fn coefficients_at(&self, c: usize, flat: usize) -> &UpdateCoefficients {
        &self.coefficients[self.index[c][flat] as usize]
    }

    pub fn background(&self) -> &UpdateCoefficients {
        &self.coefficients[0]
    }

    pub fn count(&self, c: usize, material: u8) -> usize {
        self.index[c].iter().filter(|&&m| m == material).count()
    }
}

/// Advance the Drude currents on every dispersive sample: `J <- alpha J + beta E`.
pub fn step_currents(e: &[Vec<f64>; 3], j: &mut [Vec<f64>; 3], materials: &MaterialMap) {
    for c in 0..3 {
        let jc = &mut j[c];
        let ec = &e[c];
        for &n in materials.special_samples(c) {
            let coef = materials.coefficients_at(c, n);
            if coef.dispersive {
                jc[n] = coef.alpha * jc[n] + coef.beta * ec[n];
            }
        }
    }
}
