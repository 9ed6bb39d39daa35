//! Broadband plane-wave excitation.
//!
//! Two injection schemes are provided:
//!
//! - [`Tfsf`]: a total-field/scattered-field box. The incident wave is
//!   evaluated analytically (vacuum background) on the two sample rows that
//!   straddle each box face, and the curl stencils crossing the face are
//!   corrected so the box holds total fields and the outside holds only
//!   scattered fields.
//! - [`PlaneInjection`]: a soft current sheet across a periodic cell, used with
//!   an empty-cell reference run for normalization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{omega_from_nm, C0, ETA0, MU0};
use crate::fdtd::YeeFields;
use crate::geometry::Scene;
use crate::grid::{Axis, Component, GridSpec};
use crate::materials::MaterialMap;
use crate::{Error, Result};

/// Relative spectral amplitude placed at the farther band edge.
pub const BAND_EDGE_AMPLITUDE: f64 = 0.25;

/// Half-width of the emitted window in units of tau; also the default delay.
pub const ENVELOPE_HALF_WIDTH: f64 = 5.0;

/// Gaussian-enveloped cosine `A exp(-(t-t0)^2 / 2 tau^2) cos(w0 (t - t0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub lambda0_nm: f64,
    pub tau: f64,
    pub t0: f64,
    pub amplitude: f64,
}

impl PulseSpec {
    /// Pulse centred on `lambda0_nm` whose spectrum is still
    /// [`BAND_EDGE_AMPLITUDE`] of its peak at the farther edge of `band_nm`.
    pub fn for_band(lambda0_nm: f64, band_nm: [f64; 2], amplitude: f64) -> Result<Self> {
        if !(band_nm[0] > 0.0 && band_nm[1] > band_nm[0]) {
            return Err(Error::Configuration(format!("invalid band {band_nm:?}")));
        }
        if !(lambda0_nm > 0.0) {
            return Err(Error::Configuration(format!("invalid centre wavelength {lambda0_nm}")));
        }
        let w0 = omega_from_nm(lambda0_nm);
        let spread = (omega_from_nm(band_nm[0]) - w0)
            .abs()
            .max((w0 - omega_from_nm(band_nm[1])).abs());
        let tau = (-2.0 * BAND_EDGE_AMPLITUDE.ln()).sqrt() / spread;
        Self::new(lambda0_nm, tau, amplitude)
    }

    pub fn new(lambda0_nm: f64, tau: f64, amplitude: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Configuration(format!("pulse width {tau} must be positive")));
        }
        Ok(Self {
            lambda0_nm,
            tau,
            t0: ENVELOPE_HALF_WIDTH * tau,
            amplitude,
        })
    }

    pub fn omega0(&self) -> f64 {
        omega_from_nm(self.lambda0_nm)
    }

    pub fn value(&self, t: f64) -> f64 {
        pulse_value(t, self)
    }

    /// Fourier transform `integral f(t) exp(+i w t) dt`.
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        let w0 = self.omega0();
        let tau = self.tau;
        let mag = self.amplitude * tau * (2.0 * std::f64::consts::PI).sqrt() / 2.0
            * ((-0.5 * tau * tau * (omega - w0).powi(2)).exp() + (-0.5 * tau * tau * (omega + w0).powi(2)).exp());
        Complex64::from_polar(mag, omega * self.t0)
    }

    /// Spectral magnitude relative to its peak.
    pub fn relative_spectrum(&self, omega: f64) -> f64 {
        self.spectrum(omega).norm() / self.spectrum(self.omega0()).norm()
    }

    /// End of the emitted window; the envelope is `exp(-12.5)` of its peak there.
    pub fn duration(&self) -> f64 {
        self.t0 + ENVELOPE_HALF_WIDTH * self.tau
    }
}

/// Zero outside `t0 +- ENVELOPE_HALF_WIDTH tau`, so a later `t0` is an exact delay.
pub fn pulse_value(t: f64, p: &PulseSpec) -> f64 {
    let s = t - p.t0;
    if s.abs() > ENVELOPE_HALF_WIDTH * p.tau {
        return 0.0;
    }
    p.amplitude * (-(s * s) / (2.0 * p.tau * p.tau)).exp() * (p.omega0() * s).cos()
}

/// Polarization relative to the upper strip (which runs along x) at normal
/// incidence: `S` puts E along the strip, `P` puts H along it (E along y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    S,
    P,
}

impl Polarization {
    pub fn e_axis(self) -> Axis {
        match self {
            Polarization::S => Axis::X,
            Polarization::P => Axis::Y,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::S => "s",
            Polarization::P => "p",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" | "S" => Ok(Polarization::S),
            "p" | "P" => Ok(Polarization::P),
            other => Err(Error::Configuration(format!("polarization must be s or p, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Direction {
    pub axis: Axis,
    pub positive: bool,
}

impl Direction {
    pub fn unit(&self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.axis.index()] = if self.positive { 1.0 } else { -1.0 };
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSource {
    pub direction: Direction,
    pub e_axis: Axis,
}

impl PlaneWaveSource {
    pub fn new(direction: Direction, e_axis: Axis) -> Result<Self> {
        if direction.axis == e_axis {
            return Err(Error::Configuration(format!(
                "polarization {e_axis:?} is parallel to the propagation direction"
            )));
        }
        Ok(Self { direction, e_axis })
    }

    pub fn e_unit(&self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.e_axis.index()] = 1.0;
        v
    }

    /// `k x e`, the H direction (scaled by 1/eta0 in the field).
    pub fn h_unit(&self) -> [f64; 3] {
        let k = self.direction.unit();
        let e = self.e_unit();
        [
            k[1] * e[2] - k[2] * e[1],
            k[2] * e[0] - k[0] * e[2],
            k[0] * e[1] - k[1] * e[0],
        ]
    }
}

pub enum Source {
    Tfsf(Tfsf),
    Plane(PlaneInjection),
}

impl Source {
    pub fn amplitude(&self) -> f64 {
        match self {
            Source::Tfsf(t) => t.pulse.amplitude,
            Source::Plane(p) => p.pulse.amplitude,
        }
    }

    pub fn correct_h(&self, fields: &mut YeeFields, grid: &GridSpec, t_e: f64) {
        if let Source::Tfsf(t) = self {
            t.correct_h(fields, grid, t_e);
        }
    }

    pub fn correct_e(&self, fields: &mut YeeFields, grid: &GridSpec, t_h: f64) {
        match self {
            Source::Tfsf(t) => t.correct_e(fields, grid, t_h),
            Source::Plane(p) => p.inject(fields, grid, t_h),
        }
    }

    /// Time after which the source no longer adds energy.
    pub fn active_until(&self) -> f64 {
        match self {
            Source::Tfsf(t) => t.active_until(),
            Source::Plane(p) => p.pulse.duration(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Correction {
    component: u8,
    flat: usize,
    coef: f64,
    /// Position along the propagation axis in half cells.
    half_pos: u32,
}

/// Total-field/scattered-field box with an analytic incident plane wave.
#[derive(Debug, Clone)]
pub struct Tfsf {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
    pub wave: PlaneWaveSource,
    pub pulse: PulseSpec,
    /// Corrections to E (incident H needed), applied after the E half-step.
    e_corr: Vec<Correction>,
    /// Corrections to H (incident E needed), applied after the H half-step.
    h_corr: Vec<Correction>,
    half_range: (u32, u32),
    /// Propagation coordinate of the entry face, metres.
    s_ref: f64,
    box_length: f64,
}

impl Tfsf {
    /// Box spanning nodes `lo..=hi` (inclusive) on every axis.
    pub fn new(
        grid: &GridSpec,
        materials: &MaterialMap,
        lo: [usize; 3],
        hi: [usize; 3],
        wave: PlaneWaveSource,
        pulse: PulseSpec,
    ) -> Result<Self> {
        let dims = grid.dims();
        for a in 0..3 {
            if !(lo[a] >= 1 && hi[a] > lo[a] && hi[a] + 1 < dims[a]) {
                return Err(Error::Configuration(format!(
                    "TFSF box {lo:?}..{hi:?} must lie strictly inside the {dims:?} grid"
                )));
            }
        }
        let dt = courant_dt_of(grid);
        let ch = dt / MU0;
        let d = grid.spacing();
        let e_inc = wave.e_unit();
        let h_inc = wave.h_unit().map(|v| v / ETA0);
        let inside = |comp: Component, p: [isize; 3]| -> bool {
            let off = comp.half_offsets();
            (0..3).all(|a| {
                let hp = 2 * p[a] + off[a] as isize;
                hp >= 2 * lo[a] as isize && hp <= 2 * hi[a] as isize
            })
        };
        let prop = wave.direction.axis.index();
        let mut e_corr = Vec::new();
        let mut h_corr = Vec::new();
        let in_grid = |p: [isize; 3]| (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < dims[a]);
        for target in Component::ALL {
            let t_dir = target.direction();
            let d1 = (t_dir + 1) % 3;
            let d2 = (t_dir + 2) % 3;
            // Stencil terms (source component, offset, weight) of the target update.
            let terms: [(Component, [isize; 3], f64); 4] = if target.is_electric() {
                let e1 = unit_offset(d1, -1);
                let e2 = unit_offset(d2, -1);
                [
                    (Component::magnetic(d2), [0; 3], 1.0 / d[d1]),
                    (Component::magnetic(d2), e1, -1.0 / d[d1]),
                    (Component::magnetic(d1), [0; 3], -1.0 / d[d2]),
                    (Component::magnetic(d1), e2, 1.0 / d[d2]),
                ]
            } else {
                let e1 = unit_offset(d1, 1);
                let e2 = unit_offset(d2, 1);
                [
                    (Component::electric(d2), e1, -ch / d[d1]),
                    (Component::electric(d2), [0; 3], ch / d[d1]),
                    (Component::electric(d1), e2, ch / d[d2]),
                    (Component::electric(d1), [0; 3], -ch / d[d2]),
                ]
            };
            for i in lo[0].saturating_sub(1)..=(hi[0] + 1).min(dims[0] - 1) {
                for j in lo[1].saturating_sub(1)..=(hi[1] + 1).min(dims[1] - 1) {
                    for k in lo[2].saturating_sub(1)..=(hi[2] + 1).min(dims[2] - 1) {
                        let p = [i as isize, j as isize, k as isize];
                        let t_in = inside(target, p);
                        let flat = grid.index(i, j, k);
                        for (src, off, w) in terms {
                            let q = [p[0] + off[0], p[1] + off[1], p[2] + off[2]];
                            if !in_grid(q) || inside(src, q) == t_in {
                                continue;
                            }
                            let amp = if src.is_electric() {
                                e_inc[src.direction()]
                            } else {
                                h_inc[src.direction()]
                            };
                            if amp == 0.0 {
                                continue;
                            }
                            let sign = if t_in { 1.0 } else { -1.0 };
                            let scale = if target.is_electric() {
                                materials.coefficients_at(t_dir, flat).cb
                            } else {
                                1.0
                            };
                            let half_pos = (2 * q[prop] + src.half_offsets()[prop] as isize) as u32;
                            let corr = Correction {
                                component: t_dir as u8,
                                flat,
                                coef: sign * scale * w * amp,
                                half_pos,
                            };
                            if target.is_electric() {
                                e_corr.push(corr);
                            } else {
                                h_corr.push(corr);
                            }
                        }
                    }
                }
            }
        }
        let all = e_corr.iter().chain(h_corr.iter()).map(|c| c.half_pos);
        let half_range = all.fold((u32::MAX, 0), |(a, b), h| (a.min(h), b.max(h)));
        let entry = if wave.direction.positive { lo[prop] } else { hi[prop] };
        let entry_x = grid.origin[prop] + entry as f64 * d[prop];
        let sign = if wave.direction.positive { 1.0 } else { -1.0 };
        Ok(Self {
            lo,
            hi,
            wave,
            pulse,
            e_corr,
            h_corr,
            half_range,
            s_ref: sign * entry_x,
            box_length: (hi[prop] - lo[prop]) as f64 * d[prop],
        })
    }

    /// Error unless every box of the scene lies strictly inside the TFSF box.
    pub fn check_scene(&self, grid: &GridSpec, scene: &Scene) -> Result<()> {
        let d = grid.spacing();
        for b in &scene.boxes {
            for a in 0..3 {
                let lo = grid.origin[a] + self.lo[a] as f64 * d[a];
                let hi = grid.origin[a] + self.hi[a] as f64 * d[a];
                if b.min[a] <= lo || b.max[a] >= hi {
                    return Err(Error::Configuration(format!(
                        "scene box {:?}..{:?} protrudes through the TFSF box",
                        b.min, b.max
                    )));
                }
            }
        }
        Ok(())
    }

    /// Incident scalar waveform at a physical coordinate along the propagation axis.
    pub fn incident(&self, x: f64, t: f64) -> f64 {
        let sign = if self.wave.direction.positive { 1.0 } else { -1.0 };
        self.pulse.value(t - (sign * x - self.s_ref) / C0)
    }

    /// Incident field vector (E, H) at a physical point and time.
    pub fn incident_fields(&self, point: [f64; 3], t: f64) -> ([f64; 3], [f64; 3]) {
        let g = self.incident(point[self.wave.direction.axis.index()], t);
        (self.wave.e_unit().map(|v| v * g), self.wave.h_unit().map(|v| v * g / ETA0))
    }

    pub fn active_until(&self) -> f64 {
        self.pulse.duration() + self.box_length / C0
    }

    fn table(&self, grid: &GridSpec, t: f64) -> Vec<f64> {
        let prop = self.wave.direction.axis.index();
        let (lo, hi) = self.half_range;
        if lo > hi {
            return Vec::new();
        }
        (lo..=hi)
            .map(|hp| {
                let x = grid.origin[prop] + 0.5 * hp as f64 * grid.spacing()[prop];
                self.incident(x, t)
            })
            .collect()
    }

    fn apply(&self, target: &mut [Vec<f64>; 3], corr: &[Correction], table: &[f64]) {
        let base = self.half_range.0;
        for c in corr {
            target[c.component as usize][c.flat] += c.coef * table[(c.half_pos - base) as usize];
        }
    }

    pub fn correct_h(&self, fields: &mut YeeFields, grid: &GridSpec, t_e: f64) {
        let table = self.table(grid, t_e);
        self.apply(&mut fields.h, &self.h_corr, &table);
    }

    pub fn correct_e(&self, fields: &mut YeeFields, grid: &GridSpec, t_h: f64) {
        let table = self.table(grid, t_h);
        self.apply(&mut fields.e, &self.e_corr, &table);
    }

    /// Whether node-aligned sample position `p` of `comp` is in the total-field region.
    pub fn contains(&self, comp: Component, p: [usize; 3]) -> bool {
        let off = comp.half_offsets();
        (0..3).all(|a| {
            let hp = 2 * p[a] + off[a] as usize;
            hp >= 2 * self.lo[a] && hp <= 2 * self.hi[a]
        })
    }
}

fn unit_offset(axis: usize, s: isize) -> [isize; 3] {
    let mut o = [0; 3];
    o[axis] = s;
    o
}

fn courant_dt_of(grid: &GridSpec) -> f64 {
    crate::grid::courant_dt(grid).expect("validated grid")
}

/// Soft current sheet on a z-plane of a transversely periodic cell.
///
/// The sheet drives one tangential E component so that each of the two
/// radiated half-waves carries roughly the pulse amplitude.
#[derive(Debug, Clone)]
pub struct PlaneInjection {
    pub k_plane: usize,
    pub polarization: Polarization,
    pub pulse: PulseSpec,
    factor: f64,
}

impl PlaneInjection {
    /// `interior` is the CPML-free index range along z.
    pub fn new(grid: &GridSpec, k_plane: usize, interior_z: (usize, usize), polarization: Polarization, pulse: PulseSpec) -> Result<Self> {
        if k_plane < interior_z.0 || k_plane >= interior_z.1 {
            return Err(Error::Configuration(format!(
                "injection plane k = {k_plane} lies inside the CPML (interior {interior_z:?})"
            )));
        }
        let dt = courant_dt_of(grid);
        Ok(Self {
            k_plane,
            polarization,
            pulse,
            factor: 2.0 * C0 * dt / grid.dz,
        })
    }

    pub fn driven_component(&self) -> Component {
        Component::electric(self.polarization.e_axis().index())
    }

    pub fn inject(&self, fields: &mut YeeFields, grid: &GridSpec, t_h: f64) {
        let c = self.polarization.e_axis().index();
        let v = self.factor * self.pulse.value(t_h);
        let [nx, ny, _] = grid.dims();
        for i in 0..nx {
            for j in 0..ny {
                fields.e[c][grid.index(i, j, self.k_plane)] += v;
            }
        }
    }
}
