//! On-the-fly DFT monitors.
//!
//! Every monitor keeps `acc(w) = sum_n f(t_n) exp(i w t_n) dt` for each listed
//! frequency, with `t_n` the time of the sampled component (E samples are at
//! integer steps, H samples half a step earlier). Accumulators are stored as
//! separate real/imaginary arrays in `[point][frequency]` order.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{Spectrum, SpectrumKind};
use crate::constants::omega_from_nm;
use crate::fdtd::YeeFields;
use crate::grid::{Component, GridSpec};
use crate::sources::PulseSpec;
use crate::{Error, Result};

/// Minimum relative pulse amplitude allowed at a listed frequency.
pub const MIN_BAND_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyList {
    wavelengths_nm: Vec<f64>,
    omegas: Vec<f64>,
}

impl FrequencyList {
    /// `n` wavelengths uniformly spaced over `[lo, hi]` nm.
    pub fn uniform(lo_nm: f64, hi_nm: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi_nm > lo_nm) {
            return Err(Error::Configuration(format!(
                "frequency list needs n >= 2 and hi > lo, got {n} points over [{lo_nm}, {hi_nm}]"
            )));
        }
        let step = (hi_nm - lo_nm) / (n - 1) as f64;
        Self::from_wavelengths((0..n).map(|i| lo_nm + step * i as f64).collect())
    }

    pub fn from_wavelengths(wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::Configuration("empty frequency list".into()));
        }
        if wavelengths_nm.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Configuration("wavelengths must be positive".into()));
        }
        if wavelengths_nm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration("wavelengths must be strictly increasing".into()));
        }
        let omegas = wavelengths_nm.iter().map(|&w| omega_from_nm(w)).collect();
        Ok(Self { wavelengths_nm, omegas })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Error if the pulse is weaker than [`MIN_BAND_AMPLITUDE`] of its peak
    /// anywhere on the list.
    pub fn check_band(&self, pulse: &PulseSpec) -> Result<()> {
        for (&w, &om) in self.wavelengths_nm.iter().zip(&self.omegas) {
            let rel = pulse.relative_spectrum(om);
            if rel < MIN_BAND_AMPLITUDE {
                return Err(Error::Configuration(format!(
                    "pulse amplitude at {w} nm is {rel:.3} of peak, below {MIN_BAND_AMPLITUDE}"
                )));
            }
        }
        Ok(())
    }
}

/// `exp(i w t) dt` for every listed frequency at one instant.
#[derive(Debug, Clone)]
pub struct Phasors {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Phasors {
    pub fn at(freqs: &FrequencyList, t: f64, dt: f64) -> Self {
        let (re, im) = freqs
            .omegas()
            .iter()
            .map(|&w| {
                let (s, c) = (w * t).sin_cos();
                (c * dt, s * dt)
            })
            .unzip();
        Self { re, im }
    }
}

/// Complex accumulators for a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    nfreq: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Accumulator {
    pub fn new(points: usize, nfreq: usize) -> Self {
        Self {
            nfreq,
            re: vec![0.0; points * nfreq],
            im: vec![0.0; points * nfreq],
        }
    }

    pub fn points(&self) -> usize {
        self.re.len() / self.nfreq.max(1)
    }

    #[inline]
    pub fn add(&mut self, point: usize, value: f64, ph: &Phasors) {
        let re = &mut self.re[point * self.nfreq..][..self.nfreq];
        let im = &mut self.im[point * self.nfreq..][..self.nfreq];
        add_line(re, im, value, ph);
    }

    /// Add one value per point; points are independent, so this runs in parallel.
    pub fn add_all(&mut self, values: &[f64], ph: &Phasors) {
        let n = self.nfreq;
        self.re
            .par_chunks_mut(n)
            .zip(self.im.par_chunks_mut(n))
            .zip(values.par_iter())
            .for_each(|((re, im), &v)| add_line(re, im, v, ph));
    }

    pub fn get(&self, point: usize, f: usize) -> Complex64 {
        let i = point * self.nfreq + f;
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }
}

#[inline]
fn add_line(re: &mut [f64], im: &mut [f64], v: f64, ph: &Phasors) {
    if v == 0.0 {
        return;
    }
    for ((r, i), (pr, pi)) in re.iter_mut().zip(im.iter_mut()).zip(ph.re.iter().zip(&ph.im)) {
        *r += v * pr;
        *i += v * pi;
    }
}

/// DFT of one field component at the Yee sample nearest a requested point.
#[derive(Debug, Clone)]
pub struct PointProbe {
    pub component: Component,
    pub index: [usize; 3],
    /// Physical position of the snapped sample, metres.
    pub position: [f64; 3],
    flat: usize,
    acc: Accumulator,
}

impl PointProbe {
    pub fn new(grid: &GridSpec, freqs: &FrequencyList, component: Component, point: [f64; 3]) -> Result<Self> {
        let index = grid.nearest_sample(component, point).ok_or_else(|| {
            Error::Configuration(format!("probe point {point:?} lies outside the grid"))
        })?;
        Ok(Self {
            component,
            index,
            position: grid.position(component, index[0], index[1], index[2]),
            flat: grid.index(index[0], index[1], index[2]),
            acc: Accumulator::new(1, freqs.len()),
        })
    }

    pub fn phasor(&self, f: usize) -> Complex64 {
        self.acc.get(0, f)
    }

    pub fn phasors(&self) -> Vec<Complex64> {
        (0..self.acc.nfreq).map(|f| self.phasor(f)).collect()
    }

    fn accumulate(&mut self, fields: &YeeFields, e_ph: &Phasors, h_ph: &Phasors) {
        let c = self.component.direction();
        if self.component.is_electric() {
            self.acc.add(0, fields.e[c][self.flat], e_ph);
        } else {
            self.acc.add(0, fields.h[c][self.flat], h_ph);
        }
    }
}

/// `|acc(w)| / |pulse spectrum(w)|`: the source-normalized near-field response.
pub fn probe_spectrum(probe: &PointProbe, freqs: &FrequencyList, pulse: &PulseSpec) -> Result<Spectrum> {
    freqs.check_band(pulse)?;
    let values = freqs
        .omegas()
        .iter()
        .enumerate()
        .map(|(f, &w)| probe.phasor(f).norm() / pulse.spectrum(w).norm())
        .collect();
    Spectrum::new(freqs.wavelengths_nm().to_vec(), values, SpectrumKind::NearField)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxMode {
    /// Flux of the plane-averaged fields. On a full periodic plane at normal
    /// incidence this is the zeroth-order flux; evanescent orders carry no
    /// net power, so it equals the per-point sum while being far cheaper.
    PlaneAverage,
    PerPoint,
}

/// Poynting flux through the z-plane at node `k`.
///
/// Ex and Ey are sampled on the plane; Hx and Hy are averaged over the two
/// half-planes `k - 1/2` and `k + 1/2`. Transversely, Ex pairs with Hy and Ey
/// with Hx at the same positions, so no in-plane interpolation is needed.
#[derive(Debug, Clone)]
pub struct FluxPlane {
    pub k: usize,
    pub i_range: (usize, usize),
    pub j_range: (usize, usize),
    /// +1 counts flux along +z as positive, -1 along -z.
    pub orientation: f64,
    pub mode: FluxMode,
    area: f64,
    /// Points per component: 1 for the plane average, the region size otherwise.
    acc: [Accumulator; 4],
    scratch: [Vec<f64>; 4],
}

impl FluxPlane {
    pub fn new(
        grid: &GridSpec,
        freqs: &FrequencyList,
        k: usize,
        i_range: (usize, usize),
        j_range: (usize, usize),
        orientation: f64,
        mode: FluxMode,
    ) -> Result<Self> {
        let [nx, ny, nz] = grid.dims();
        if k == 0 || k >= nz || i_range.0 >= i_range.1 || i_range.1 > nx || j_range.0 >= j_range.1 || j_range.1 > ny {
            return Err(Error::Configuration(format!(
                "flux plane k = {k}, i {i_range:?}, j {j_range:?} does not fit the grid"
            )));
        }
        let npts = (i_range.1 - i_range.0) * (j_range.1 - j_range.0);
        let per = match mode {
            FluxMode::PlaneAverage => 1,
            FluxMode::PerPoint => npts,
        };
        let make = || Accumulator::new(per, freqs.len());
        Ok(Self {
            k,
            i_range,
            j_range,
            orientation: orientation.signum(),
            mode,
            area: grid.dx * grid.dy,
            acc: [make(), make(), make(), make()],
            scratch: std::array::from_fn(|_| vec![0.0; per]),
        })
    }

    /// Whole transverse plane.
    pub fn full(grid: &GridSpec, freqs: &FrequencyList, k: usize, orientation: f64, mode: FluxMode) -> Result<Self> {
        Self::new(grid, freqs, k, (0, grid.nx), (0, grid.ny), orientation, mode)
    }

    pub fn points(&self) -> usize {
        (self.i_range.1 - self.i_range.0) * (self.j_range.1 - self.j_range.0)
    }

    fn accumulate(&mut self, grid: &GridSpec, fields: &YeeFields, e_ph: &Phasors, h_ph: &Phasors) {
        let k = self.k;
        let (ir, jr) = (self.i_range, self.j_range);
        let nj = jr.1 - jr.0;
        for s in &mut self.scratch {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        let average = self.mode == FluxMode::PlaneAverage;
        for i in ir.0..ir.1 {
            for j in jr.0..jr.1 {
                let here = grid.index(i, j, k);
                let below = here - 1;
                let p = if average { 0 } else { (i - ir.0) * nj + (j - jr.0) };
                self.scratch[0][p] += fields.e[0][here];
                self.scratch[1][p] += fields.e[1][here];
                self.scratch[2][p] += 0.5 * (fields.h[0][here] + fields.h[0][below]);
                self.scratch[3][p] += 0.5 * (fields.h[1][here] + fields.h[1][below]);
            }
        }
        for (c, acc) in self.acc.iter_mut().enumerate() {
            let ph = if c < 2 { e_ph } else { h_ph };
            if average {
                acc.add(0, self.scratch[c][0], ph);
            } else {
                acc.add_all(&self.scratch[c], ph);
            }
        }
    }

    /// Net power through the plane per frequency, `1/2 sum Re(E x H*) . n dA`.
    pub fn flux(&self) -> Vec<f64> {
        let nfreq = self.acc[0].nfreq;
        let (weight, per) = match self.mode {
            FluxMode::PlaneAverage => (1.0 / self.points() as f64, 1),
            FluxMode::PerPoint => (self.points() as f64, self.points()),
        };
        (0..nfreq)
            .map(|f| {
                let mut s = 0.0;
                for p in 0..per {
                    let ex = self.acc[0].get(p, f);
                    let ey = self.acc[1].get(p, f);
                    let hx = self.acc[2].get(p, f);
                    let hy = self.acc[3].get(p, f);
                    s += (ex * hy.conj() - ey * hx.conj()).re;
                }
                let s = match self.mode {
                    // Sum of averages: (sum E / N)(sum H / N)* * N points.
                    FluxMode::PlaneAverage => s * weight,
                    FluxMode::PerPoint => s,
                };
                0.5 * s * self.area * self.orientation
            })
            .collect()
    }
}

/// Flux spectrum of a finished run.
pub fn finalize_flux(plane: &FluxPlane, freqs: &FrequencyList) -> Result<Spectrum> {
    Spectrum::new(freqs.wavelengths_nm().to_vec(), plane.flux(), SpectrumKind::Flux)
}

/// DFT of one component over a rectangular window of a z-plane.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub component: Component,
    pub k: usize,
    pub i_range: (usize, usize),
    pub j_range: (usize, usize),
    acc: Accumulator,
    scratch: Vec<f64>,
}

impl FieldMap {
    pub fn new(
        grid: &GridSpec,
        freqs: &FrequencyList,
        component: Component,
        k: usize,
        i_range: (usize, usize),
        j_range: (usize, usize),
    ) -> Result<Self> {
        let [nx, ny, nz] = grid.dims();
        if k >= nz || i_range.0 >= i_range.1 || i_range.1 > nx || j_range.0 >= j_range.1 || j_range.1 > ny {
            return Err(Error::Configuration(format!(
                "field map k = {k}, i {i_range:?}, j {j_range:?} does not fit the grid"
            )));
        }
        let n = (i_range.1 - i_range.0) * (j_range.1 - j_range.0);
        Ok(Self {
            component,
            k,
            i_range,
            j_range,
            acc: Accumulator::new(n, freqs.len()),
            scratch: vec![0.0; n],
        })
    }

    /// Map covering a physical rectangle `[x0, x1] x [y0, y1]` on the plane
    /// nearest height `z` (metres).
    pub fn covering(
        grid: &GridSpec,
        freqs: &FrequencyList,
        component: Component,
        x: [f64; 2],
        y: [f64; 2],
        z: f64,
    ) -> Result<Self> {
        let lo = grid
            .nearest_sample(component, [x[0], y[0], z])
            .ok_or_else(|| Error::Configuration("field map corner outside grid".into()))?;
        let hi = grid
            .nearest_sample(component, [x[1], y[1], z])
            .ok_or_else(|| Error::Configuration("field map corner outside grid".into()))?;
        Self::new(grid, freqs, component, lo[2], (lo[0], hi[0] + 1), (lo[1], hi[1] + 1))
    }

    fn dims(&self) -> (usize, usize) {
        (self.i_range.1 - self.i_range.0, self.j_range.1 - self.j_range.0)
    }

    fn accumulate(&mut self, grid: &GridSpec, fields: &YeeFields, e_ph: &Phasors, h_ph: &Phasors) {
        let c = self.component.direction();
        let (src, ph) = if self.component.is_electric() {
            (&fields.e[c], e_ph)
        } else {
            (&fields.h[c], h_ph)
        };
        let (_, nj) = self.dims();
        for i in self.i_range.0..self.i_range.1 {
            for j in self.j_range.0..self.j_range.1 {
                self.scratch[(i - self.i_range.0) * nj + (j - self.j_range.0)] = src[grid.index(i, j, self.k)];
            }
        }
        self.acc.add_all(&self.scratch, ph);
    }

    /// Phasor map at frequency index `f`.
    pub fn slice(&self, grid: &GridSpec, freqs: &FrequencyList, f: usize) -> FieldSlice {
        let (ni, nj) = self.dims();
        let xs = (self.i_range.0..self.i_range.1)
            .map(|i| grid.position(self.component, i, self.j_range.0, self.k)[0])
            .collect();
        let ys = (self.j_range.0..self.j_range.1)
            .map(|j| grid.position(self.component, self.i_range.0, j, self.k)[1])
            .collect();
        let z = grid.position(self.component, self.i_range.0, self.j_range.0, self.k)[2];
        FieldSlice {
            component: self.component,
            wavelength_nm: freqs.wavelengths_nm()[f],
            z,
            xs,
            ys,
            values: (0..ni * nj).map(|p| self.acc.get(p, f)).collect(),
        }
    }
}

/// Phasors of one component on a rectangular patch of a z-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSlice {
    pub component: Component,
    pub wavelength_nm: f64,
    /// Plane height, metres.
    pub z: f64,
    /// Sample coordinates, metres, ascending.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[ix * ys.len() + iy]`.
    pub values: Vec<Complex64>,
}

impl FieldSlice {
    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[ix * self.ys.len() + iy]
    }

    /// Index of the sample nearest `(x, y)` if it lies within half a cell.
    pub fn nearest(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let pick = |v: &[f64], q: f64| -> Option<usize> {
            let step = if v.len() > 1 { v[1] - v[0] } else { f64::INFINITY };
            let (idx, dist) = v
                .iter()
                .enumerate()
                .map(|(i, &p)| (i, (p - q).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))?;
            (dist <= 0.5 * step + 1e-6 * step.min(1.0)).then_some(idx)
        };
        Some((pick(&self.xs, x)?, pick(&self.ys, y)?))
    }
}

/// All monitors of one run, sharing a frequency list.
#[derive(Debug, Clone)]
pub struct MonitorSet {
    pub freqs: FrequencyList,
    pub probes: Vec<PointProbe>,
    pub fluxes: Vec<FluxPlane>,
    pub maps: Vec<FieldMap>,
}

impl MonitorSet {
    pub fn new(freqs: FrequencyList) -> Self {
        Self {
            freqs,
            probes: Vec::new(),
            fluxes: Vec::new(),
            maps: Vec::new(),
        }
    }

    /// Call once after every full time step.
    pub fn accumulate(&mut self, grid: &GridSpec, fields: &YeeFields) {
        let e_ph = Phasors::at(&self.freqs, fields.time_e(), fields.dt);
        let h_ph = Phasors::at(&self.freqs, fields.time_h(), fields.dt);
        for p in &mut self.probes {
            p.accumulate(fields, &e_ph, &h_ph);
        }
        for f in &mut self.fluxes {
            f.accumulate(grid, fields, &e_ph, &h_ph);
        }
        for m in &mut self.maps {
            m.accumulate(grid, fields, &e_ph, &h_ph);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.probes.iter().all(|p| p.acc.is_finite())
            && self.fluxes.iter().all(|f| f.acc.iter().all(Accumulator::is_finite))
            && self.maps.iter().all(|m| m.acc.is_finite())
    }
}
