//! Yee-grid fields and the leapfrog update.
//!
//! One full step advances `H^{n-1/2} -> H^{n+1/2}`, the Drude currents
//! `J^{n-1/2} -> J^{n+1/2}` and `E^n -> E^{n+1}`, with CPML and source
//! corrections applied between the halves. Each half-step is parallel over
//! x-slabs; every sample is computed by the same expression whatever the
//! partition, so results do not depend on the worker count.

use rayon::prelude::*;

use crate::boundaries::{Cpml, PeriodicSpec};
use crate::constants::{EPS0, ETA0, MU0};
use crate::grid::{courant_dt, Axis, GridSpec};
use crate::materials::{step_currents, MaterialMap};
use crate::sources::Source;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct YeeFields {
    pub e: [Vec<f64>; 3],
    pub h: [Vec<f64>; 3],
    /// Drude polarization currents, co-located with `e`. Only samples of
    /// dispersive materials are ever non-zero.
    pub j: [Vec<f64>; 3],
    pub step_index: u64,
    pub dt: f64,
}

impl YeeFields {
    pub fn zeros(grid: &GridSpec, dt: f64) -> Self {
        let n = grid.len();
        let z = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        Self {
            e: z(),
            h: z(),
            j: z(),
            step_index: 0,
            dt,
        }
    }

    /// Time of the E samples.
    pub fn time_e(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    /// Time of the H samples (half a step behind E).
    pub fn time_h(&self) -> f64 {
        (self.step_index as f64 - 0.5) * self.dt
    }

    /// Discrete electromagnetic energy `sum (eps0 |E|^2 + mu0 |H|^2) / 2 * dV`.
    pub fn energy(&self, grid: &GridSpec) -> f64 {
        let sq = |v: &Vec<f64>| v.par_iter().map(|x| x * x).sum::<f64>();
        let e2: f64 = self.e.iter().map(sq).sum();
        let h2: f64 = self.h.iter().map(sq).sum();
        0.5 * (EPS0 * e2 + MU0 * h2) * grid.cell_volume()
    }

    /// Largest of `|E|` and `eta0 |H|` over all samples; NaN if any sample is NaN.
    pub fn max_amplitude(&self) -> f64 {
        let m = |v: &Vec<f64>, s: f64| {
            v.par_iter()
                .map(|x| (x * s).abs())
                .reduce(|| 0.0, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
        };
        let mut out = 0.0f64;
        for c in 0..3 {
            for v in [m(&self.e[c], 1.0), m(&self.h[c], ETA0)] {
                if v.is_nan() {
                    return f64::NAN;
                }
                out = out.max(v);
            }
        }
        out
    }
}

/// z-line `(i, j)` of a component array, or the zero line past a wall.
#[inline]
fn line_or_zeros<'a>(arr: &'a [f64], zeros: &'a [f64], ny: usize, i: Option<usize>, j: Option<usize>) -> &'a [f64] {
    let nz = zeros.len();
    match (i, j) {
        (Some(i), Some(j)) => &arr[(i * ny + j) * nz..][..nz],
        _ => zeros,
    }
}

/// Faraday half-step: `H <- H - dt/mu0 * curl E` with forward differences.
pub fn step_h(f: &mut YeeFields, g: &GridSpec, periodic: &PeriodicSpec) {
    let [nx, ny, nz] = g.dims();
    let c = f.dt / MU0;
    let (cx, cy, cz) = (c / g.dx, c / g.dy, c / g.dz);
    let zeros = vec![0.0; nz];
    let wrap_z = periodic.is_periodic(Axis::Z);
    let slab = ny * nz;
    let [ex, ey, ez] = &f.e;
    let [hx, hy, hz] = &mut f.h;
    let line = |arr, i, j| line_or_zeros(arr, &zeros, ny, i, j);
    hx.par_chunks_mut(slab)
        .zip(hy.par_chunks_mut(slab))
        .zip(hz.par_chunks_mut(slab))
        .enumerate()
        .for_each(|(i, ((hx, hy), hz))| {
            let ip = periodic.forward(Axis::X, i, nx);
            for j in 0..ny {
                let jp = periodic.forward(Axis::Y, j, ny);
                let ex0 = line(ex, Some(i), Some(j));
                let ey0 = line(ey, Some(i), Some(j));
                let ez0 = line(ez, Some(i), Some(j));
                let ez_jp = line(ez, Some(i), jp);
                let ex_jp = line(ex, Some(i), jp);
                let ez_ip = line(ez, ip, Some(j));
                let ey_ip = line(ey, ip, Some(j));
                let r = j * nz..(j + 1) * nz;
                update_h_line(
                    &mut hx[r.clone()],
                    &mut hy[r.clone()],
                    &mut hz[r],
                    [ex0, ey0, ez0],
                    [ex_jp, ez_jp],
                    [ey_ip, ez_ip],
                    [cx, cy, cz],
                    wrap_z,
                );
            }
        });
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn update_h_line(
    hx: &mut [f64],
    hy: &mut [f64],
    hz: &mut [f64],
    [ex, ey, ez]: [&[f64]; 3],
    [ex_jp, ez_jp]: [&[f64]; 2],
    [ey_ip, ez_ip]: [&[f64]; 2],
    [cx, cy, cz]: [f64; 3],
    wrap_z: bool,
) {
    let nz = hx.len();
    let m = nz - 1;
    for k in 0..m {
        hx[k] -= cy * (ez_jp[k] - ez[k]) - cz * (ey[k + 1] - ey[k]);
        hy[k] -= cz * (ex[k + 1] - ex[k]) - cx * (ez_ip[k] - ez[k]);
        hz[k] -= cx * (ey_ip[k] - ey[k]) - cy * (ex_jp[k] - ex[k]);
    }
    let (ey_n, ex_n) = if wrap_z { (ey[0], ex[0]) } else { (0.0, 0.0) };
    hx[m] -= cy * (ez_jp[m] - ez[m]) - cz * (ey_n - ey[m]);
    hy[m] -= cz * (ex_n - ex[m]) - cx * (ez_ip[m] - ez[m]);
    hz[m] -= cx * (ey_ip[m] - ey[m]) - cy * (ex_jp[m] - ex[m]);
}

/// Ampère half-step: `E <- Ca E + Cb (curl H - J)` with backward differences.
///
/// The background coefficients are applied everywhere in one sweep; samples
/// of other materials are then corrected for their own `Cb` and current.
/// Tangential E on conducting walls (index 0 of a non-periodic axis) is
/// never updated and stays zero.
pub fn step_e(f: &mut YeeFields, g: &GridSpec, periodic: &PeriodicSpec, materials: &MaterialMap) -> Result<()> {
    if materials.dims != g.dims() {
        return Err(Error::Configuration(format!(
            "material map {:?} does not match grid {:?}",
            materials.dims,
            g.dims()
        )));
    }
    let [nx, ny, nz] = g.dims();
    let cb = materials.background().cb;
    let (ix, iy, iz) = (1.0 / g.dx, 1.0 / g.dy, 1.0 / g.dz);
    let wrap = periodic.periodic;
    let slab = ny * nz;
    let zeros = vec![0.0; nz];
    {
        let [hx, hy, hz] = &f.h;
        let [ex, ey, ez] = &mut f.e;
        let line = |arr, i, j| line_or_zeros(arr, &zeros, ny, i, j);
        ex.par_chunks_mut(slab)
            .zip(ey.par_chunks_mut(slab))
            .zip(ez.par_chunks_mut(slab))
            .enumerate()
            .for_each(|(i, ((ex, ey), ez))| {
                let im = periodic.backward(Axis::X, i, nx);
                for j in 0..ny {
                    let jm = periodic.backward(Axis::Y, j, ny);
                    let hx0 = line(hx, Some(i), Some(j));
                    let hy0 = line(hy, Some(i), Some(j));
                    let hz0 = line(hz, Some(i), Some(j));
                    let r = j * nz..(j + 1) * nz;
                    let coef = [cb * ix, cb * iy, cb * iz];
                    // Ex: tangential to the y and z walls.
                    if jm.is_some() {
                        update_ex_line(&mut ex[r.clone()], hy0, hz0, line(hz, Some(i), jm), coef, wrap[2]);
                    }
                    if im.is_some() {
                        update_ey_line(&mut ey[r.clone()], hx0, hz0, line(hz, im, Some(j)), coef, wrap[2]);
                        if jm.is_some() {
                            update_ez_line(
                                &mut ez[r],
                                hx0,
                                hy0,
                                line(hy, im, Some(j)),
                                line(hx, Some(i), jm),
                                coef,
                            );
                        }
                    }
                }
            });
    }
    correct_special_samples(f, g, periodic, materials);
    Ok(())
}

#[inline]
fn update_ex_line(ex: &mut [f64], hy: &[f64], hz: &[f64], hz_jm: &[f64], [_, cy, cz]: [f64; 3], wrap_z: bool) {
    let nz = ex.len();
    for k in 1..nz {
        ex[k] += cy * (hz[k] - hz_jm[k]) - cz * (hy[k] - hy[k - 1]);
    }
    if wrap_z {
        ex[0] += cy * (hz[0] - hz_jm[0]) - cz * (hy[0] - hy[nz - 1]);
    }
}

#[inline]
fn update_ey_line(ey: &mut [f64], hx: &[f64], hz: &[f64], hz_im: &[f64], [cx, _, cz]: [f64; 3], wrap_z: bool) {
    let nz = ey.len();
    for k in 1..nz {
        ey[k] += cz * (hx[k] - hx[k - 1]) - cx * (hz[k] - hz_im[k]);
    }
    if wrap_z {
        ey[0] += cz * (hx[0] - hx[nz - 1]) - cx * (hz[0] - hz_im[0]);
    }
}

#[inline]
fn update_ez_line(ez: &mut [f64], hx: &[f64], hy: &[f64], hy_im: &[f64], hx_jm: &[f64], [cx, cy, _]: [f64; 3]) {
    for k in 0..ez.len() {
        ez[k] += cx * (hy[k] - hy_im[k]) - cy * (hx[k] - hx_jm[k]);
    }
}

/// Discrete `(curl H)_c` at E sample `flat`, matching the bulk stencil.
pub fn curl_h_at(f: &YeeFields, g: &GridSpec, periodic: &PeriodicSpec, c: usize, flat: usize) -> f64 {
    let [i, j, k] = g.unravel(flat);
    let dims = g.dims();
    let d = g.spacing();
    let at = |comp: usize, p: [Option<usize>; 3]| -> f64 {
        match p {
            [Some(a), Some(b), Some(cc)] => f.h[comp][g.index(a, b, cc)],
            _ => 0.0,
        }
    };
    let here = [Some(i), Some(j), Some(k)];
    let back = |axis: usize| {
        let mut p = here;
        let n = [i, j, k][axis];
        p[axis] = periodic.backward(Axis::ALL[axis], n, dims[axis]);
        p
    };
    // (curl H)_c = d_{c+1} H_{c+2} - d_{c+2} H_{c+1}
    let a1 = (c + 1) % 3;
    let a2 = (c + 2) % 3;
    (at(a2, here) - at(a2, back(a1))) / d[a1] - (at(a1, here) - at(a1, back(a2))) / d[a2]
}

fn is_wall_sample(periodic: &PeriodicSpec, c: usize, p: [usize; 3]) -> bool {
    (0..3).any(|a| a != c && p[a] == 0 && !periodic.periodic[a])
}

fn correct_special_samples(f: &mut YeeFields, g: &GridSpec, periodic: &PeriodicSpec, materials: &MaterialMap) {
    let cb0 = materials.background().cb;
    for c in 0..3 {
        for &flat in materials.special_samples(c) {
            if is_wall_sample(periodic, c, g.unravel(flat)) {
                continue;
            }
            let coef = materials.coefficients_at(c, flat);
            if coef.cb != cb0 {
                let curl = curl_h_at(f, g, periodic, c, flat);
                f.e[c][flat] += (coef.cb - cb0) * curl;
            }
            if coef.dispersive {
                f.e[c][flat] -= coef.cb * f.j[c][flat];
            }
        }
    }
}

/// Discrete divergence of H at cell centres (Yee dual nodes).
pub fn divergence_h(f: &YeeFields, g: &GridSpec, periodic: &PeriodicSpec) -> Vec<f64> {
    let [nx, ny, nz] = g.dims();
    let mut out = vec![0.0; g.len()];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let here = g.index(i, j, k);
                let fwd = |axis: Axis, comp: usize| -> f64 {
                    let n = [i, j, k][axis.index()];
                    match periodic.forward(axis, n, [nx, ny, nz][axis.index()]) {
                        Some(m) => {
                            let mut p = [i, j, k];
                            p[axis.index()] = m;
                            f.h[comp][g.index(p[0], p[1], p[2])]
                        }
                        None => 0.0,
                    }
                };
                out[here] = (fwd(Axis::X, 0) - f.h[0][here]) / g.dx
                    + (fwd(Axis::Y, 1) - f.h[1][here]) / g.dy
                    + (fwd(Axis::Z, 2) - f.h[2][here]) / g.dz;
            }
        }
    }
    out
}

/// A complete simulation: grid, fields, materials, terminations and sources.
pub struct Solver {
    pub grid: GridSpec,
    pub fields: YeeFields,
    pub materials: MaterialMap,
    pub periodic: PeriodicSpec,
    pub cpml: Option<Cpml>,
    pub sources: Vec<Source>,
    pool: rayon::ThreadPool,
    /// Fields beyond `overflow_factor` times this amplitude count as diverged.
    amplitude_scale: f64,
    pub overflow_factor: f64,
    pub guard_interval: u64,
}

impl Solver {
    pub fn new(
        grid: GridSpec,
        materials: MaterialMap,
        periodic: PeriodicSpec,
        cpml: Option<Cpml>,
        workers: usize,
    ) -> Result<Self> {
        grid.validate()?;
        let dt = courant_dt(&grid)?;
        if materials.dims != grid.dims() {
            return Err(Error::Configuration("material map does not match grid".into()));
        }
        if let Some(c) = &cpml {
            c.check_materials(&materials)?;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Configuration(format!("thread pool: {e}")))?;
        Ok(Self {
            grid,
            fields: YeeFields::zeros(&grid, dt),
            materials,
            periodic,
            cpml,
            sources: Vec::new(),
            pool,
            amplitude_scale: 0.0,
            overflow_factor: 1e6,
            guard_interval: 20,
        })
    }

    pub fn dt(&self) -> f64 {
        self.fields.dt
    }

    pub fn add_source(&mut self, source: Source) {
        self.amplitude_scale = self.amplitude_scale.max(source.amplitude().abs());
        self.sources.push(source);
    }

    /// Record the current field amplitude as the reference for the overflow guard.
    pub fn set_reference_amplitude(&mut self) {
        let a = self.pool.install(|| self.fields.max_amplitude());
        self.amplitude_scale = self.amplitude_scale.max(a);
    }

    pub fn step(&mut self) -> Result<()> {
        let Self {
            grid,
            fields,
            materials,
            periodic,
            cpml,
            sources,
            pool,
            ..
        } = self;
        let t_e = fields.time_e();
        pool.install(|| step_h(fields, grid, periodic));
        if let Some(c) = cpml.as_mut() {
            pool.install(|| c.correct_h(fields));
        }
        for s in sources.iter() {
            s.correct_h(fields, grid, t_e);
        }
        step_currents(&fields.e, &mut fields.j, materials);
        let t_h = t_e + 0.5 * fields.dt;
        pool.install(|| step_e(fields, grid, periodic, materials))?;
        if let Some(c) = cpml.as_mut() {
            pool.install(|| c.correct_e(fields, materials));
        }
        for s in sources.iter() {
            s.correct_e(fields, grid, t_h);
        }
        fields.step_index += 1;
        if self.guard_interval > 0 && fields.step_index % self.guard_interval == 0 {
            self.check_guard()?;
        }
        Ok(())
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn check_guard(&self) -> Result<()> {
        let amp = self.pool.install(|| self.fields.max_amplitude());
        let step = self.fields.step_index;
        if !amp.is_finite() {
            return Err(Error::NumericalInstability {
                step,
                detail: "non-finite field value".into(),
            });
        }
        if self.amplitude_scale > 0.0 && amp > self.overflow_factor * self.amplitude_scale {
            return Err(Error::NumericalInstability {
                step,
                detail: format!(
                    "field amplitude {amp:e} exceeds {:e} x reference {:e}",
                    self.overflow_factor, self.amplitude_scale
                ),
            });
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.pool.install(|| self.fields.energy(&self.grid))
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}
