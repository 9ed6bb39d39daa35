//! Measurement harnesses shared by the integration tests and the acceptance
//! target. Each returns the measured quantity; callers decide the tolerance.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stripfdtd::boundaries::{Cpml, CpmlParams, PeriodicSpec};
use stripfdtd::constants::{C0, EPS0, ETA0, MU0, NM};
use stripfdtd::fdtd::{divergence_h, Solver, YeeFields};
use stripfdtd::geometry::{voxelize, BoxShape, Scene};
use stripfdtd::grid::{courant_dt, Axis, Component, GridSpec};
use stripfdtd::materials::{drude_permittivity, DrudeParams, Material, MaterialMap, SILVER};
use stripfdtd::monitors::{finalize_flux, FluxMode, FluxPlane, FrequencyList, MonitorSet, PointProbe};
use stripfdtd::num_complex::Complex64;
use stripfdtd::sources::{Direction, PlaneInjection, PlaneWaveSource, Polarization, PulseSpec, Source, Tfsf};
use stripfdtd::Result;

pub const BAND: [f64; 2] = [600.0, 800.0];

pub fn pulse() -> PulseSpec {
    PulseSpec::for_band(700.0, BAND, 1.0).unwrap()
}

pub fn band_freqs(n: usize) -> FrequencyList {
    FrequencyList::uniform(BAND[0], BAND[1], n).unwrap()
}

/// Steps needed to cover `seconds` of simulated time.
pub fn steps_for(seconds: f64, dt: f64) -> u64 {
    (seconds / dt).ceil() as u64
}

/// A 4x4 cell column, periodic in x and y. The transverse spacing is
/// stretched so the time step is set by `dz` alone: `c dt / dz ~ courant`.
pub fn column_grid(nz: usize, dz: f64, courant: f64) -> GridSpec {
    GridSpec {
        nx: 4,
        ny: 4,
        nz,
        dx: 1e4 * dz,
        dy: 1e4 * dz,
        dz,
        courant_factor: courant,
        origin: [0.0; 3],
    }
}

/// Material map with full-aperture Drude slabs between the given z nodes.
pub fn slab_materials(grid: &GridSpec, slabs: &[(usize, usize)], drude: DrudeParams) -> Result<MaterialMap> {
    let dt = courant_dt(grid)?;
    if slabs.is_empty() {
        return MaterialMap::vacuum(grid, dt);
    }
    let wide = [-1.0, 1.0 + grid.nx as f64 * grid.dx];
    let mut scene = Scene::empty(
        [[0.0; 3], [grid.nx as f64 * grid.dx, grid.ny as f64 * grid.dy, grid.nz as f64 * grid.dz]],
        [true, true, false],
    );
    for &(k0, k1) in slabs {
        scene.boxes.push(BoxShape {
            min: [wide[0], wide[0], k0 as f64 * grid.dz],
            max: [wide[1], wide[1], k1 as f64 * grid.dz],
            material: SILVER,
        });
    }
    MaterialMap::new(grid, voxelize(&scene, grid), vec![Material::Vacuum, Material::Drude(drude)], dt)
}

/// One-dimensional pulse experiment in a column with CPML on both z ends.
#[derive(Debug, Clone)]
pub struct Column {
    pub nz: usize,
    pub dz: f64,
    pub pml: usize,
    pub k_source: usize,
    pub k_probe: usize,
    pub slabs: Vec<(usize, usize)>,
    pub drude: DrudeParams,
    pub polarization: Polarization,
    pub pulse: PulseSpec,
    pub steps: u64,
    /// Planes whose z-flux is recorded, oriented towards -z.
    pub flux_planes: Vec<usize>,
    pub workers: usize,
}

impl Column {
    pub fn new(nz: usize, dz: f64, k_source: usize, k_probe: usize) -> Self {
        Self {
            nz,
            dz,
            pml: 10,
            k_source,
            k_probe,
            slabs: Vec::new(),
            drude: DrudeParams::SILVER,
            polarization: Polarization::S,
            pulse: pulse(),
            steps: 0,
            flux_planes: Vec::new(),
            workers: 1,
        }
    }

    pub fn grid(&self) -> GridSpec {
        column_grid(self.nz, self.dz, 0.5)
    }

    pub fn dt(&self) -> f64 {
        courant_dt(&self.grid()).unwrap()
    }

    /// Steps for the pulse plus `cells` of travel.
    pub fn steps_covering(&self, cells: usize) -> u64 {
        steps_for(self.pulse.duration() + cells as f64 * self.dz / C0, self.dt())
    }

    pub fn solver(&self) -> Result<Solver> {
        let grid = self.grid();
        let dt = courant_dt(&grid)?;
        let periodic = PeriodicSpec::transverse();
        let cpml = Cpml::new(
            &grid,
            dt,
            &CpmlParams {
                thickness: self.pml,
                enabled: [false, false, true],
                ..CpmlParams::default()
            },
            &periodic,
        )?;
        let interior = cpml.interior()[2];
        let materials = slab_materials(&grid, &self.slabs, self.drude)?;
        let mut solver = Solver::new(grid, materials, periodic, Some(cpml), self.workers)?;
        let plane = PlaneInjection::new(&grid, self.k_source, interior, self.polarization, self.pulse)?;
        solver.add_source(Source::Plane(plane));
        Ok(solver)
    }

    pub fn run(&self, freqs: &FrequencyList) -> Result<ColumnRun> {
        let mut solver = self.solver()?;
        let grid = solver.grid;
        let comp = Component::electric(self.polarization.e_axis().index());
        let mut monitors = MonitorSet::new(freqs.clone());
        let p = grid.position(comp, 1, 1, self.k_probe);
        monitors.probes.push(PointProbe::new(&grid, freqs, comp, p)?);
        for &k in &self.flux_planes {
            monitors.fluxes.push(FluxPlane::full(&grid, freqs, k, -1.0, FluxMode::PlaneAverage)?);
        }
        for _ in 0..self.steps {
            solver.step()?;
            monitors.accumulate(&grid, &solver.fields);
        }
        let flux = monitors
            .fluxes
            .iter()
            .map(|f| finalize_flux(f, freqs).map(|s| s.values))
            .collect::<Result<_>>()?;
        Ok(ColumnRun {
            probe: monitors.probes[0].phasors(),
            flux,
            fields: solver.fields,
        })
    }
}

pub struct ColumnRun {
    pub probe: Vec<Complex64>,
    pub flux: Vec<Vec<f64>>,
    pub fields: YeeFields,
}

pub struct Reflectance {
    pub wavelengths_nm: Vec<f64>,
    pub simulated: Vec<f64>,
    pub oracle: Vec<f64>,
}

impl Reflectance {
    pub fn worst_relative_error(&self) -> f64 {
        self.simulated
            .iter()
            .zip(&self.oracle)
            .map(|(s, o)| (s - o).abs() / o)
            .fold(0.0, f64::max)
    }
}

/// Normal-incidence reflectance of a thick Drude slab from a two-run
/// subtraction at a probe between source and slab, with the closed-form
/// interface reflectance `|(1 - n) / (1 + n)|^2` alongside.
pub fn drude_reflectance(dz_nm: f64, drude: DrudeParams, nfreq: usize) -> Result<Reflectance> {
    let dz = dz_nm * NM;
    let cells = |nm: f64| (nm / dz_nm).round() as usize;
    let pml = 10;
    let slab0 = pml + cells(100.0);
    let slab1 = slab0 + cells(150.0);
    let k_probe = slab1 + cells(100.0);
    let k_source = k_probe + cells(50.0);
    let nz = k_source + cells(100.0) + pml;
    let mut col = Column::new(nz, dz, k_source, k_probe);
    col.drude = drude;
    // Out to the slab, back past the probe, plus the metal's ring-down.
    col.steps = col.steps_covering(2 * (k_source - slab1)) + col.steps_covering(0) / 2;
    let freqs = band_freqs(nfreq);
    let reference = col.run(&freqs)?;
    col.slabs = vec![(slab0, slab1)];
    let loaded = col.run(&freqs)?;
    let simulated = reference
        .probe
        .iter()
        .zip(&loaded.probe)
        .map(|(inc, tot)| ((tot - inc) / inc).norm_sqr())
        .collect();
    let oracle = freqs
        .omegas()
        .iter()
        .map(|&w| {
            let n = drude_permittivity(w, &drude).map(|e| e.sqrt())?;
            Ok(((1.0 - n) / (1.0 + n)).norm_sqr())
        })
        .collect::<Result<_>>()?;
    Ok(Reflectance {
        wavelengths_nm: freqs.wavelengths_nm().to_vec(),
        simulated,
        oracle,
    })
}

/// Band-integrated energy reflected by the z absorbers, in dB relative to
/// the incident pulse, from a short column against a deep one whose own
/// absorber echo arrives after the window closes.
pub fn cpml_reflection_db(thickness: usize, dz_nm: f64) -> Result<f64> {
    let dz = dz_nm * NM;
    let gap = 20;
    let short = {
        let mut c = Column::new(2 * thickness + 3 * gap, dz, thickness + 2 * gap, thickness + gap);
        c.pml = thickness;
        c
    };
    let steps = short.steps_covering(6 * gap);
    let extension = (C0 * steps as f64 * short.dt() / dz / 2.0).ceil() as usize + gap;
    let deep = {
        let mut c = Column::new(short.nz + 2 * extension, dz, short.k_source + extension, short.k_probe + extension);
        c.pml = thickness;
        c
    };
    let freqs = band_freqs(41);
    let run = |mut c: Column| {
        c.steps = steps;
        c.run(&freqs)
    };
    let near = run(short)?;
    let far = run(deep)?;
    let reflected: f64 = near.probe.iter().zip(&far.probe).map(|(a, b)| (a - b).norm_sqr()).sum();
    let incident: f64 = far.probe.iter().map(|p| p.norm_sqr()).sum();
    Ok(10.0 * (reflected / incident).log10())
}

pub struct TfsfCheck {
    /// Peak |E| outside the box over the whole run, relative to the incident peak, dB.
    pub leakage_db: f64,
    /// Peak deviation of the total field at the box centre from the analytic
    /// incident wave, relative to the incident peak.
    pub incident_error: f64,
}

/// Empty TFSF box in a CPML-terminated vacuum cube.
pub fn tfsf_check(n: usize, dx_nm: f64, workers: usize) -> Result<TfsfCheck> {
    let grid = GridSpec::cubic([n; 3], dx_nm * NM, 0.5, [0.0; 3]);
    let dt = courant_dt(&grid)?;
    let periodic = PeriodicSpec::none();
    let cpml = Cpml::new(&grid, dt, &CpmlParams::default(), &periodic)?;
    let interior = cpml.interior();
    let materials = MaterialMap::vacuum(&grid, dt)?;
    let lo = [interior[0].0 + 5; 3];
    let hi = [interior[0].1 - 6; 3];
    let wave = PlaneWaveSource::new(
        Direction {
            axis: Axis::X,
            positive: true,
        },
        Axis::Y,
    )?;
    let p = pulse();
    let tfsf = Tfsf::new(&grid, &materials, lo, hi, wave, p)?;
    let until = tfsf.active_until();
    let mut solver = Solver::new(grid, materials, periodic, Some(cpml), workers)?;
    solver.add_source(Source::Tfsf(tfsf.clone()));

    let mut outside = Vec::new();
    for c in 0..3 {
        let comp = Component::electric(c);
        for i in interior[0].0..interior[0].1 {
            for j in interior[1].0..interior[1].1 {
                for k in interior[2].0..interior[2].1 {
                    if !tfsf.contains(comp, [i, j, k]) {
                        outside.push((c, grid.index(i, j, k)));
                    }
                }
            }
        }
    }
    let centre = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
    let centre_flat = grid.index(centre[0], centre[1], centre[2]);
    let centre_x = grid.position(Component::Ey, centre[0], centre[1], centre[2])[0];

    let mut leak = 0.0f64;
    let mut err = 0.0f64;
    let steps = steps_for(until + 4.0 * n as f64 * grid.dx / C0, dt);
    for _ in 0..steps {
        solver.step()?;
        let f = &solver.fields;
        for &(c, flat) in &outside {
            leak = leak.max(f.e[c][flat].abs());
        }
        let expected = tfsf.incident(centre_x, f.time_e());
        err = err.max((f.e[1][centre_flat] - expected).abs());
    }
    Ok(TfsfCheck {
        leakage_db: 20.0 * (leak / p.amplitude).log10(),
        incident_error: err / p.amplitude,
    })
}

/// Random E on every sample not pinned by a PEC wall.
pub fn randomize_e(fields: &mut YeeFields, grid: &GridSpec, periodic: &PeriodicSpec, seed: u64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let axes = [Axis::X, Axis::Y, Axis::Z];
    for c in 0..3 {
        for flat in 0..grid.len() {
            let p = grid.unravel(flat);
            // Tangential samples on a wall plane stay zero.
            let pinned = (0..3).any(|a| a != c && p[a] == 0 && !periodic.is_periodic(axes[a]));
            fields.e[c][flat] = if pinned { 0.0 } else { rng.random_range(-1.0..1.0) };
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest `|div H| dx / max|H|` seen over `steps` steps from random E in a
/// box containing a silver cube.
pub fn div_h_drift(n: usize, periodic: PeriodicSpec, steps: u64) -> Result<f64> {
    let dx = 5.0 * NM;
    let grid = GridSpec::cubic([n; 3], dx, 0.5, [0.0; 3]);
    let dt = courant_dt(&grid)?;
    let side = n as f64 * 5.0;
    let mut scene = Scene::empty([[0.0; 3], [side * NM; 3]], [false; 3]);
    scene
        .boxes
        .push(BoxShape::from_nm([side / 4.0, side / 2.0], [side / 4.0, side / 2.0], [side / 4.0, side / 2.0], SILVER));
    let materials = MaterialMap::new(
        &grid,
        voxelize(&scene, &grid),
        vec![Material::Vacuum, Material::Drude(DrudeParams::SILVER)],
        dt,
    )?;
    let mut solver = Solver::new(grid, materials, periodic, None, 1)?;
    randomize_e(&mut solver.fields, &grid, &periodic, 7);
    solver.set_reference_amplitude();
    let mut worst = 0.0f64;
    for _ in 0..steps {
        solver.step()?;
        let h = solver.fields.h.iter().map(|c| max_abs(c)).fold(0.0, f64::max);
        let div = max_abs(&divergence_h(&solver.fields, &grid, &periodic));
        if h > 0.0 {
            worst = worst.max(div * dx / h);
        }
    }
    Ok(worst)
}

/// Discrete energy with the magnetic term taken as the product of the two
/// H half-steps bracketing E: `eps0 E^n.E^n + mu0 H^(n-1/2).H^(n+1/2)`.
/// This is the quantity the leapfrog conserves exactly in a lossless cavity.
pub fn pec_energy_band(n: usize, steps: u64) -> Result<f64> {
    let grid = GridSpec::cubic([n; 3], 5.0 * NM, 0.5, [0.0; 3]);
    let dt = courant_dt(&grid)?;
    let periodic = PeriodicSpec::none();
    let mut solver = Solver::new(grid, MaterialMap::vacuum(&grid, dt)?, periodic, None, 1)?;
    randomize_e(&mut solver.fields, &grid, &periodic, 11);
    solver.set_reference_amplitude();
    let dot = |a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]| -> f64 {
        (0..3).map(|c| a[c].iter().zip(&b[c]).map(|(x, y)| x * y).sum::<f64>()).sum()
    };
    let mut e0 = None;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let electric = EPS0 * dot(&solver.fields.e, &solver.fields.e);
        let h_before = solver.fields.h.clone();
        solver.step()?;
        let energy = electric + MU0 * dot(&h_before, &solver.fields.h);
        let base = *e0.get_or_insert(energy);
        worst = worst.max((energy - base).abs() / base);
    }
    Ok(worst)
}

/// Plane wave `E_x = f(z - c t)`, `H_y = E_x / eta0` on a column; H is set
/// half a step earlier to match the leapfrog stagger.
pub fn launch_forward(fields: &mut YeeFields, grid: &GridSpec, profile: impl Fn(f64) -> f64) {
    let shift = C0 * fields.dt / 2.0;
    for flat in 0..grid.len() {
        let [i, j, k] = grid.unravel(flat);
        let ze = grid.position(Component::Ex, i, j, k)[2];
        let zh = grid.position(Component::Hy, i, j, k)[2];
        fields.e[0][flat] = profile(ze);
        fields.h[1][flat] = profile(zh + shift) / ETA0;
    }
}

/// Energy-weighted z-centroid of E_x along one column line.
pub fn ex_centroid(fields: &YeeFields, grid: &GridSpec) -> f64 {
    let (mut w, mut m) = (0.0, 0.0);
    for k in 0..grid.nz {
        let v = fields.e[0][grid.index(0, 0, k)];
        let z = grid.position(Component::Ex, 0, 0, k)[2];
        w += v * v;
        m += v * v * z;
    }
    m / w
}

/// Relative error of the distance a Gaussian wave packet travels in `steps`
/// steps against `c0 steps dt`.
pub fn centroid_error(steps: u64) -> Result<f64> {
    let dz = 5.0 * NM;
    let grid = column_grid(800, dz, 0.5);
    let dt = courant_dt(&grid)?;
    let mut solver = Solver::new(grid, MaterialMap::vacuum(&grid, dt)?, PeriodicSpec::all(), None, 1)?;
    let (z0, width, wavelength) = (200.0 * dz, 25.0 * dz, 40.0 * dz);
    launch_forward(&mut solver.fields, &grid, |z| {
        let u = (z - z0) / width;
        (-0.5 * u * u).exp() * (2.0 * std::f64::consts::PI * (z - z0) / wavelength).cos()
    });
    solver.set_reference_amplitude();
    let start = ex_centroid(&solver.fields, &grid);
    solver.run(steps)?;
    let moved = ex_centroid(&solver.fields, &grid) - start;
    let expected = C0 * steps as f64 * dt;
    Ok((moved - expected).abs() / expected)
}

/// Relative L2 error of E_x after one round trip of a cavity between PEC
/// walls. The standing Gaussian splits into two halves, each reflecting
/// twice, and reassembles after `2 L / c`.
pub fn cavity_round_trip_error(cells: usize) -> Result<f64> {
    let dz = 5.0 * NM;
    let grid = column_grid(cells, dz, 0.5);
    let dt = courant_dt(&grid)?;
    let period = 2.0 * cells as f64 * dz / C0;
    let steps = (period / dt).round() as u64;
    let mut solver = Solver::new(grid, MaterialMap::vacuum(&grid, dt)?, PeriodicSpec::transverse(), None, 1)?;
    let centre = cells as f64 * dz / 2.0;
    let width = cells as f64 * dz / 10.0;
    let initial: Vec<f64> = (0..grid.len())
        .map(|flat| {
            let [i, j, k] = grid.unravel(flat);
            if k == 0 {
                return 0.0;
            }
            let z = grid.position(Component::Ex, i, j, k)[2];
            let u = (z - centre) / width;
            (-0.5 * u * u).exp()
        })
        .collect();
    solver.fields.e[0].clone_from(&initial);
    solver.set_reference_amplitude();
    solver.run(steps)?;
    let num: f64 = solver.fields.e[0].iter().zip(&initial).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = initial.iter().map(|b| b * b).sum();
    Ok((num / den).sqrt())
}

/// Steps until the overflow guard fires on a randomly seeded PEC cube, if it does.
pub fn guard_fires_within(courant: f64, steps: u64) -> Result<Option<u64>> {
    let grid = GridSpec::cubic([12; 3], 5.0 * NM, courant, [0.0; 3]);
    let dt = courant_dt(&grid)?;
    let periodic = PeriodicSpec::none();
    let mut solver = Solver::new(grid, MaterialMap::vacuum(&grid, dt)?, periodic, None, 1)?;
    randomize_e(&mut solver.fields, &grid, &periodic, 3);
    solver.set_reference_amplitude();
    for _ in 0..steps {
        match solver.step() {
            Ok(()) => {}
            Err(stripfdtd::Error::NumericalInstability { step, .. }) => return Ok(Some(step)),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Field state after `steps` steps of a small silver pair lit by a TFSF box
/// inside CPML, run with the given number of workers.
pub fn pair_fields(workers: usize, steps: u64) -> Result<YeeFields> {
    let dx = 10.0 * NM;
    let grid = GridSpec::cubic([36, 30, 28], dx, 0.5, [0.0; 3]);
    let dt = courant_dt(&grid)?;
    let periodic = PeriodicSpec::none();
    let cpml = Cpml::new(&grid, dt, &CpmlParams::default(), &periodic)?;
    let mut scene = Scene::empty([[0.0; 3], [360.0 * NM, 300.0 * NM, 280.0 * NM]], [false; 3]);
    scene.boxes.push(BoxShape::from_nm([140.0, 200.0], [130.0, 150.0], [130.0, 150.0], SILVER));
    scene.boxes.push(BoxShape::from_nm([160.0, 220.0], [160.0, 180.0], [130.0, 150.0], SILVER));
    let materials = MaterialMap::new(
        &grid,
        voxelize(&scene, &grid),
        vec![Material::Vacuum, Material::Drude(DrudeParams::SILVER)],
        dt,
    )?;
    let wave = PlaneWaveSource::new(
        Direction {
            axis: Axis::X,
            positive: true,
        },
        Axis::Y,
    )?;
    let tfsf = Tfsf::new(&grid, &materials, [11, 11, 11], [25, 19, 17], wave, pulse())?;
    let mut solver = Solver::new(grid, materials, periodic, Some(cpml), workers)?;
    solver.add_source(Source::Tfsf(tfsf));
    solver.run(steps)?;
    Ok(solver.fields)
}

pub fn bitwise_equal(a: &YeeFields, b: &YeeFields) -> bool {
    let same = |x: &[Vec<f64>; 3], y: &[Vec<f64>; 3]| {
        (0..3).all(|c| x[c].len() == y[c].len() && x[c].iter().zip(&y[c]).all(|(p, q)| p.to_bits() == q.to_bits()))
    };
    same(&a.e, &b.e) && same(&a.h, &b.h) && same(&a.j, &b.j)
}
