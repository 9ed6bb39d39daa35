//! Scenario orchestration: build, run until the fields decay, analyse, write.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    default_prominence, field_symmetry_score, find_extrema, sweep_branches, transmission, FeatureKind,
    ResonanceFeature, Spectrum, SpectrumKind, SweepBranches,
};
use crate::boundaries::{Cpml, PeriodicSpec};
use crate::config::{ScenarioKind, SimulationConfig};
use crate::constants::NM;
use crate::fdtd::Solver;
use crate::geometry::{build_isolated_pair, build_unit_cell, voxelize, Scene, UnitCellParams};
use crate::grid::{courant_dt, Axis, Component, GridSpec};
use crate::materials::{Material, MaterialMap};
use crate::monitors::{
    finalize_flux, probe_spectrum, FieldMap, FieldSlice, FluxPlane, MonitorSet, PointProbe,
};
use crate::output::{self, RunMetadata};
use crate::sources::{Direction, PlaneInjection, PlaneWaveSource, PulseSpec, Source, Tfsf};
use crate::{Error, Result};

/// Total-field margin around the isolated pair, nm.
const TFSF_MARGIN_NM: f64 = 30.0;
/// Scattered-field gap between the TFSF box and the absorber, nm.
const SCATTERED_GAP_NM: f64 = 20.0;
/// Flux plane below the lowest strip surface, nm.
const FLUX_BELOW_NM: f64 = 50.0;
/// Injection plane above the highest strip surface, nm.
const SOURCE_ABOVE_NM: f64 = 100.0;
/// Clearance between the flux/source planes and the absorbers, nm.
const ABSORBER_CLEARANCE_NM: f64 = 100.0;
/// Field-map window beyond the pair, nm.
const MAP_MARGIN_X_NM: f64 = 20.0;
const MAP_MARGIN_Y_NM: f64 = 10.0;
/// Energy sampling interval while the source is active, steps.
const SOURCE_ENERGY_INTERVAL: u64 = 50;

/// A fully assembled simulation plus the roles of its monitors.
pub struct Setup {
    pub solver: Solver,
    pub monitors: MonitorSet,
    pub pulse: PulseSpec,
    pub scene: Scene,
    /// Time after which no source adds energy.
    pub source_end: f64,
    pub probe: Option<usize>,
    pub flux: Option<usize>,
    /// Second plane above the structure (empty-cell runs only).
    pub check_flux: Option<usize>,
    pub map: Option<usize>,
}

fn cells(length_nm: f64, d: f64) -> usize {
    (length_nm / d - 1e-9).ceil().max(0.0) as usize
}

fn material_map(cfg: &SimulationConfig, grid: &GridSpec, scene: &Scene) -> Result<MaterialMap> {
    let dt = courant_dt(grid)?;
    let index = voxelize(scene, grid);
    MaterialMap::new(
        grid,
        index,
        vec![Material::Vacuum, Material::Drude(cfg.material.silver.drude())],
        dt,
    )
}

/// E_y map on the lower-pair mid-plane, symmetric about the pair centre.
fn pair_map(grid: &GridSpec, monitors: &MonitorSet, p: &UnitCellParams, d: f64) -> Result<FieldMap> {
    let half_x = (cells((p.l2 + p.delta) / 2.0 + MAP_MARGIN_X_NM, d)) as f64 * d;
    let half_y = (cells(p.u / 2.0 + p.w2 + MAP_MARGIN_Y_NM, d) as f64 + 0.5) * d;
    FieldMap::covering(
        grid,
        &monitors.freqs,
        Component::Ey,
        [-half_x * NM, half_x * NM],
        [-half_y * NM, half_y * NM],
        p.thickness / 2.0 * NM,
    )
}

fn workers(cfg: &SimulationConfig) -> usize {
    cfg.run.workers.unwrap_or(1)
}

/// Isolated pair, CPML on all faces, TFSF plane wave along +x with E along y.
pub fn near_field_setup(cfg: &SimulationConfig) -> Result<Setup> {
    cfg.validate()?;
    let p = &cfg.geometry;
    let d = cfg.grid.resolution_nm;
    let pml = cfg.boundaries.pml_cells;
    let scene = build_isolated_pair(p)?;
    let margin = TFSF_MARGIN_NM.max(cfg.monitors.probe_offset_nm + 4.0 * d);
    let gap = cells(SCATTERED_GAP_NM, d).max(3);
    let box_x = cells((p.l2 + p.delta) / 2.0 + margin, d);
    let box_y = cells(p.u / 2.0 + p.w2 + margin, d);
    let box_z_lo = cells(margin, d);
    let box_z_hi = cells(p.thickness + margin, d);
    let nlo = [box_x + gap + pml, box_y + gap + pml, box_z_lo + gap + pml];
    let nhi = [box_x + gap + pml, box_y + gap + pml, box_z_hi + gap + pml];
    let dims = [nlo[0] + nhi[0], nlo[1] + nhi[1], nlo[2] + nhi[2]];
    let mut grid = GridSpec::cubic(dims, d * NM, cfg.grid.courant_factor, [0.0; 3]);
    grid.origin = std::array::from_fn(|a| -(nlo[a] as f64) * d * NM);
    grid.validate()?;
    let dt = courant_dt(&grid)?;
    let periodic = PeriodicSpec::none();
    let cpml = Cpml::new(&grid, dt, &cfg.boundaries.cpml([true; 3]), &periodic)?;
    let materials = material_map(cfg, &grid, &scene)?;
    let pulse = cfg.source.pulse()?;
    let lo = [nlo[0] - box_x, nlo[1] - box_y, nlo[2] - box_z_lo];
    let hi = [nlo[0] + box_x, nlo[1] + box_y, nlo[2] + box_z_hi];
    let wave = PlaneWaveSource::new(
        Direction {
            axis: Axis::X,
            positive: true,
        },
        Axis::Y,
    )?;
    let tfsf = Tfsf::new(&grid, &materials, lo, hi, wave, pulse)?;
    tfsf.check_scene(&grid, &scene)?;
    let source_end = tfsf.active_until();
    let mut solver = Solver::new(grid, materials, periodic, Some(cpml), workers(cfg))?;
    solver.add_source(Source::Tfsf(tfsf));
    let mut monitors = MonitorSet::new(cfg.monitors.frequencies()?);
    // E_y probe beyond the end facet of the strip shifted towards +x.
    let probe_at = [
        ((p.l2 + p.delta) / 2.0 + cfg.monitors.probe_offset_nm) * NM,
        (p.u / 2.0 + p.w2 / 2.0) * NM,
        p.thickness / 2.0 * NM,
    ];
    monitors
        .probes
        .push(PointProbe::new(&grid, &monitors.freqs, Component::Ey, probe_at)?);
    let map = pair_map(&grid, &monitors, p, d)?;
    monitors.maps.push(map);
    Ok(Setup {
        solver,
        monitors,
        pulse,
        scene,
        source_end,
        probe: Some(0),
        flux: None,
        check_flux: None,
        map: Some(0),
    })
}

/// Periodic cell at normal incidence from +z. `empty` drops the strips.
pub fn periodic_setup(cfg: &SimulationConfig, empty: bool) -> Result<Setup> {
    cfg.validate()?;
    let p = &cfg.geometry;
    let d = cfg.grid.resolution_nm;
    let pml = cfg.boundaries.pml_cells;
    let full = build_unit_cell(p)?;
    let scene = if empty {
        Scene::empty(full.bounds, full.periodic)
    } else {
        full
    };
    let top = p.upper_z()[1];
    let flux_z = -FLUX_BELOW_NM;
    let source_z = top + SOURCE_ABOVE_NM;
    let k_flux = cells(ABSORBER_CLEARANCE_NM, d) + pml;
    let k_zero = k_flux + cells(FLUX_BELOW_NM, d);
    let k_source = k_zero + cells(source_z, d);
    let nz = k_source + cells(ABSORBER_CLEARANCE_NM, d) + pml;
    let nx = (p.period_x / d).round() as usize;
    let ny = (p.period_y / d).round() as usize;
    let origin = [
        -p.period_x / 2.0 * NM,
        -p.period_y / 2.0 * NM,
        -(k_zero as f64) * d * NM,
    ];
    let grid = GridSpec::cubic([nx, ny, nz], d * NM, cfg.grid.courant_factor, origin);
    grid.validate()?;
    debug_assert!((grid.origin[2] + k_flux as f64 * d * NM - flux_z * NM).abs() < 1e-3 * d * NM);
    let dt = courant_dt(&grid)?;
    let periodic = PeriodicSpec::transverse();
    let cpml = Cpml::new(&grid, dt, &cfg.boundaries.cpml([false, false, true]), &periodic)?;
    let interior = cpml.interior()[2];
    let materials = material_map(cfg, &grid, &scene)?;
    let pulse = cfg.source.pulse()?;
    let plane = PlaneInjection::new(&grid, k_source, interior, cfg.source.polarization, pulse)?;
    let mut solver = Solver::new(grid, materials, periodic, Some(cpml), workers(cfg))?;
    // The injected pulse has left the cell once it has crossed the source-to-flux distance.
    let source_end = pulse.duration() + (source_z - flux_z) * NM / crate::constants::C0;
    solver.add_source(Source::Plane(plane));
    let mut monitors = MonitorSet::new(cfg.monitors.frequencies()?);
    let freqs = monitors.freqs.clone();
    monitors
        .fluxes
        .push(FluxPlane::full(&grid, &freqs, k_flux, -1.0, cfg.monitors.flux_mode)?);
    let mut check_flux = None;
    if empty {
        let k_check = k_zero + cells(top + SOURCE_ABOVE_NM / 2.0, d);
        monitors
            .fluxes
            .push(FluxPlane::full(&grid, &freqs, k_check, -1.0, cfg.monitors.flux_mode)?);
        check_flux = Some(1);
    }
    let mut map = None;
    if !empty {
        monitors.maps.push(pair_map(&grid, &monitors, p, d)?);
        map = Some(0);
    }
    Ok(Setup {
        solver,
        monitors,
        pulse,
        scene,
        source_end,
        probe: None,
        flux: Some(0),
        check_flux,
        map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: u64,
    pub decay_ratio: f64,
    pub decayed: bool,
    pub wall_time_s: f64,
}

/// Step until the field energy falls below `threshold` times its running
/// peak (checked every `interval` steps once the source is done) or until
/// `max_steps`.
pub fn run_to_decay(setup: &mut Setup, threshold: f64, interval: u64, max_steps: u64) -> Result<RunStats> {
    let start = Instant::now();
    let Setup {
        solver,
        monitors,
        source_end,
        ..
    } = setup;
    let mut peak = 0.0f64;
    let mut ratio = 1.0;
    let mut decayed = false;
    let report_every = 10_000;
    while solver.fields.step_index < max_steps {
        solver.step()?;
        solver.install(|| monitors.accumulate(&solver.grid, &solver.fields));
        let n = solver.fields.step_index;
        let active = solver.fields.time_e() < *source_end;
        let every = if active { SOURCE_ENERGY_INTERVAL } else { interval };
        if n % every == 0 {
            let e = solver.energy();
            peak = peak.max(e);
            if !active && peak > 0.0 {
                ratio = e / peak;
                if ratio < threshold {
                    decayed = true;
                    break;
                }
            }
        }
        if n % report_every == 0 {
            log::info!("step {n}: energy ratio {ratio:.3e}");
        }
    }
    if !monitors.is_finite() {
        return Err(Error::NumericalInstability {
            step: solver.fields.step_index,
            detail: "non-finite DFT accumulator".into(),
        });
    }
    Ok(RunStats {
        steps: solver.fields.step_index,
        decay_ratio: ratio,
        decayed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// A resonance with the mode symmetry of its field map, where available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredFeature {
    pub feature: ResonanceFeature,
    pub symmetry: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub metadata: RunMetadata,
    /// Probe response, transmission, or reference self-transmission.
    pub spectrum: Spectrum,
    pub flux: Option<Spectrum>,
    pub reference_flux: Option<Spectrum>,
    pub features: Vec<ScoredFeature>,
    /// Scores at the configured map wavelengths.
    pub map_scores: Vec<(f64, Option<f64>)>,
    pub maps: Vec<FieldSlice>,
}

impl RunResult {
    pub fn peaks(&self) -> impl Iterator<Item = &ScoredFeature> {
        self.features.iter().filter(|f| f.feature.kind == FeatureKind::Peak)
    }

    pub fn dips(&self) -> impl Iterator<Item = &ScoredFeature> {
        self.features.iter().filter(|f| f.feature.kind == FeatureKind::Dip)
    }
}

fn nearest_index(values: &[f64], x: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Name of the main spectrum file per scenario.
pub fn spectrum_file(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::NearFieldPair => "probe.csv",
        ScenarioKind::PeriodicTransmission | ScenarioKind::Reference => "transmission.csv",
        ScenarioKind::FieldMap => "flux.csv",
    }
}

pub fn spectrum_kind(kind: ScenarioKind) -> SpectrumKind {
    match kind {
        ScenarioKind::NearFieldPair => SpectrumKind::NearField,
        ScenarioKind::PeriodicTransmission | ScenarioKind::Reference => SpectrumKind::Transmission,
        ScenarioKind::FieldMap => SpectrumKind::Flux,
    }
}

fn metadata(cfg: &SimulationConfig, setup: &Setup, stats: &RunStats, normalization: &str) -> RunMetadata {
    RunMetadata {
        scenario: cfg.scenario.name().into(),
        config_hash: cfg.config_hash(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        steps: stats.steps,
        wall_time_s: stats.wall_time_s,
        decay_ratio: stats.decay_ratio,
        decayed: stats.decayed,
        dt_s: setup.solver.dt(),
        grid_cells: setup.solver.grid.dims(),
        resolution_nm: cfg.grid.resolution_nm,
        delta_nm: cfg.geometry.delta,
        polarization: cfg
            .scenario
            .is_periodic()
            .then(|| cfg.source.polarization.label().to_string()),
        normalization: normalization.into(),
        files: Vec::new(),
        reference: None,
    }
}

fn run_setup(cfg: &SimulationConfig, setup: &mut Setup) -> Result<RunStats> {
    let stats = run_to_decay(
        setup,
        cfg.run.decay_threshold,
        cfg.run.decay_check_interval,
        cfg.run.max_steps,
    )?;
    if !stats.decayed {
        log::warn!(
            "fields did not decay below {:e} within {} steps (ratio {:.3e})",
            cfg.run.decay_threshold,
            cfg.run.max_steps,
            stats.decay_ratio
        );
    }
    Ok(stats)
}

/// Empty-cell reference run. Its main spectrum is the flux at the
/// transmission plane over the flux at a plane just below the source.
fn run_reference(cfg: &SimulationConfig, dir: &Path) -> Result<(RunMetadata, Spectrum, Spectrum)> {
    let mut ref_cfg = cfg.clone();
    ref_cfg.scenario = ScenarioKind::Reference;
    let mut setup = periodic_setup(&ref_cfg, true)?;
    let stats = run_setup(&ref_cfg, &mut setup)?;
    let freqs = &setup.monitors.freqs;
    let flux = finalize_flux(&setup.monitors.fluxes[setup.flux.expect("flux plane")], freqs)?;
    let check = finalize_flux(
        &setup.monitors.fluxes[setup.check_flux.expect("check plane")],
        freqs,
    )?;
    let ratio = transmission(&flux, &check)?;
    output::ensure_dir(dir)?;
    output::write_spectrum(&dir.join("flux.csv"), &flux)?;
    output::write_spectrum(&dir.join("check_flux.csv"), &check)?;
    output::write_spectrum(&dir.join("transmission.csv"), &ratio)?;
    output::write_text(&dir.join("config.toml"), &ref_cfg.to_toml_string())?;
    let mut meta = metadata(
        &ref_cfg,
        &setup,
        &stats,
        "flux at the transmission plane over flux at a plane below the source (empty cell)",
    );
    meta.files = ["flux.csv", "check_flux.csv", "transmission.csv", "config.toml"]
        .map(String::from)
        .to_vec();
    meta.write(dir)?;
    Ok((meta, flux, ratio))
}

/// Run one scenario and write its outputs to `cfg.run.output_dir`.
pub fn run_scenario(cfg: &SimulationConfig) -> Result<RunResult> {
    cfg.validate()?;
    let dir = cfg.run.output_dir.clone();
    output::ensure_dir(&dir)?;
    log::info!(
        "{} (delta {} nm, {} nm cells) -> {}",
        cfg.scenario.name(),
        cfg.geometry.delta,
        cfg.grid.resolution_nm,
        dir.display()
    );
    if cfg.scenario == ScenarioKind::Reference {
        let (meta, flux, ratio) = run_reference(cfg, &dir)?;
        let features = find_extrema(&ratio, prominence(cfg, &ratio))
            .into_iter()
            .map(|feature| ScoredFeature {
                feature,
                symmetry: None,
            })
            .collect();
        let result = RunResult {
            dir: dir.clone(),
            metadata: meta,
            spectrum: ratio,
            flux: Some(flux),
            reference_flux: None,
            features,
            map_scores: Vec::new(),
            maps: Vec::new(),
        };
        write_report(&dir, cfg, &result)?;
        return Ok(result);
    }

    let mut setup = match cfg.scenario {
        ScenarioKind::NearFieldPair => near_field_setup(cfg)?,
        _ => periodic_setup(cfg, false)?,
    };
    let stats = run_setup(cfg, &mut setup)?;
    let freqs = setup.monitors.freqs.clone();
    let mut files = vec!["config.toml".to_string()];
    output::write_text(&dir.join("config.toml"), &cfg.to_toml_string())?;

    let mut flux = None;
    let mut reference = None;
    let mut reference_flux = None;
    let (spectrum, normalization) = match cfg.scenario {
        ScenarioKind::NearFieldPair => {
            let probe = &setup.monitors.probes[setup.probe.expect("probe")];
            (
                probe_spectrum(probe, &freqs, &setup.pulse)?,
                "|E_y probe DFT| / |incident pulse spectrum|",
            )
        }
        ScenarioKind::PeriodicTransmission => {
            let f = finalize_flux(&setup.monitors.fluxes[setup.flux.expect("flux")], &freqs)?;
            let (meta, ref_flux, _) = run_reference(cfg, &dir.join("reference"))?;
            let t = transmission(&f, &ref_flux)?;
            output::write_spectrum(&dir.join("flux.csv"), &f)?;
            files.push("flux.csv".into());
            flux = Some(f);
            reference = Some(Box::new(meta));
            reference_flux = Some(ref_flux);
            (
                t,
                "flux through the transmission plane over the same plane in an empty-cell run with identical source and monitors",
            )
        }
        ScenarioKind::FieldMap => {
            let f = finalize_flux(&setup.monitors.fluxes[setup.flux.expect("flux")], &freqs)?;
            flux = Some(f.clone());
            (f, "raw flux through the transmission plane (arbitrary units)")
        }
        ScenarioKind::Reference => unreachable!("handled above"),
    };
    let main_file = spectrum_file(cfg.scenario);
    output::write_spectrum(&dir.join(main_file), &spectrum)?;
    if !files.iter().any(|f| f == main_file) {
        files.push(main_file.into());
    }

    // Features and the maps needed to classify them.
    let threshold = prominence(cfg, &spectrum);
    let raw = find_extrema(&spectrum, threshold);
    let map = setup.map.map(|m| &setup.monitors.maps[m]);
    let grid = setup.solver.grid;
    let mut wanted: Vec<usize> = raw
        .iter()
        .map(|f| nearest_index(freqs.wavelengths_nm(), f.wavelength))
        .collect();
    let map_wavelengths: Vec<f64> = cfg
        .monitors
        .map_wavelengths_nm
        .iter()
        .copied()
        .filter(|&w| w >= freqs.wavelengths_nm()[0] && w <= freqs.wavelengths_nm()[freqs.len() - 1])
        .collect();
    wanted.extend(
        map_wavelengths
            .iter()
            .map(|&w| nearest_index(freqs.wavelengths_nm(), w)),
    );
    wanted.sort_unstable();
    wanted.dedup();
    let mut maps = Vec::new();
    if let Some(m) = map {
        for &f in &wanted {
            let slice = m.slice(&grid, &freqs, f);
            let side = output::write_field_map(&dir.join(output::MAP_DIR), &slice)?;
            let stem = side.file_stem().expect("stem").to_string_lossy().to_string();
            for suffix in [".json", "_re.csv", "_im.csv"] {
                files.push(format!("{}/{stem}{suffix}", output::MAP_DIR));
            }
            maps.push(slice);
        }
    }
    let score_at = |w: f64| -> Option<f64> {
        let slice = maps
            .iter()
            .min_by(|a, b| (a.wavelength_nm - w).abs().total_cmp(&(b.wavelength_nm - w).abs()))?;
        if (slice.wavelength_nm - w).abs() > 1.0 {
            return None;
        }
        match field_symmetry_score(slice, &cfg.geometry) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("symmetry score at {w} nm unavailable: {e}");
                None
            }
        }
    };
    let features: Vec<ScoredFeature> = raw
        .into_iter()
        .map(|feature| ScoredFeature {
            feature,
            symmetry: score_at(feature.wavelength),
        })
        .collect();
    let map_scores = map_wavelengths.iter().map(|&w| (w, score_at(w))).collect();

    let mut meta = metadata(cfg, &setup, &stats, normalization);
    meta.reference = reference;
    files.extend(["features.csv", "report.txt"].map(String::from));
    meta.files = files;
    let result = RunResult {
        dir: dir.clone(),
        metadata: meta,
        spectrum,
        flux,
        reference_flux,
        features,
        map_scores,
        maps,
    };
    write_report(&dir, cfg, &result)?;
    result.metadata.write(&dir)?;
    Ok(result)
}

fn prominence(cfg: &SimulationConfig, s: &Spectrum) -> f64 {
    cfg.monitors.prominence.unwrap_or_else(|| default_prominence(s))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|s| format!("{s:.4}")).unwrap_or_default()
}

/// `features.csv` plus a plain-text summary.
fn write_report(dir: &Path, cfg: &SimulationConfig, r: &RunResult) -> Result<()> {
    output::write_text(&dir.join("features.csv"), &features_csv(&r.features))?;
    let mut text = format!(
        "scenario: {}\ndelta: {} nm\nresolution: {} nm\n",
        cfg.scenario.name(),
        cfg.geometry.delta,
        cfg.grid.resolution_nm
    );
    if cfg.scenario.is_periodic() {
        text.push_str(&format!("polarization: {}\n", cfg.source.polarization.label()));
    }
    text.push_str(&format!(
        "steps: {}\ndecayed: {} (energy ratio {:.3e})\nnormalization: {}\n\n",
        r.metadata.steps, r.metadata.decayed, r.metadata.decay_ratio, r.metadata.normalization
    ));
    text.push_str(&features_text(&r.features));
    for (w, s) in &r.map_scores {
        text.push_str(&format!("symmetry score at {w} nm: {}\n", fmt_opt(*s)));
    }
    output::write_text(&dir.join("report.txt"), &text)
}

pub fn features_csv(features: &[ScoredFeature]) -> String {
    let mut out = String::from("kind,wavelength_nm,value,prominence,width_nm,symmetry_score\n");
    for f in features {
        let k = match f.feature.kind {
            FeatureKind::Peak => "peak",
            FeatureKind::Dip => "dip",
        };
        out.push_str(&format!(
            "{k},{},{},{},{},{}\n",
            f.feature.wavelength,
            f.feature.value,
            f.feature.prominence,
            f.feature.width,
            f.symmetry.map(|s| s.to_string()).unwrap_or_default()
        ));
    }
    out
}

fn features_text(features: &[ScoredFeature]) -> String {
    if features.is_empty() {
        return "no features above the prominence threshold\n".into();
    }
    let mut out = String::new();
    for f in features {
        let mode = match f.symmetry {
            Some(s) if s > 0.0 => " (symmetric)",
            Some(_) => " (asymmetric)",
            None => "",
        };
        out.push_str(&format!(
            "{:?} at {:.2} nm: value {:.4}, prominence {:.4}, width {:.1} nm, symmetry {}{mode}\n",
            f.feature.kind,
            f.feature.wavelength,
            f.feature.value,
            f.feature.prominence,
            f.feature.width,
            fmt_opt(f.symmetry)
        ));
    }
    out
}

/// Wavelengths of the features a sweep tracks: peaks of near-field
/// spectra, dips of transmission spectra.
fn tracked(kind: ScenarioKind, features: &[ScoredFeature]) -> Vec<f64> {
    let want = match kind {
        ScenarioKind::NearFieldPair => FeatureKind::Peak,
        _ => FeatureKind::Dip,
    };
    features
        .iter()
        .filter(|f| f.feature.kind == want)
        .map(|f| f.feature.wavelength)
        .collect()
}

#[derive(Debug)]
pub struct SweepResult {
    pub dir: PathBuf,
    /// Per value: the run or the error that stopped it.
    pub runs: Vec<(f64, Result<RunResult>)>,
    pub branches: Result<SweepBranches>,
}

pub fn sweep_dir_name(delta: f64) -> String {
    format!("delta_{delta}")
}

/// One run per shift value, then branch tracking over the results.
pub fn sweep(cfg: &SimulationConfig, deltas: &[f64]) -> Result<SweepResult> {
    if deltas.is_empty() {
        return Err(Error::Configuration("sweep needs at least one delta".into()));
    }
    let root = cfg.run.output_dir.clone();
    output::ensure_dir(&root)?;
    let mut runs = Vec::new();
    for &delta in deltas {
        let mut c = cfg.clone();
        c.geometry.delta = delta;
        c.run.output_dir = root.join(sweep_dir_name(delta));
        let r = run_scenario(&c);
        if let Err(e) = &r {
            log::error!("delta {delta} nm failed: {e}");
        }
        runs.push((delta, r));
    }
    let points: Vec<(f64, Vec<f64>)> = runs
        .iter()
        .filter_map(|(d, r)| r.as_ref().ok().map(|r| (*d, tracked(cfg.scenario, &r.features))))
        .collect();
    let branches = sweep_report(&root, cfg.scenario, &points, &runs_summary(&runs));
    Ok(SweepResult {
        dir: root,
        runs,
        branches,
    })
}

fn runs_summary(runs: &[(f64, Result<RunResult>)]) -> String {
    let mut s = String::new();
    for (d, r) in runs {
        match r {
            Ok(r) => s.push_str(&format!(
                "delta {d} nm: {} steps, decayed {}\n{}",
                r.metadata.steps,
                r.metadata.decayed,
                features_text(&r.features)
            )),
            Err(e) => s.push_str(&format!("delta {d} nm: FAILED: {e}\n")),
        }
    }
    s
}

/// Track branches and write `branches.csv` and `report.txt` under `root`.
fn sweep_report(
    root: &Path,
    kind: ScenarioKind,
    points: &[(f64, Vec<f64>)],
    runs: &str,
) -> Result<SweepBranches> {
    let mut text = format!("sweep over delta ({})\n\n{runs}\n", kind.name());
    let branches = if points.len() == 1 {
        // A single value degenerates to one run's features.
        let (d, w) = &points[0];
        let mut w = w.clone();
        w.sort_by(|a, b| a.total_cmp(b));
        if w.len() > 2 {
            Err(Error::AmbiguousSweep(vec![*d]))
        } else {
            let b0 = w.first().copied();
            let b1 = w.last().copied();
            Ok(SweepBranches {
                deltas: vec![*d],
                branches: [vec![b0], vec![b1]],
                crossing: None,
            })
        }
    } else {
        sweep_branches(points)
    };
    match &branches {
        Ok(b) => {
            let mut csv = String::from("delta_nm,branch0_nm,branch1_nm\n");
            for (i, d) in b.deltas.iter().enumerate() {
                csv.push_str(&format!(
                    "{d},{},{}\n",
                    b.branches[0][i].map(|v| v.to_string()).unwrap_or_default(),
                    b.branches[1][i].map(|v| v.to_string()).unwrap_or_default()
                ));
            }
            output::write_text(&root.join("branches.csv"), &csv)?;
            text.push_str(&match b.crossing {
                Some(c) => format!("branch crossing at delta = {c:.2} nm\n"),
                None => "no branch crossing\n".into(),
            });
        }
        Err(e) => text.push_str(&format!("branch tracking failed: {e}\n")),
    }
    output::write_text(&root.join("report.txt"), &text)?;
    branches
}

#[derive(Debug)]
pub enum Analysis {
    Run {
        features: Vec<ScoredFeature>,
    },
    Sweep {
        branches: SweepBranches,
    },
}

/// Recompute features (and branches, for a sweep directory) from files on disk.
pub fn analyze_dir(dir: &Path) -> Result<Analysis> {
    if dir.join(output::METADATA_FILE).is_file() {
        return analyze_run(dir).map(|(_, features)| Analysis::Run { features });
    }
    let mut subdirs: Vec<(f64, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|source| Error::Read {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(output::METADATA_FILE).is_file())
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?.strip_prefix("delta_")?.parse().ok()?;
            Some((name, p))
        })
        .collect();
    if subdirs.is_empty() {
        return Err(Error::Malformed {
            path: dir.to_path_buf(),
            detail: "neither a run directory nor a sweep directory".into(),
        });
    }
    subdirs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points = Vec::new();
    let mut summary = String::new();
    let mut kind = ScenarioKind::NearFieldPair;
    for (d, p) in &subdirs {
        let (k, features) = analyze_run(p)?;
        kind = k;
        summary.push_str(&format!("delta {d} nm:\n{}", features_text(&features)));
        points.push((*d, tracked(k, &features)));
    }
    sweep_report(dir, kind, &points, &summary).map(|branches| Analysis::Sweep { branches })
}

fn analyze_run(dir: &Path) -> Result<(ScenarioKind, Vec<ScoredFeature>)> {
    let cfg_path = dir.join("config.toml");
    let cfg = SimulationConfig::load(&cfg_path)?;
    let meta = RunMetadata::read(dir)?;
    let spectrum = output::read_spectrum(&dir.join(spectrum_file(cfg.scenario)), spectrum_kind(cfg.scenario))?;
    let mut maps = Vec::new();
    for side in output::list_field_maps(dir)? {
        maps.push(output::read_field_map(&side)?);
    }
    let features: Vec<ScoredFeature> = find_extrema(&spectrum, prominence(&cfg, &spectrum))
        .into_iter()
        .map(|feature| {
            let symmetry = maps
                .iter()
                .filter(|m| (m.wavelength_nm - feature.wavelength).abs() <= 1.0)
                .min_by(|a, b| {
                    (a.wavelength_nm - feature.wavelength)
                        .abs()
                        .total_cmp(&(b.wavelength_nm - feature.wavelength).abs())
                })
                .and_then(|m| field_symmetry_score(m, &cfg.geometry).ok());
            ScoredFeature { feature, symmetry }
        })
        .collect();
    let map_scores = cfg
        .monitors
        .map_wavelengths_nm
        .iter()
        .map(|&w| {
            let s = maps
                .iter()
                .filter(|m| (m.wavelength_nm - w).abs() <= 1.0)
                .min_by(|a, b| (a.wavelength_nm - w).abs().total_cmp(&(b.wavelength_nm - w).abs()))
                .and_then(|m| field_symmetry_score(m, &cfg.geometry).ok());
            (w, s)
        })
        .collect();
    let result = RunResult {
        dir: dir.to_path_buf(),
        metadata: meta,
        spectrum,
        flux: None,
        reference_flux: None,
        features: features.clone(),
        map_scores,
        maps: Vec::new(),
    };
    write_report(dir, &cfg, &result)?;
    Ok((cfg.scenario, features))
}
