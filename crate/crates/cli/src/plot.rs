//! SVG rendering of run and sweep outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use plotters::prelude::*;
use stripfdtd::analysis::Spectrum;
use stripfdtd::config::SimulationConfig;
use stripfdtd::monitors::FieldSlice;
use stripfdtd::num_complex::Complex64;
use stripfdtd::output::{self, METADATA_FILE};
use stripfdtd::scenario::{spectrum_file, spectrum_kind};
use stripfdtd::sources::Polarization;

const SIZE: (u32, u32) = (800, 560);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

struct Run {
    dir: PathBuf,
    cfg: SimulationConfig,
    spectrum: Spectrum,
}

fn load_run(dir: &Path) -> anyhow::Result<Run> {
    let cfg = SimulationConfig::load(&dir.join("config.toml"))?;
    let spectrum = output::read_spectrum(
        &dir.join(spectrum_file(cfg.scenario)),
        spectrum_kind(cfg.scenario),
    )?;
    Ok(Run {
        dir: dir.to_path_buf(),
        cfg,
        spectrum,
    })
}

/// Run directories at or below `dir`, skipping nested reference runs.
fn find_runs(dir: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if dir.join(METADATA_FILE).is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    for e in entries {
        find_runs(&e, out)?;
    }
    Ok(())
}

/// Plot everything under `dir`; returns the files written.
pub fn plot_dir(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    find_runs(dir, &mut dirs)?;
    if dirs.is_empty() {
        bail!("no run directories (containing {METADATA_FILE}) under {}", dir.display());
    }
    // Read everything first so a bad file leaves no partial plots behind.
    let runs: Vec<Run> = dirs.iter().map(|d| load_run(d)).collect::<anyhow::Result<_>>()?;
    let mut maps = Vec::new();
    for r in &runs {
        for side in output::list_field_maps(&r.dir)? {
            let slice = output::read_field_map(&side)?;
            maps.push((side.with_extension("svg"), slice, r.cfg.geometry));
        }
    }
    let branches = dir.join("branches.csv");
    let branch_rows = if branches.is_file() {
        Some(read_branches(&branches)?)
    } else {
        None
    };

    let mut written = Vec::new();
    let spectra = dir.join("spectra.svg");
    plot_spectra(&spectra, &runs)?;
    written.push(spectra);
    for (path, slice, geometry) in &maps {
        plot_map(path, slice, geometry)?;
        written.push(path.clone());
    }
    if let Some(rows) = branch_rows {
        let path = dir.join("branches.svg");
        plot_branches(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}

fn label(r: &Run) -> String {
    let mut s = format!("delta {} nm", r.cfg.geometry.delta);
    if r.cfg.scenario.is_periodic() {
        s.push_str(&format!(", {}", r.cfg.source.polarization.label()));
    }
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// All spectra on one chart: s solid, p dashed.
fn plot_spectra(path: &Path, runs: &[Run]) -> anyhow::Result<()> {
    let (x0, x1) = bounds(runs.iter().flat_map(|r| r.spectrum.wavelengths_nm.iter().copied()));
    let (y0, y1) = bounds(runs.iter().flat_map(|r| r.spectrum.values.iter().copied()));
    let ylabel = match runs[0].cfg.scenario {
        stripfdtd::config::ScenarioKind::NearFieldPair => "normalized |E_y|",
        stripfdtd::config::ScenarioKind::FieldMap => "flux (a.u.)",
        _ => "transmission",
    };
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc("wavelength (nm)")
        .y_desc(ylabel)
        .draw()?;
    for (i, r) in runs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = r
            .spectrum
            .wavelengths_nm
            .iter()
            .copied()
            .zip(r.spectrum.values.iter().copied())
            .collect();
        let dashed = r.cfg.scenario.is_periodic() && r.cfg.source.polarization == Polarization::P;
        let style = color.stroke_width(2);
        if dashed {
            chart
                .draw_series(DashedLineSeries::new(pts, 8, 5, style))?
                .label(label(r))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        } else {
            chart
                .draw_series(LineSeries::new(pts, style))?
                .label(label(r))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

fn diverging(v: f64) -> RGBColor {
    let t = v.clamp(-1.0, 1.0);
    let fade = |c: u8, t: f64| (255.0 - (255.0 - c as f64) * t) as u8;
    if t >= 0.0 {
        RGBColor(fade(178, t), fade(24, t), fade(43, t))
    } else {
        RGBColor(fade(33, -t), fade(102, -t), fade(172, -t))
    }
}

/// Real part after removing the global phase, on a symmetric colour range,
/// with the lower strips outlined.
fn plot_map(path: &Path, slice: &FieldSlice, g: &stripfdtd::geometry::UnitCellParams) -> anyhow::Result<()> {
    if slice.xs.is_empty() || slice.ys.is_empty() {
        bail!("empty field map at {} nm", slice.wavelength_nm);
    }
    let sum: Complex64 = slice.values.iter().map(|v| v * v).sum();
    let rot = Complex64::from_polar(1.0, -0.5 * sum.arg());
    let re: Vec<f64> = slice.values.iter().map(|v| (v * rot).re).collect();
    let scale = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let nm = 1e9;
    let dx = if slice.xs.len() > 1 { (slice.xs[1] - slice.xs[0]) * nm } else { 1.0 };
    let dy = if slice.ys.len() > 1 { (slice.ys[1] - slice.ys[0]) * nm } else { 1.0 };
    let x0 = slice.xs[0] * nm - dx / 2.0;
    let x1 = slice.xs[slice.xs.len() - 1] * nm + dx / 2.0;
    let y0 = slice.ys[0] * nm - dy / 2.0;
    let y1 = slice.ys[slice.ys.len() - 1] * nm + dy / 2.0;

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let caption = format!(
        "Re {} at {:.1} nm (|max| {:.3e})",
        slice.component.name(),
        slice.wavelength_nm,
        scale
    );
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 18))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().disable_mesh().x_desc("x (nm)").y_desc("y (nm)").draw()?;
    chart.draw_series(slice.xs.iter().enumerate().flat_map(|(ix, &x)| {
        let re = &re;
        slice.ys.iter().enumerate().map(move |(iy, &y)| {
            let (cx, cy) = (x * nm, y * nm);
            Rectangle::new(
                [(cx - dx / 2.0, cy - dy / 2.0), (cx + dx / 2.0, cy + dy / 2.0)],
                diverging(re[ix * slice.ys.len() + iy] / scale).filled(),
            )
        })
    }))?;
    for (xs, ys) in [(g.strip_a_x(), g.strip_a_y()), (g.strip_b_x(), g.strip_b_y())] {
        chart.draw_series(std::iter::once(Rectangle::new(
            [(xs[0], ys[0]), (xs[1], ys[1])],
            BLACK.stroke_width(2),
        )))?;
    }
    root.present()?;
    Ok(())
}

type BranchRow = (f64, Option<f64>, Option<f64>);

fn read_branches(path: &Path) -> anyhow::Result<Vec<BranchRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parse = |s: &str| -> anyhow::Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            Ok(None)
        } else {
            Ok(Some(s.parse().with_context(|| format!("bad number {s:?} in {}", path.display()))?))
        }
    };
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            bail!("{}: expected 3 columns in {line:?}", path.display());
        }
        let d = parse(cols[0])?.with_context(|| format!("{}: missing delta", path.display()))?;
        rows.push((d, parse(cols[1])?, parse(cols[2])?));
    }
    if rows.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(rows)
}

fn plot_branches(path: &Path, rows: &[BranchRow]) -> anyhow::Result<()> {
    let (x0, x1) = bounds(rows.iter().map(|r| r.0));
    let (y0, y1) = bounds(rows.iter().flat_map(|r| [r.1, r.2]).flatten());
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc("delta (nm)")
        .y_desc("resonance wavelength (nm)")
        .draw()?;
    for (b, color) in [(0usize, PALETTE[0]), (1, PALETTE[1])] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| if b == 0 { r.1 } else { r.2 }.map(|w| (r.0, w)))
            .collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))?
            .label(format!("branch {b}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart.draw_series(pts.into_iter().map(|p| Circle::new(p, 4, color.filled())))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
