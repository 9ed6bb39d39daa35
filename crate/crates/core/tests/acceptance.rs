//! Acceptance suite: one line per criterion.
//!
//! The property checks (6a-6g) always run. The full-size scenario criteria
//! (1-5 and 6h) take hours on a single core and run only with
//! `STRIPFDTD_ACCEPTANCE=full`; their outputs go to `STRIPFDTD_ACCEPTANCE_DIR`
//! (default: a directory under the cargo target dir).

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use stripfdtd::boundaries::PeriodicSpec;
use stripfdtd::config::{ScenarioKind, SimulationConfig};
use stripfdtd::materials::DrudeParams;
use stripfdtd::scenario::{run_scenario, sweep, RunResult, ScoredFeature, SweepResult};
use stripfdtd::sources::Polarization;

const SWEEP: [f64; 5] = [45.0, 55.0, 65.0, 75.0, 85.0];
/// Wavelength tolerance on every quantitative target.
const WAVELENGTH_TOL: f64 = 0.05;
const NEAR_LOW_NM: f64 = 686.6;
const NEAR_HIGH_NM: f64 = 736.6;
const DEGENERATE_NM: f64 = 712.0;
const EIT_PEAK_NM: f64 = 687.2;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, f: impl FnOnce() -> stripfdtd::Result<Outcome>) {
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome::Fail(format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:<3} {tag}  {what}: {detail} [{secs:.0} s]");
    }
}

fn within(x: f64, target: f64) -> bool {
    (x - target).abs() <= WAVELENGTH_TOL * target
}

fn peaks(r: &RunResult) -> Vec<ScoredFeature> {
    let mut v: Vec<_> = r.peaks().copied().collect();
    v.sort_by(|a, b| a.feature.wavelength.total_cmp(&b.feature.wavelength));
    v
}

fn nearest<'a>(fs: &'a [ScoredFeature], target: f64) -> Option<&'a ScoredFeature> {
    fs.iter()
        .min_by(|a, b| (a.feature.wavelength - target).abs().total_cmp(&(b.feature.wavelength - target).abs()))
}

fn describe(fs: &[ScoredFeature]) -> String {
    let items: Vec<String> = fs
        .iter()
        .map(|f| match f.symmetry {
            Some(s) => format!("{:.1} nm (sym {s:+.2})", f.feature.wavelength),
            None => format!("{:.1} nm", f.feature.wavelength),
        })
        .collect();
    if items.is_empty() {
        "none".into()
    } else {
        items.join(", ")
    }
}

fn run_at(sweep: &SweepResult, delta: f64) -> stripfdtd::Result<&RunResult> {
    let (_, r) = sweep
        .runs
        .iter()
        .find(|(d, _)| *d == delta)
        .ok_or_else(|| stripfdtd::Error::Configuration(format!("no sweep run at {delta} nm")))?;
    r.as_ref().map_err(|e| stripfdtd::Error::Configuration(format!("run at {delta} nm failed: {e}")))
}

/// Lower and upper near-field peaks, each the one nearest its target.
fn peak_pair(r: &RunResult) -> Option<(ScoredFeature, ScoredFeature)> {
    let ps = peaks(r);
    let lo = *nearest(&ps, NEAR_LOW_NM)?;
    let hi = *nearest(&ps, NEAR_HIGH_NM)?;
    (lo.feature.wavelength < hi.feature.wavelength).then_some((lo, hi))
}

fn criterion_1(s: &SweepResult) -> stripfdtd::Result<Outcome> {
    let r45 = run_at(s, 45.0)?;
    let r85 = run_at(s, 85.0)?;
    let detail = format!("peaks at 45 nm: {}; at 85 nm: {}", describe(&peaks(r45)), describe(&peaks(r85)));
    let (Some((lo45, hi45)), Some((lo85, hi85))) = (peak_pair(r45), peak_pair(r85)) else {
        return Ok(Outcome::Fail(format!("{detail}; two peaks not found")));
    };
    let placed = within(lo45.feature.wavelength, NEAR_LOW_NM) && within(hi45.feature.wavelength, NEAR_HIGH_NM);
    let swapped = match (lo45.symmetry, hi45.symmetry, lo85.symmetry, hi85.symmetry) {
        (Some(a), Some(b), Some(c), Some(d)) => a * b < 0.0 && c * d < 0.0 && a * c < 0.0,
        _ => false,
    };
    Ok(judge(placed && swapped, format!("{detail}; positions ok: {placed}, identities swapped: {swapped}")))
}

/// Midpoint of the two branches at 65 nm, if both exist.
fn degenerate_centre(s: &SweepResult) -> stripfdtd::Result<Option<(f64, f64)>> {
    let b = s.branches.as_ref().map_err(|e| stripfdtd::Error::Configuration(e.to_string()))?;
    let i = b.deltas.iter().position(|&d| d == 65.0);
    Ok(i.and_then(|i| Some(((b.branches[0][i]? + b.branches[1][i]?) / 2.0, b.branches[1][i]? - b.branches[0][i]?))))
}

fn criterion_2(s: &SweepResult) -> stripfdtd::Result<Outcome> {
    let b = match &s.branches {
        Ok(b) => b,
        Err(e) => return Ok(Outcome::Fail(format!("branch tracking failed: {e}"))),
    };
    let Some((centre, sep)) = degenerate_centre(s)? else {
        return Ok(Outcome::Fail(format!("no branch pair at 65 nm: {:?}", b.branches)));
    };
    let crossing_ok = b.crossing.is_some_and(|x| (x - 65.0).abs() <= 7.0);
    let ok = sep.abs() <= 10.0 && within(centre, DEGENERATE_NM) && crossing_ok;
    Ok(judge(
        ok,
        format!("separation {sep:.1} nm, centre {centre:.1} nm, crossing {:?}", b.crossing),
    ))
}

/// The peak with the largest margin over the nearest dip on each side.
fn eit_window(r: &RunResult) -> Option<(ScoredFeature, f64)> {
    let dips: Vec<_> = r.dips().collect();
    r.peaks()
        .filter_map(|p| {
            let w = p.feature.wavelength;
            let left = dips.iter().filter(|d| d.feature.wavelength < w).max_by(|a, b| a.feature.wavelength.total_cmp(&b.feature.wavelength))?;
            let right = dips.iter().filter(|d| d.feature.wavelength > w).min_by(|a, b| a.feature.wavelength.total_cmp(&b.feature.wavelength))?;
            let margin = p.feature.value - left.feature.value.max(right.feature.value);
            Some((*p, margin))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

fn criterion_3(s_run: &RunResult, p_run: &RunResult) -> Outcome {
    let Some((peak, margin)) = eit_window(s_run) else {
        return Outcome::Fail(format!("s: no peak between two dips ({})", describe(&s_run.features)));
    };
    let w = peak.feature.wavelength;
    let p_dips: Vec<_> = p_run.dips().copied().collect();
    let single = p_dips.len() == 1 && (p_dips[0].feature.wavelength - w).abs() <= 5.0;
    let ok = margin >= 0.1 && within(w, EIT_PEAK_NM) && single;
    judge(
        ok,
        format!(
            "s peak {w:.1} nm, margin over dips {margin:.3}; p dips: {}",
            describe(&p_dips)
        ),
    )
}

fn criterion_4(s_run: &RunResult, sweep: &SweepResult) -> stripfdtd::Result<Outcome> {
    let Some((peak, _)) = eit_window(s_run) else {
        return Ok(Outcome::Fail("no s-polarization window".into()));
    };
    let Some((centre, _)) = degenerate_centre(sweep)? else {
        return Ok(Outcome::Fail("no near-field resonance at 65 nm".into()));
    };
    let shift = centre - peak.feature.wavelength;
    Ok(judge(
        shift > 5.0,
        format!("far-field {:.1} nm, near-field {centre:.1} nm, blue shift {shift:.1} nm", peak.feature.wavelength),
    ))
}

fn criterion_5(s_run: &RunResult, p_run: &RunResult) -> Outcome {
    let Some((peak, _)) = eit_window(s_run) else {
        return Outcome::Fail("no s-polarization window".into());
    };
    let w = peak.feature.wavelength;
    let p_score = p_run
        .map_scores
        .iter()
        .find(|(l, _)| (l - w).abs() <= 1.0)
        .and_then(|(_, s)| *s);
    match (peak.symmetry, p_score) {
        (Some(s), Some(p)) => judge(s < -0.5 && p > 0.5, format!("at {w:.1} nm: s {s:+.3}, p {p:+.3}")),
        other => Outcome::Fail(format!("missing scores at {w:.1} nm: {other:?}")),
    }
}

fn dominant_peak(r: &RunResult) -> Option<f64> {
    r.peaks()
        .max_by(|a, b| a.feature.prominence.total_cmp(&b.feature.prominence))
        .map(|p| p.feature.wavelength)
}

/// Borrow a finished run, turning an earlier failure into this criterion's error.
fn ok<T, E: std::fmt::Display>(r: &Result<T, E>) -> stripfdtd::Result<&T> {
    r.as_ref().map_err(|e| stripfdtd::Error::Configuration(e.to_string()))
}

fn config(kind: ScenarioKind, resolution: f64, delta: f64, out: PathBuf) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(kind);
    cfg.grid.resolution_nm = resolution;
    cfg.geometry.delta = delta;
    cfg.run.output_dir = out;
    cfg
}

fn full_suite(report: &mut Report, root: &Path) {
    let near = sweep(
        &config(ScenarioKind::NearFieldPair, 5.0, 45.0, root.join("near_field_sweep")),
        &SWEEP,
    );
    let s_cfg = config(ScenarioKind::PeriodicTransmission, 5.0, 65.0, root.join("periodic_s"));
    let s_run = run_scenario(&s_cfg);
    let p_run = s_run.as_ref().map_err(|e| e.to_string()).and_then(|s| {
        let mut cfg = config(ScenarioKind::PeriodicTransmission, 5.0, 65.0, root.join("periodic_p"));
        cfg.source.polarization = Polarization::P;
        cfg.monitors.map_wavelengths_nm = eit_window(s).map(|(p, _)| vec![p.feature.wavelength]).unwrap_or_default();
        run_scenario(&cfg).map_err(|e| e.to_string())
    });

    report.check("1", "mode swap between 45 and 85 nm", || criterion_1(ok(&near)?));
    report.check("2", "degeneracy at 65 nm", || criterion_2(ok(&near)?));
    report.check("3", "polarization switching at 65 nm", || {
        Ok(criterion_3(ok(&s_run)?, ok(&p_run)?))
    });
    report.check("4", "far-field blue shift", || {
        criterion_4(ok(&s_run)?, ok(&near)?)
    });
    report.check("5", "mode identification", || {
        Ok(criterion_5(ok(&s_run)?, ok(&p_run)?))
    });
    report.check("6h", "resonance shift on halving the cell size", || {
        let coarse = run_at(ok(&near)?, 45.0)?;
        let fine = run_scenario(&config(ScenarioKind::NearFieldPair, 2.5, 45.0, root.join("near_field_2.5nm")))?;
        match (dominant_peak(coarse), dominant_peak(&fine)) {
            (Some(a), Some(b)) => {
                let shift = (b - a).abs() / a;
                Ok(judge(shift < 0.02, format!("5 nm: {a:.1} nm, 2.5 nm: {b:.1} nm, shift {:.2}%", 100.0 * shift)))
            }
            other => Ok(Outcome::Fail(format!("missing peak: {other:?}"))),
        }
    });
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut report = Report { failed: 0 };

    report.check("6a", "Drude reflectance vs Fresnel at 2.5 nm", || {
        let r = drude_reflectance(2.5, DrudeParams::SILVER, 41)?;
        let worst = r.worst_relative_error();
        Ok(judge(worst < 0.02, format!("worst relative error {:.3}%", 100.0 * worst)))
    });
    report.check("6b", "empty-cell transmission", || {
        let tmp = std::env::temp_dir().join(format!("stripfdtd-acceptance-6b-{}", std::process::id()));
        let r = run_scenario(&config(ScenarioKind::Reference, 10.0, 65.0, tmp.clone()));
        let _ = std::fs::remove_dir_all(&tmp);
        let r = r?;
        let worst = r.spectrum.values.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
        Ok(judge(worst <= 1e-3, format!("max |T - 1| = {worst:.2e}")))
    });
    report.check("6c", "CPML reflection", || {
        let db = cpml_reflection_db(10, 5.0)?;
        Ok(judge(db < -50.0, format!("{db:.1} dB")))
    });
    report.check("6d", "TFSF leakage", || {
        let c = tfsf_check(40, 10.0, 1)?;
        Ok(judge(
            c.leakage_db < -40.0 && c.incident_error < 0.01,
            format!("leakage {:.1} dB, incident error {:.2e}", c.leakage_db, c.incident_error),
        ))
    });
    report.check("6e", "div H drift", || {
        let a = div_h_drift(12, PeriodicSpec::none(), 1000)?;
        let b = div_h_drift(12, PeriodicSpec::all(), 1000)?;
        let worst = a.max(b);
        Ok(judge(worst < 1e-13, format!("{worst:.2e} relative")))
    });
    report.check("6f", "PEC cavity energy band over 1e4 steps", || {
        let band = pec_energy_band(10, 10_000)?;
        Ok(judge(band < 1e-3, format!("{band:.2e} relative")))
    });
    report.check("6g", "bit-identical fields across worker counts", || {
        let one = pair_fields(1, 500)?;
        let same = [2, 3].into_iter().map(|w| pair_fields(w, 500)).collect::<stripfdtd::Result<Vec<_>>>()?;
        let ok = same.iter().all(|f| bitwise_equal(&one, f));
        Ok(judge(ok, "1 vs 2 and 3 workers".into()))
    });

    if std::env::var("STRIPFDTD_ACCEPTANCE").as_deref() == Ok("full") {
        let root = std::env::var_os("STRIPFDTD_ACCEPTANCE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"));
        println!("scenario outputs in {}", root.display());
        full_suite(&mut report, &root);
    } else {
        for (id, what) in [
            ("1", "mode swap between 45 and 85 nm"),
            ("2", "degeneracy at 65 nm"),
            ("3", "polarization switching at 65 nm"),
            ("4", "far-field blue shift"),
            ("5", "mode identification"),
            ("6h", "resonance shift on halving the cell size"),
        ] {
            report.check(id, what, || Ok(Outcome::Skip("set STRIPFDTD_ACCEPTANCE=full to run".into())));
        }
    }

    if report.failed > 0 {
        println!("{} criteria failed", report.failed);
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
