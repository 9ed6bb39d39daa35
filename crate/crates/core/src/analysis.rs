//! Spectra, resonance finding, sweep branch tracking and mode classification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::NM;
use crate::geometry::UnitCellParams;
use crate::monitors::FieldSlice;
use crate::{Error, Result};

/// Default prominence threshold as a fraction of the spectrum's range.
pub const DEFAULT_PROMINENCE_FRACTION: f64 = 0.05;

/// Reference values below this fraction of the reference peak are rejected.
pub const REFERENCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    NearField,
    Transmission,
    /// Raw power through a flux plane, arbitrary units.
    Flux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub wavelengths_nm: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if wavelengths_nm.len() != values.len() {
            return Err(Error::Configuration(format!(
                "spectrum has {} wavelengths but {} values",
                wavelengths_nm.len(),
                values.len()
            )));
        }
        if wavelengths_nm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration("spectrum wavelengths must be ascending".into()));
        }
        Ok(Self {
            wavelengths_nm,
            values,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// Linear interpolation at `wavelength_nm`, `None` outside the sampled range.
    pub fn interpolate(&self, wavelength_nm: f64) -> Option<f64> {
        let w = &self.wavelengths_nm;
        if w.is_empty() || wavelength_nm < w[0] || wavelength_nm > w[w.len() - 1] {
            return None;
        }
        let i = w.partition_point(|&x| x < wavelength_nm);
        if i == 0 {
            return Some(self.values[0]);
        }
        let (x0, x1) = (w[i - 1], w[i]);
        let f = (wavelength_nm - x0) / (x1 - x0);
        Some(self.values[i - 1] + f * (self.values[i] - self.values[i - 1]))
    }

    fn same_grid(&self, other: &Spectrum) -> bool {
        self.wavelengths_nm.len() == other.wavelengths_nm.len()
            && self
                .wavelengths_nm
                .iter()
                .zip(&other.wavelengths_nm)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

/// Pointwise ratio of a run's flux to an empty-cell reference flux.
pub fn transmission(run: &Spectrum, reference: &Spectrum) -> Result<Spectrum> {
    if !run.same_grid(reference) {
        return Err(Error::MismatchedGrids);
    }
    let peak = reference.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut values = Vec::with_capacity(run.len());
    for ((&w, &r), &v) in reference.wavelengths_nm.iter().zip(&reference.values).zip(&run.values) {
        let rel = if peak > 0.0 { r / peak } else { 0.0 };
        if !(rel.abs() >= REFERENCE_FLOOR) {
            return Err(Error::VanishingReference {
                wavelength_nm: w,
                value: rel,
            });
        }
        values.push(v / r);
    }
    Spectrum::new(reference.wavelengths_nm.clone(), values, SpectrumKind::Transmission)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Peak,
    Dip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFeature {
    /// Quadratically interpolated position, nm.
    pub wavelength: f64,
    pub kind: FeatureKind,
    /// Interpolated spectrum value at the extremum.
    pub value: f64,
    pub prominence: f64,
    /// Full width at half prominence, nm.
    pub width: f64,
}

/// Threshold of [`DEFAULT_PROMINENCE_FRACTION`] of the spectrum's range.
pub fn default_prominence(s: &Spectrum) -> f64 {
    DEFAULT_PROMINENCE_FRACTION * s.range()
}

/// Peaks and dips whose prominence exceeds `threshold`, sorted by wavelength.
pub fn find_extrema(s: &Spectrum, threshold: f64) -> Vec<ResonanceFeature> {
    if s.len() < 5 {
        return Vec::new();
    }
    let mut out = peaks(&s.wavelengths_nm, &s.values, threshold, FeatureKind::Peak);
    let neg: Vec<f64> = s.values.iter().map(|v| -v).collect();
    out.extend(peaks(&s.wavelengths_nm, &neg, threshold, FeatureKind::Dip));
    out.sort_by(|a, b| a.wavelength.total_cmp(&b.wavelength));
    out
}

/// Local maxima of `v` (plateaus reported at their middle sample).
fn discrete_maxima(v: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = v.len();
    let mut i = 1;
    while i + 1 < n {
        if v[i - 1] < v[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && v[ahead] == v[i] {
                ahead += 1;
            }
            if v[ahead] < v[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn peaks(x: &[f64], v: &[f64], threshold: f64, kind: FeatureKind) -> Vec<ResonanceFeature> {
    let sign = if kind == FeatureKind::Peak { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for p in discrete_maxima(v) {
        // Saddles: lowest value on each side before the signal rises above the peak.
        let mut left = p;
        let mut left_min = v[p];
        while left > 0 && v[left - 1] <= v[p] {
            left -= 1;
            left_min = left_min.min(v[left]);
        }
        let mut right = p;
        let mut right_min = v[p];
        while right + 1 < v.len() && v[right + 1] <= v[p] {
            right += 1;
            right_min = right_min.min(v[right]);
        }
        let prominence = v[p] - left_min.max(right_min);
        if !(prominence > threshold) {
            continue;
        }
        let (xp, vp) = quadratic_vertex([x[p - 1], x[p], x[p + 1]], [v[p - 1], v[p], v[p + 1]]);
        let half = v[p] - prominence / 2.0;
        let cross = |range: &mut dyn Iterator<Item = usize>, toward: isize| -> f64 {
            for i in range {
                let j = (i as isize + toward) as usize;
                if v[j] <= half {
                    let f = (v[i] - half) / (v[i] - v[j]);
                    return x[i] + f * (x[j] - x[i]);
                }
            }
            if toward < 0 {
                x[left]
            } else {
                x[right]
            }
        };
        let lo = cross(&mut (left + 1..=p).rev(), -1);
        let hi = cross(&mut (p..right), 1);
        out.push(ResonanceFeature {
            wavelength: xp,
            kind,
            value: sign * vp,
            prominence,
            width: hi - lo,
        });
    }
    out
}

/// Vertex of the parabola through three points; the middle point if degenerate.
fn quadratic_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a == 0.0 || !a.is_finite() {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    let yv = y[0] + d1 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1]);
    (xv, yv)
}

/// Branch trajectories over a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBranches {
    /// Sweep parameter values, ascending.
    pub deltas: Vec<f64>,
    /// Two branches; `None` where a sweep point had no features.
    pub branches: [Vec<Option<f64>>; 2],
    /// Parameter value where the branches cross or come closest.
    pub crossing: Option<f64>,
}

impl SweepBranches {
    /// `branches[1] - branches[0]` per point.
    pub fn separation(&self) -> Vec<Option<f64>> {
        self.branches[0]
            .iter()
            .zip(&self.branches[1])
            .map(|(a, b)| Some((*b)? - (*a)?))
            .collect()
    }
}

/// Track two resonance branches through a sweep by nearest continuation.
///
/// `points` holds `(delta, feature wavelengths)` in any order. Each branch is
/// continued from its linear extrapolation over the previous two points, so
/// branches pass through a degenerate point instead of bouncing off it. Equal
/// assignment costs give the lower wavelength to branch 0.
pub fn sweep_branches(points: &[(f64, Vec<f64>)]) -> Result<SweepBranches> {
    if points.len() < 3 {
        return Err(Error::Configuration(format!(
            "branch tracking needs at least 3 sweep points, got {}",
            points.len()
        )));
    }
    let ambiguous: Vec<f64> = points.iter().filter(|p| p.1.len() > 2).map(|p| p.0).collect();
    if !ambiguous.is_empty() {
        return Err(Error::AmbiguousSweep(ambiguous));
    }
    let mut sorted: Vec<(f64, Vec<f64>)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for p in &mut sorted {
        p.1.sort_by(|a, b| a.total_cmp(b));
    }
    let deltas: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let mut branches: [Vec<Option<f64>>; 2] = [Vec::new(), Vec::new()];
    for (idx, (delta, feats)) in sorted.iter().enumerate() {
        let assigned = match feats.as_slice() {
            [] => [None, None],
            [w] => [Some(*w), Some(*w)],
            [lo, hi] => {
                let pred = [0, 1].map(|b| predict(&deltas[..idx], &branches[b], *delta));
                match pred {
                    [Some(p0), Some(p1)] => {
                        let keep = (lo - p0).abs() + (hi - p1).abs();
                        let swap = (hi - p0).abs() + (lo - p1).abs();
                        if swap < keep {
                            [Some(*hi), Some(*lo)]
                        } else {
                            [Some(*lo), Some(*hi)]
                        }
                    }
                    _ => [Some(*lo), Some(*hi)],
                }
            }
            _ => unreachable!("checked above"),
        };
        branches[0].push(assigned[0]);
        branches[1].push(assigned[1]);
    }
    let mut out = SweepBranches {
        deltas,
        branches,
        crossing: None,
    };
    out.crossing = crossing(&out.deltas, &out.separation());
    Ok(out)
}

/// Linear extrapolation from the last two known points of a branch.
fn predict(deltas: &[f64], branch: &[Option<f64>], at: f64) -> Option<f64> {
    let known: Vec<(f64, f64)> = deltas
        .iter()
        .zip(branch)
        .filter_map(|(&d, w)| w.map(|w| (d, w)))
        .collect();
    match known.as_slice() {
        [] => None,
        [(_, w)] => Some(*w),
        [.., (d0, w0), (d1, w1)] => {
            if d1 == d0 {
                Some(*w1)
            } else {
                Some(w1 + (w1 - w0) / (d1 - d0) * (at - d1))
            }
        }
    }
}

fn crossing(deltas: &[f64], sep: &[Option<f64>]) -> Option<f64> {
    let known: Vec<(f64, f64)> = deltas
        .iter()
        .zip(sep)
        .filter_map(|(&d, s)| s.map(|s| (d, s)))
        .collect();
    // Sign change (a zero counts) between consecutive points.
    for w in known.windows(2) {
        let ((d0, s0), (d1, s1)) = (w[0], w[1]);
        if s0 == 0.0 {
            return Some(d0);
        }
        if s0 * s1 < 0.0 || s1 == 0.0 {
            return Some(d0 + s0 / (s0 - s1) * (d1 - d0));
        }
    }
    // Otherwise the interior strict minimum of |separation|.
    let mut best: Option<(usize, f64)> = None;
    for i in 1..known.len().saturating_sub(1) {
        let a = known[i].1.abs();
        if a < known[i - 1].1.abs() && a < known[i + 1].1.abs() && best.is_none_or(|(_, b)| a < b) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| {
        quadratic_vertex(
            [known[i - 1].0, known[i].0, known[i + 1].0],
            [known[i - 1].1.abs(), known[i].1.abs(), known[i + 1].1.abs()],
        )
        .0
    })
}

/// Distance (nm) beyond each strip end facet of the hot-spot windows.
pub const HOT_SPOT_OFFSET_NM: f64 = 10.0;

/// Bright/dark classification of a lower-pair E_y map.
///
/// Re(E_y) is taken at the phase that maximizes the lobe magnitudes and
/// sampled in 3x3 windows centred [`HOT_SPOT_OFFSET_NM`] beyond each of the
/// four strip ends on the strip centrelines. Every window sample `r` is
/// paired with the sample at `-r` (rotation by pi about the pair centre), and
/// the score is the normalized correlation of the pairs: +1 for a mode whose
/// E_y is even under the rotation (parallel dipoles, bright), -1 for an odd
/// one (antiparallel, dark).
pub fn field_symmetry_score(map: &FieldSlice, p: &UnitCellParams) -> Result<f64> {
    let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 0.0 };
    let (dx, dy) = (step(&map.xs), step(&map.ys));
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::Configuration("field map needs at least 2x2 samples".into()));
    }
    let off = HOT_SPOT_OFFSET_NM;
    let ya = 0.5 * (p.strip_a_y()[0] + p.strip_a_y()[1]);
    let [a0, a1] = p.strip_a_x();
    // Strip A ends; their images under r -> -r are the opposite ends of B.
    let centres = [(a0 - off, ya), (a1 + off, ya)];
    let boxes = [
        (p.strip_a_x(), p.strip_a_y()),
        (p.strip_b_x(), p.strip_b_y()),
    ];
    let in_metal = |x: f64, y: f64| {
        boxes
            .iter()
            .any(|(bx, by)| x >= bx[0] && x <= bx[1] && y >= by[0] && y <= by[1])
    };
    let mut pairs: Vec<(Complex64, Complex64)> = Vec::new();
    for (cx, cy) in centres {
        let (ci, cj) = map.nearest(cx * NM, cy * NM).ok_or_else(|| {
            Error::Configuration(format!("hot-spot window at ({cx}, {cy}) nm lies outside the field map"))
        })?;
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (i, j) = (ci as isize + di, cj as isize + dj);
                if i < 0 || j < 0 || i as usize >= map.xs.len() || j as usize >= map.ys.len() {
                    return Err(Error::Configuration("hot-spot window extends outside the field map".into()));
                }
                let (x, y) = (map.xs[i as usize], map.ys[j as usize]);
                let image = map.nearest(-x, -y).ok_or_else(|| {
                    Error::Configuration("mirrored hot-spot window lies outside the field map".into())
                })?;
                for (qx, qy) in [(x, y), (-x, -y)] {
                    if in_metal(qx / NM, qy / NM) {
                        return Err(Error::Configuration(format!(
                            "hot-spot sample ({:.1}, {:.1}) nm lies inside a strip",
                            qx / NM,
                            qy / NM
                        )));
                    }
                }
                pairs.push((map.at(i as usize, j as usize), map.at(image.0, image.1)));
            }
        }
    }
    symmetry_score(&pairs)
}

/// Normalized correlation of `Re(a e^{i phi})` and `Re(b e^{i phi})` at the
/// phase maximizing the summed squares.
pub fn symmetry_score(pairs: &[(Complex64, Complex64)]) -> Result<f64> {
    let sq: Complex64 = pairs.iter().map(|(a, b)| a * a + b * b).sum();
    let rot = Complex64::from_polar(1.0, -0.5 * sq.arg());
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (ra, rb) = ((a * rot).re, (b * rot).re);
        ab += ra * rb;
        aa += ra * ra;
        bb += rb * rb;
    }
    if !(aa > 0.0 && bb > 0.0) {
        return Err(Error::Domain("hot-spot windows hold no field".into()));
    }
    Ok((ab / (aa * bb).sqrt()).clamp(-1.0, 1.0))
}
