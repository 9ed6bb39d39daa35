//! Domain terminations: periodic wrapping and convolutional PML.
//!
//! Axes that are neither periodic nor CPML-terminated end on perfect electric
//! conductor walls at node index 0 and at node index `n` (one past the last
//! stored sample). CPML layers sit just inside those walls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, ETA0, MU0};
use crate::fdtd::YeeFields;
use crate::grid::{Axis, GridSpec};
use crate::materials::MaterialMap;
use crate::{Error, Result};

/// Per-axis periodic flags (Bloch phase 1, normal incidence only).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicSpec {
    pub periodic: [bool; 3],
}

impl PeriodicSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn transverse() -> Self {
        Self {
            periodic: [true, true, false],
        }
    }

    pub fn all() -> Self {
        Self {
            periodic: [true; 3],
        }
    }

    pub fn is_periodic(&self, axis: Axis) -> bool {
        self.periodic[axis.index()]
    }

    /// Neighbour at `i + 1` along `axis`, wrapping on periodic axes;
    /// `None` past a conducting wall.
    #[inline]
    pub fn forward(&self, axis: Axis, i: usize, n: usize) -> Option<usize> {
        if i + 1 < n {
            Some(i + 1)
        } else if self.periodic[axis.index()] {
            Some(0)
        } else {
            None
        }
    }

    /// Neighbour at `i - 1` along `axis`, wrapping on periodic axes.
    #[inline]
    pub fn backward(&self, axis: Axis, i: usize, n: usize) -> Option<usize> {
        if i > 0 {
            Some(i - 1)
        } else if self.periodic[axis.index()] {
            Some(n - 1)
        } else {
            None
        }
    }
}

/// Copy the wrapped neighbour plane into a halo plane for one axis.
///
/// The solver itself realises periodicity through wrapped neighbour indexing
/// (see [`PeriodicSpec::forward`]); this helper exposes the equivalent halo
/// semantics for a component array extended by one plane on each side of a
/// periodic axis, as used by external consumers of exported slabs.
pub fn apply_periodic(data: &mut [f64], dims: [usize; 3], spec: &PeriodicSpec) {
    let [nx, ny, nz] = dims;
    let idx = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    if spec.periodic[0] && nx >= 3 {
        for j in 0..ny {
            for k in 0..nz {
                data[idx(0, j, k)] = data[idx(nx - 2, j, k)];
                data[idx(nx - 1, j, k)] = data[idx(1, j, k)];
            }
        }
    }
    if spec.periodic[1] && ny >= 3 {
        for i in 0..nx {
            for k in 0..nz {
                data[idx(i, 0, k)] = data[idx(i, ny - 2, k)];
                data[idx(i, ny - 1, k)] = data[idx(i, 1, k)];
            }
        }
    }
    if spec.periodic[2] && nz >= 3 {
        for i in 0..nx {
            for j in 0..ny {
                data[idx(i, j, 0)] = data[idx(i, j, nz - 2)];
                data[idx(i, j, nz - 1)] = data[idx(i, j, 1)];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmlParams {
    pub thickness: usize,
    pub grading_order: f64,
    /// Multiplier on the standard `0.8 (m + 1) / (eta0 dx)` conductivity.
    pub sigma_scale: f64,
    pub kappa_max: f64,
    pub alpha_max: f64,
    pub enabled: [bool; 3],
}

impl Default for CpmlParams {
    fn default() -> Self {
        Self {
            thickness: 10,
            grading_order: 3.0,
            sigma_scale: 1.0,
            kappa_max: 1.0,
            alpha_max: 0.0,
            enabled: [true; 3],
        }
    }
}

impl CpmlParams {
    pub fn sigma_max(&self, spacing: f64) -> f64 {
        self.sigma_scale * 0.8 * (self.grading_order + 1.0) / (ETA0 * spacing)
    }

    /// Conductivity at `depth` (fraction of the layer, 0 at the interface).
    pub fn sigma_at(&self, depth: f64, spacing: f64) -> f64 {
        if depth <= 0.0 {
            0.0
        } else {
            self.sigma_max(spacing) * depth.min(1.0).powf(self.grading_order)
        }
    }

    pub fn kappa_at(&self, depth: f64) -> f64 {
        1.0 + (self.kappa_max - 1.0) * depth.clamp(0.0, 1.0).powf(self.grading_order)
    }

    pub fn alpha_at(&self, depth: f64) -> f64 {
        if depth <= 0.0 {
            0.0
        } else {
            self.alpha_max * (1.0 - depth.min(1.0))
        }
    }

    pub fn validate(&self, periodic: &PeriodicSpec) -> Result<()> {
        if self.enabled.iter().any(|&e| e) {
            if self.thickness < 4 {
                return Err(Error::Configuration(format!(
                    "CPML thickness {} below the 4-cell minimum",
                    self.thickness
                )));
            }
            if !(self.grading_order >= 1.0) {
                return Err(Error::Configuration("CPML grading order must be >= 1".into()));
            }
            if !(self.sigma_scale > 0.0) {
                return Err(Error::Configuration("CPML sigma scale must be positive".into()));
            }
            if !(self.kappa_max >= 1.0) || !(self.alpha_max >= 0.0) {
                return Err(Error::Configuration("CPML needs kappa_max >= 1, alpha_max >= 0".into()));
            }
        }
        for a in Axis::ALL {
            if self.enabled[a.index()] && periodic.is_periodic(a) {
                return Err(Error::Configuration(format!(
                    "axis {a:?} cannot be both periodic and CPML-terminated"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Low,
    High,
}

/// Recursive-convolution coefficients at one position along the layer axis.
#[derive(Debug, Clone, Copy, Default)]
struct Coef {
    b: f64,
    a: f64,
    /// `1/kappa - 1`
    kinv_m1: f64,
}

impl Coef {
    fn new(sigma: f64, kappa: f64, alpha: f64, dt: f64) -> Self {
        let b = (-(sigma / kappa + alpha) * dt / EPS0).exp();
        let a = if sigma == 0.0 {
            0.0
        } else {
            sigma * (b - 1.0) / (sigma * kappa + kappa * kappa * alpha)
        };
        Self {
            b,
            a,
            kinv_m1: 1.0 / kappa - 1.0,
        }
    }

    fn is_identity(&self) -> bool {
        self.a == 0.0 && self.kinv_m1 == 0.0
    }
}

#[derive(Debug, Clone)]
struct Layer {
    axis: usize,
    /// First index along `axis` covered by the layer.
    start: usize,
    len: usize,
    coef_e: Vec<Coef>,
    coef_h: Vec<Coef>,
    /// psi for the two tangential E components (directions axis+1, axis+2).
    psi_e: [Vec<f64>; 2],
    psi_h: [Vec<f64>; 2],
}

/// CPML state: graded coefficients and psi accumulators for every layer.
#[derive(Debug, Clone)]
pub struct Cpml {
    dims: [usize; 3],
    spacing: [f64; 3],
    dt: f64,
    periodic: PeriodicSpec,
    layers: Vec<Layer>,
}

impl Cpml {
    pub fn new(grid: &GridSpec, dt: f64, params: &CpmlParams, periodic: &PeriodicSpec) -> Result<Self> {
        params.validate(periodic)?;
        let dims = grid.dims();
        let spacing = grid.spacing();
        let mut layers = Vec::new();
        for axis in 0..3 {
            if !params.enabled[axis] {
                continue;
            }
            let n = dims[axis];
            let thick = params.thickness;
            if 2 * thick + 2 > n {
                return Err(Error::Configuration(format!(
                    "axis {axis}: {n} cells cannot hold two {thick}-cell CPML layers"
                )));
            }
            let other = dims[(axis + 1) % 3] * dims[(axis + 2) % 3];
            for side in [Side::Low, Side::High] {
                let start = match side {
                    Side::Low => 0,
                    Side::High => n - thick,
                };
                let depth_e = |p: usize| -> f64 {
                    match side {
                        Side::Low => (thick as f64 - p as f64) / thick as f64,
                        Side::High => (p as f64 - start as f64) / thick as f64,
                    }
                };
                let depth_h = |p: usize| -> f64 {
                    match side {
                        Side::Low => (thick as f64 - p as f64 - 0.5) / thick as f64,
                        Side::High => (p as f64 + 0.5 - start as f64) / thick as f64,
                    }
                };
                let coef = |depth: f64| {
                    Coef::new(
                        params.sigma_at(depth, spacing[axis]),
                        params.kappa_at(depth),
                        params.alpha_at(depth),
                        dt,
                    )
                };
                let coef_e = (start..start + thick).map(|p| coef(depth_e(p))).collect();
                let coef_h = (start..start + thick).map(|p| coef(depth_h(p))).collect();
                layers.push(Layer {
                    axis,
                    start,
                    len: thick,
                    coef_e,
                    coef_h,
                    psi_e: [vec![0.0; thick * other], vec![0.0; thick * other]],
                    psi_h: [vec![0.0; thick * other], vec![0.0; thick * other]],
                });
            }
        }
        Ok(Self {
            dims,
            spacing,
            dt,
            periodic: *periodic,
            layers,
        })
    }

    /// Half-open index range `[lo, hi)` per axis that is free of CPML.
    pub fn interior(&self) -> [(usize, usize); 3] {
        let mut out = self.dims.map(|n| (0, n));
        for l in &self.layers {
            if l.start == 0 {
                out[l.axis].0 = l.len;
            } else {
                out[l.axis].1 = l.start;
            }
        }
        out
    }

    /// Reject material samples other than vacuum inside an absorbing layer.
    pub fn check_materials(&self, materials: &MaterialMap) -> Result<()> {
        let [_, ny, nz] = self.dims;
        let interior = self.interior();
        for c in 0..3 {
            for &flat in materials.special_samples(c) {
                let k = flat % nz;
                let j = (flat / nz) % ny;
                let i = flat / (nz * ny);
                let p = [i, j, k];
                if (0..3).any(|a| p[a] < interior[a].0 || p[a] >= interior[a].1) {
                    return Err(Error::Configuration(format!(
                        "material sample {p:?} of E component {c} lies inside the CPML"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply the stretched-coordinate correction after the bulk H update.
    /// `e` holds E^n; psi_H is advanced with the same forward differences.
    pub fn correct_h(&mut self, fields: &mut YeeFields) {
        let ch = self.dt / MU0;
        let dims = self.dims;
        let [_, ny, nz] = dims;
        let zeros = vec![0.0; nz];
        for layer in &mut self.layers {
            let a = layer.axis;
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            let inv_d = 1.0 / self.spacing[a];
            let step = stride(dims, a);
            let r = layer.ranges(dims);
            let (slab, pslab) = (ny * nz, r[1].len() * r[2].len());
            let (start, coefs) = (layer.start, &layer.coef_h);
            // H_b += ch (psi + (1/kappa - 1) dE_c/da); H_c -= ch (psi + (1/kappa - 1) dE_b/da)
            let (e_b, e_c) = (&fields.e[b], &fields.e[c]);
            let [psi_b, psi_c] = &mut layer.psi_h;
            let (h_b, h_c) = two_mut(&mut fields.h, b, c);
            let rows = r[0].start * slab..r[0].end * slab;
            h_b[rows.clone()]
                .par_chunks_mut(slab)
                .zip(h_c[rows].par_chunks_mut(slab))
                .zip(psi_b.par_chunks_mut(pslab).zip(psi_c.par_chunks_mut(pslab)))
                .enumerate()
                .for_each(|(di, ((hb, hc), (pb, pc)))| {
                    let i = r[0].start + di;
                    for (jj, j) in r[1].clone().enumerate() {
                        let base = (i * ny + j) * nz;
                        let (lb, qb) = (j * nz, jj * r[2].len());
                        if a == 2 {
                            for (kk, k) in r[2].clone().enumerate() {
                                let co = coefs[k - start];
                                if co.is_identity() {
                                    continue;
                                }
                                let f = base + k;
                                let next = |v: &[f64]| if k + 1 < nz { v[f + 1] } else { 0.0 };
                                let d_ec = (next(e_c) - e_c[f]) * inv_d;
                                let d_eb = (next(e_b) - e_b[f]) * inv_d;
                                let q = qb + kk;
                                pb[q] = co.b * pb[q] + co.a * d_ec;
                                pc[q] = co.b * pc[q] + co.a * d_eb;
                                hb[lb + k] += ch * (pb[q] + co.kinv_m1 * d_ec);
                                hc[lb + k] -= ch * (pc[q] + co.kinv_m1 * d_eb);
                            }
                            continue;
                        }
                        let p = if a == 0 { i } else { j };
                        let co = coefs[p - start];
                        if co.is_identity() {
                            continue;
                        }
                        let (ec, eb) = (&e_c[base..base + nz], &e_b[base..base + nz]);
                        let (ecn, ebn) = if p + 1 < dims[a] {
                            (&e_c[base + step..base + step + nz], &e_b[base + step..base + step + nz])
                        } else {
                            (&zeros[..], &zeros[..])
                        };
                        let (hb, hc) = (&mut hb[lb..lb + nz], &mut hc[lb..lb + nz]);
                        let (pb, pc) = (&mut pb[qb..qb + nz], &mut pc[qb..qb + nz]);
                        for k in 0..nz {
                            let d_ec = (ecn[k] - ec[k]) * inv_d;
                            let d_eb = (ebn[k] - eb[k]) * inv_d;
                            pb[k] = co.b * pb[k] + co.a * d_ec;
                            pc[k] = co.b * pc[k] + co.a * d_eb;
                            hb[k] += ch * (pb[k] + co.kinv_m1 * d_ec);
                            hc[k] -= ch * (pc[k] + co.kinv_m1 * d_eb);
                        }
                    }
                });
        }
    }

    /// Apply the stretched-coordinate correction after the bulk E update.
    /// `h` holds H^{n+1/2}; samples on the conducting wall are skipped.
    pub fn correct_e(&mut self, fields: &mut YeeFields, materials: &MaterialMap) {
        let dims = self.dims;
        let [_, ny, nz] = dims;
        let cb = materials.background().cb;
        let periodic = self.periodic.periodic;
        for layer in &mut self.layers {
            let a = layer.axis;
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            let inv_d = 1.0 / self.spacing[a];
            let step = stride(dims, a);
            let r = layer.ranges(dims);
            let (slab, pslab) = (ny * nz, r[1].len() * r[2].len());
            let (start, coefs) = (layer.start, &layer.coef_e);
            // E_b -= cb (psi + (1/kappa - 1) dH_c/da); E_c += cb (psi + (1/kappa - 1) dH_b/da)
            let (h_b, h_c) = (&fields.h[b], &fields.h[c]);
            let [psi_b, psi_c] = &mut layer.psi_e;
            let (e_b, e_c) = two_mut(&mut fields.e, b, c);
            let rows = r[0].start * slab..r[0].end * slab;
            e_b[rows.clone()]
                .par_chunks_mut(slab)
                .zip(e_c[rows].par_chunks_mut(slab))
                .zip(psi_b.par_chunks_mut(pslab).zip(psi_c.par_chunks_mut(pslab)))
                .enumerate()
                .for_each(|(di, ((eb, ec), (pb, pc)))| {
                    let i = r[0].start + di;
                    for (jj, j) in r[1].clone().enumerate() {
                        let base = (i * ny + j) * nz;
                        let (lb, qb) = (j * nz, jj * r[2].len());
                        // Tangential E on the other axes' walls stays pinned at zero.
                        let live = |axis: usize, k: usize| periodic[axis] || [i, j, k][axis] != 0;
                        if a == 2 {
                            for (kk, k) in r[2].clone().enumerate() {
                                let co = coefs[k - start];
                                if k == 0 || co.is_identity() {
                                    continue;
                                }
                                let f = base + k;
                                let d_hc = (h_c[f] - h_c[f - 1]) * inv_d;
                                let d_hb = (h_b[f] - h_b[f - 1]) * inv_d;
                                let q = qb + kk;
                                pb[q] = co.b * pb[q] + co.a * d_hc;
                                pc[q] = co.b * pc[q] + co.a * d_hb;
                                if live(c, k) {
                                    eb[lb + k] -= cb * (pb[q] + co.kinv_m1 * d_hc);
                                }
                                if live(b, k) {
                                    ec[lb + k] += cb * (pc[q] + co.kinv_m1 * d_hb);
                                }
                            }
                            continue;
                        }
                        let p = if a == 0 { i } else { j };
                        let co = coefs[p - start];
                        if p == 0 || co.is_identity() {
                            continue;
                        }
                        let (hc0, hb0) = (&h_c[base..base + nz], &h_b[base..base + nz]);
                        let (hcp, hbp) = (&h_c[base - step..base - step + nz], &h_b[base - step..base - step + nz]);
                        let (eb, ec) = (&mut eb[lb..lb + nz], &mut ec[lb..lb + nz]);
                        let (pb, pc) = (&mut pb[qb..qb + nz], &mut pc[qb..qb + nz]);
                        // One of b, c is z; the other's wall test holds for the whole line.
                        let wb = if c == 2 || live(c, 0) { cb } else { 0.0 };
                        let wc = if b == 2 || live(b, 0) { cb } else { 0.0 };
                        for k in 0..nz {
                            let d_hc = (hc0[k] - hcp[k]) * inv_d;
                            let d_hb = (hb0[k] - hbp[k]) * inv_d;
                            pb[k] = co.b * pb[k] + co.a * d_hc;
                            pc[k] = co.b * pc[k] + co.a * d_hb;
                            eb[k] -= wb * (pb[k] + co.kinv_m1 * d_hc);
                            ec[k] += wc * (pc[k] + co.kinv_m1 * d_hb);
                        }
                        // Samples on the z = 0 wall were zero and must stay so.
                        if !periodic[2] {
                            if c == 2 {
                                eb[0] = 0.0;
                            } else {
                                ec[0] = 0.0;
                            }
                        }
                    }
                });
        }
    }
}

impl Layer {
    /// Index ranges covered by the layer; psi arrays are laid out over them
    /// in the same (x, y, z) order as the grid.
    fn ranges(&self, dims: [usize; 3]) -> [std::ops::Range<usize>; 3] {
        let mut r = dims.map(|n| 0..n);
        r[self.axis] = self.start..self.start + self.len;
        r
    }
}

#[inline]
fn stride(dims: [usize; 3], axis: usize) -> usize {
    match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    }
}

fn two_mut<T>(arr: &mut [T; 3], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a != b);
    if a < b {
        let (lo, hi) = arr.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = arr.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}
