//! Unit-cell geometry and voxelization.
//!
//! Layout convention: strips run along x (length), have their width along y
//! and their thickness along z. The lower pair sits on `z in [0, t]` with
//! strip A shifted by `-delta/2` and strip B by `+delta/2`, so the pair
//! centroid is the origin for every shift. The upper strip is centred on
//! `y = s` at `z in [t + h, 2t + h]`.

use serde::{Deserialize, Serialize};

use crate::constants::NM;
use crate::grid::{Component, GridSpec};
use crate::materials::{SILVER, VACUUM};
use crate::{Error, Result};

/// Unit-cell dimensions in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitCellParams {
    pub l1: f64,
    pub w1: f64,
    pub l2: f64,
    pub w2: f64,
    pub u: f64,
    pub h: f64,
    pub s: f64,
    pub delta: f64,
    pub thickness: f64,
    pub period_x: f64,
    pub period_y: f64,
}

impl Default for UnitCellParams {
    fn default() -> Self {
        Self {
            l1: 136.0,
            w1: 50.0,
            l2: 120.0,
            w2: 30.0,
            u: 30.0,
            h: 30.0,
            s: 35.0,
            delta: 65.0,
            thickness: 20.0,
            period_x: 400.0,
            period_y: 400.0,
        }
    }
}

impl UnitCellParams {
    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("l1", self.l1),
            ("w1", self.w1),
            ("l2", self.l2),
            ("w2", self.w2),
            ("h", self.h),
            ("thickness", self.thickness),
            ("period_x", self.period_x),
            ("period_y", self.period_y),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidGeometry(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidGeometry(format!("delta = {} must be >= 0", self.delta)));
        }
        if !(self.u > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "gap u = {} leaves the lower strips overlapping",
                self.u
            )));
        }
        if !self.s.is_finite() {
            return Err(Error::InvalidGeometry("s must be finite".into()));
        }
        Ok(())
    }

    /// x-span of lower strip A, nm.
    pub fn strip_a_x(&self) -> [f64; 2] {
        [-self.l2 / 2.0 - self.delta / 2.0, self.l2 / 2.0 - self.delta / 2.0]
    }

    pub fn strip_b_x(&self) -> [f64; 2] {
        [-self.l2 / 2.0 + self.delta / 2.0, self.l2 / 2.0 + self.delta / 2.0]
    }

    pub fn strip_a_y(&self) -> [f64; 2] {
        [-self.u / 2.0 - self.w2, -self.u / 2.0]
    }

    pub fn strip_b_y(&self) -> [f64; 2] {
        [self.u / 2.0, self.u / 2.0 + self.w2]
    }

    pub fn upper_z(&self) -> [f64; 2] {
        [self.thickness + self.h, 2.0 * self.thickness + self.h]
    }

    /// Length over which the two lower strips overlap along x.
    pub fn overlap_length(&self) -> f64 {
        (self.l2 - self.delta).max(0.0)
    }

    /// Volume of all three strips, nm^3.
    pub fn unit_cell_volume(&self) -> f64 {
        (2.0 * self.l2 * self.w2 + self.l1 * self.w1) * self.thickness
    }

    /// Require `clearance` (nm) between every strip and the cell boundary.
    pub fn check_fits(&self, clearance: f64, with_upper: bool) -> Result<()> {
        let mut boxes = vec![
            (self.strip_a_x(), self.strip_a_y()),
            (self.strip_b_x(), self.strip_b_y()),
        ];
        if with_upper {
            boxes.push(([-self.l1 / 2.0, self.l1 / 2.0], [self.s - self.w1 / 2.0, self.s + self.w1 / 2.0]));
        }
        let hx = self.period_x / 2.0 - clearance;
        let hy = self.period_y / 2.0 - clearance;
        for (x, y) in boxes {
            if x[0] < -hx || x[1] > hx || y[0] < -hy || y[1] > hy {
                return Err(Error::InvalidGeometry(format!(
                    "strip x {x:?} y {y:?} nm does not fit the {}x{} nm cell with {clearance} nm clearance",
                    self.period_x, self.period_y
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxShape {
    /// Corners in metres.
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub material: u8,
}

impl BoxShape {
    pub fn from_nm(x: [f64; 2], y: [f64; 2], z: [f64; 2], material: u8) -> Self {
        Self {
            min: [x[0] * NM, y[0] * NM, z[0] * NM],
            max: [x[1] * NM, y[1] * NM, z[1] * NM],
            material,
        }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }

    pub fn translated(&self, shift: [f64; 3]) -> Self {
        Self {
            min: std::array::from_fn(|a| self.min[a] + shift[a]),
            max: std::array::from_fn(|a| self.max[a] + shift[a]),
            material: self.material,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub boxes: Vec<BoxShape>,
    /// Bounding region (metres); on periodic axes this is one period.
    pub bounds: [[f64; 3]; 2],
    pub periodic: [bool; 3],
}

impl Scene {
    pub fn empty(bounds: [[f64; 3]; 2], periodic: [bool; 3]) -> Self {
        Self {
            boxes: Vec::new(),
            bounds,
            periodic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.boxes {
            if (0..3).any(|a| !(b.max[a] > b.min[a])) {
                return Err(Error::InvalidGeometry(format!("box corners {:?} {:?} not ordered", b.min, b.max)));
            }
        }
        Ok(())
    }

    /// Smallest box enclosing all shapes, metres.
    pub fn extent(&self) -> Option<[[f64; 3]; 2]> {
        let mut it = self.boxes.iter();
        let first = it.next()?;
        let mut lo = first.min;
        let mut hi = first.max;
        for b in it {
            for a in 0..3 {
                lo[a] = lo[a].min(b.min[a]);
                hi[a] = hi[a].max(b.max[a]);
            }
        }
        Some([lo, hi])
    }

    pub fn with_material(&self, material: u8) -> Self {
        let mut out = self.clone();
        for b in &mut out.boxes {
            b.material = material;
        }
        out
    }
}

/// The three-strip unit cell on a periodic x-y lattice.
pub fn build_unit_cell(p: &UnitCellParams) -> Result<Scene> {
    p.validate()?;
    p.check_fits(0.0, true)?;
    let t = p.thickness;
    let lower = [0.0, t];
    let boxes = vec![
        BoxShape::from_nm(p.strip_a_x(), p.strip_a_y(), lower, SILVER),
        BoxShape::from_nm(p.strip_b_x(), p.strip_b_y(), lower, SILVER),
        BoxShape::from_nm(
            [-p.l1 / 2.0, p.l1 / 2.0],
            [p.s - p.w1 / 2.0, p.s + p.w1 / 2.0],
            p.upper_z(),
            SILVER,
        ),
    ];
    let scene = Scene {
        boxes,
        bounds: [
            [-p.period_x / 2.0 * NM, -p.period_y / 2.0 * NM, 0.0],
            [p.period_x / 2.0 * NM, p.period_y / 2.0 * NM, p.upper_z()[1] * NM],
        ],
        periodic: [true, true, false],
    };
    scene.validate()?;
    Ok(scene)
}

/// The lower strip pair alone, in open space.
pub fn build_isolated_pair(p: &UnitCellParams) -> Result<Scene> {
    p.validate()?;
    let lower = [0.0, p.thickness];
    let boxes = vec![
        BoxShape::from_nm(p.strip_a_x(), p.strip_a_y(), lower, SILVER),
        BoxShape::from_nm(p.strip_b_x(), p.strip_b_y(), lower, SILVER),
    ];
    let mut scene = Scene {
        boxes,
        bounds: [[0.0; 3]; 2],
        periodic: [false; 3],
    };
    scene.bounds = scene.extent().expect("two boxes");
    scene.validate()?;
    Ok(scene)
}

/// Containment along one axis. A sample lying on a face belongs to the box
/// only for the face farther from the origin, which keeps sample counts exact
/// for faces on half-cell planes and preserves mirror/inversion symmetry.
fn inside_axis(p: f64, lo: f64, hi: f64, tol: f64) -> bool {
    let on_lo = (p - lo).abs() <= tol;
    let on_hi = (p - hi).abs() <= tol;
    if on_lo || on_hi {
        let far_lo = lo.abs() >= hi.abs() - tol;
        let far_hi = hi.abs() >= lo.abs() - tol;
        return (on_lo && far_lo) || (on_hi && far_hi);
    }
    p > lo && p < hi
}

/// Assign every E sample the material of the (last listed) box containing it.
pub fn voxelize(scene: &Scene, grid: &GridSpec) -> [Vec<u8>; 3] {
    let n = grid.len();
    let mut out = [vec![VACUUM; n], vec![VACUUM; n], vec![VACUUM; n]];
    let d = grid.spacing();
    let period: [f64; 3] = std::array::from_fn(|a| scene.bounds[1][a] - scene.bounds[0][a]);
    // Periodic images of every box so shapes crossing the cell edge wrap.
    let mut images = Vec::new();
    for b in &scene.boxes {
        let shifts = |a: usize| -> Vec<f64> {
            if scene.periodic[a] && period[a] > 0.0 {
                vec![-period[a], 0.0, period[a]]
            } else {
                vec![0.0]
            }
        };
        for sx in shifts(0) {
            for sy in shifts(1) {
                for sz in shifts(2) {
                    images.push(b.translated([sx, sy, sz]));
                }
            }
        }
    }
    for (c, idx) in out.iter_mut().enumerate() {
        let comp = Component::electric(c);
        for b in &images {
            let tol: [f64; 3] = std::array::from_fn(|a| 1e-6 * d[a]);
            // Index range that could hold samples of this box.
            let range = |a: usize| -> (usize, usize) {
                let off = 0.5 * comp.half_offsets()[a] as f64;
                let lo = ((b.min[a] - grid.origin[a]) / d[a] - off).floor().max(0.0) as usize;
                let hi = (((b.max[a] - grid.origin[a]) / d[a] - off).ceil() + 1.0)
                    .clamp(0.0, grid.dims()[a] as f64) as usize;
                (lo, hi)
            };
            let (ri, rj, rk) = (range(0), range(1), range(2));
            for i in ri.0..ri.1 {
                for j in rj.0..rj.1 {
                    for k in rk.0..rk.1 {
                        let p = grid.position(comp, i, j, k);
                        if (0..3).all(|a| inside_axis(p[a], b.min[a], b.max[a], tol[a])) {
                            idx[grid.index(i, j, k)] = b.material;
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nm(b: &BoxShape) -> ([f64; 3], [f64; 3]) {
        (b.min.map(|v| (v / NM * 1e6).round() / 1e6), b.max.map(|v| (v / NM * 1e6).round() / 1e6))
    }

    #[test]
    fn delta_65_strip_spans() {
        let p = UnitCellParams::default().with_delta(65.0);
        let s = build_unit_cell(&p).unwrap();
        let (a_min, a_max) = nm(&s.boxes[0]);
        let (b_min, b_max) = nm(&s.boxes[1]);
        assert_eq!((a_min[0], a_max[0]), (-92.5, 27.5));
        assert_eq!((b_min[0], b_max[0]), (-27.5, 92.5));
        assert_eq!(p.overlap_length(), 55.0);
    }

    #[test]
    fn upper_strip_height() {
        let s = build_unit_cell(&UnitCellParams::default()).unwrap();
        let (lo, hi) = nm(&s.boxes[2]);
        assert_eq!((lo[2], hi[2]), (50.0, 70.0));
        assert_eq!((lo[1], hi[1]), (10.0, 60.0));
    }

    #[test]
    fn zero_shift_pair_is_mirror_symmetric() {
        let s = build_unit_cell(&UnitCellParams::default().with_delta(0.0)).unwrap();
        let (a_min, a_max) = nm(&s.boxes[0]);
        let (b_min, b_max) = nm(&s.boxes[1]);
        assert_eq!(a_min[0], b_min[0]);
        assert_eq!(a_max[0], b_max[0]);
        assert_eq!(a_min[1], -b_max[1]);
        assert_eq!(a_max[1], -b_min[1]);
    }

    #[test]
    fn isolated_pair_has_two_centred_boxes() {
        for delta in [45.0, 65.0, 85.0] {
            let s = build_isolated_pair(&UnitCellParams::default().with_delta(delta)).unwrap();
            assert_eq!(s.boxes.len(), 2);
            assert_eq!(s.periodic, [false; 3]);
            let [lo, hi] = s.extent().unwrap();
            assert!((lo[0] + hi[0]).abs() < 1e-15);
            assert!((lo[1] + hi[1]).abs() < 1e-15);
        }
        assert_eq!(UnitCellParams::default().with_delta(85.0).overlap_length(), 35.0);
    }

    #[test]
    fn overlapping_layer_is_invalid() {
        let p = UnitCellParams {
            u: 0.0,
            ..Default::default()
        };
        assert!(matches!(build_unit_cell(&p), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn strip_outside_period_is_invalid() {
        let p = UnitCellParams {
            period_x: 150.0,
            ..Default::default()
        };
        assert!(build_unit_cell(&p).is_err());
    }

    fn grid_for(p: &UnitCellParams, d: f64) -> GridSpec {
        let nx = (p.period_x / d).round() as usize;
        let ny = (p.period_y / d).round() as usize;
        let nz = (100.0 / d).round() as usize;
        GridSpec::cubic(
            [nx, ny, nz],
            d * NM,
            0.5,
            [-p.period_x / 2.0 * NM, -p.period_y / 2.0 * NM, -10.0 * NM],
        )
    }

    #[test]
    fn empty_scene_is_vacuum() {
        let p = UnitCellParams::default();
        let g = grid_for(&p, 10.0);
        let idx = voxelize(&Scene::empty([[0.0; 3], [1.0; 3]], [false; 3]), &g);
        assert!(idx.iter().flatten().all(|&m| m == VACUUM));
    }

    #[test]
    fn interior_point_is_silver() {
        let p = UnitCellParams::default().with_delta(0.0);
        let g = grid_for(&p, 5.0);
        let idx = voxelize(&build_unit_cell(&p).unwrap(), &g);
        let point = [0.0, (p.u / 2.0 + p.w2 / 2.0) * NM, p.thickness / 2.0 * NM];
        for c in 0..3 {
            let s = g.nearest_sample(Component::electric(c), point).unwrap();
            assert_eq!(idx[c][g.index(s[0], s[1], s[2])], SILVER, "component {c}");
        }
    }

    fn volume_error(p: &UnitCellParams, d: f64) -> f64 {
        let g = grid_for(p, d);
        let idx = voxelize(&build_unit_cell(p).unwrap(), &g);
        let count: f64 = idx
            .iter()
            .map(|v| v.iter().filter(|&&m| m == SILVER).count() as f64)
            .sum::<f64>()
            / 3.0;
        let exact = p.unit_cell_volume();
        (count * d * d * d - exact).abs() / exact
    }

    #[test]
    fn voxel_volume_matches_boxes() {
        for delta in [45.0, 65.0, 85.0] {
            let p = UnitCellParams::default().with_delta(delta);
            let err5 = volume_error(&p, 5.0);
            let err25 = volume_error(&p, 2.5);
            assert!(err5 < 0.10, "delta {delta}: {err5}");
            assert!(err25 <= err5 + 1e-12, "delta {delta}: {err25} > {err5}");
        }
    }

    #[test]
    fn voxel_volume_exact_for_node_aligned_boxes() {
        let g = GridSpec::cubic([20, 20, 20], NM, 0.5, [-10.0 * NM; 3]);
        let scene = Scene {
            boxes: vec![BoxShape::from_nm([-4.0, 6.0], [1.0, 5.0], [-3.0, 0.0], SILVER)],
            bounds: [[-10.0 * NM; 3], [10.0 * NM; 3]],
            periodic: [false; 3],
        };
        let idx = voxelize(&scene, &g);
        for c in 0..3 {
            assert_eq!(idx[c].iter().filter(|&&m| m == SILVER).count(), 10 * 4 * 3);
        }
    }

    #[test]
    fn translation_by_one_period_is_invisible() {
        let p = UnitCellParams::default();
        let g = grid_for(&p, 10.0);
        let scene = build_unit_cell(&p).unwrap();
        let base = voxelize(&scene, &g);
        for shift in [[p.period_x * NM, 0.0, 0.0], [0.0, -p.period_y * NM, 0.0]] {
            let mut moved = scene.clone();
            moved.boxes = moved.boxes.iter().map(|b| b.translated(shift)).collect();
            assert_eq!(voxelize(&moved, &g), base);
        }
    }

    #[test]
    fn lower_strip_labels_are_interchangeable() {
        let p = UnitCellParams::default().with_delta(45.0);
        let g = grid_for(&p, 5.0);
        let scene = build_unit_cell(&p).unwrap();
        let mut swapped = scene.clone();
        swapped.boxes.swap(0, 1);
        assert_eq!(voxelize(&scene, &g), voxelize(&swapped, &g));
    }

    #[test]
    fn pair_voxels_are_inversion_symmetric() {
        // Ey samples map onto Ey samples under (x, y) -> (-x, -y) when the
        // origin is a node.
        let p = UnitCellParams::default().with_delta(45.0);
        let g = grid_for(&p, 5.0);
        let idx = voxelize(&build_isolated_pair(&p).unwrap(), &g);
        let comp = Component::Ey;
        let mut checked = 0;
        for (flat, &m) in idx[1].iter().enumerate() {
            if m != SILVER {
                continue;
            }
            let [i, j, k] = g.unravel(flat);
            let pos = g.position(comp, i, j, k);
            let q = g.nearest_sample(comp, [-pos[0], -pos[1], pos[2]]).unwrap();
            assert_eq!(idx[1][g.index(q[0], q[1], q[2])], SILVER);
            checked += 1;
        }
        assert!(checked > 100);
        assert_relative_eq!(checked as f64 * 125.0, 2.0 * 120.0 * 30.0 * 20.0, max_relative = 0.1);
    }
}
