//! Grid description and Yee stagger conventions.
//!
//! All six field components share an `nx * ny * nz` array shape in z-fastest
//! order. Sample `(i, j, k)` of each component sits at
//!
//! | component | x | y | z |
//! |-----------|---|---|---|
//! | Ex | i+1/2 | j | k |
//! | Ey | i | j+1/2 | k |
//! | Ez | i | j | k+1/2 |
//! | Hx | i | j+1/2 | k+1/2 |
//! | Hy | i+1/2 | j | k+1/2 |
//! | Hz | i+1/2 | j+1/2 | k |
//!
//! in units of the cell size, measured from `origin`.

use serde::{Deserialize, Serialize};

use crate::constants::C0;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Ex,
        Component::Ey,
        Component::Ez,
        Component::Hx,
        Component::Hy,
        Component::Hz,
    ];

    pub fn is_electric(self) -> bool {
        matches!(self, Component::Ex | Component::Ey | Component::Ez)
    }

    /// Cartesian direction of the component (0 = x, 1 = y, 2 = z).
    pub fn direction(self) -> usize {
        match self {
            Component::Ex | Component::Hx => 0,
            Component::Ey | Component::Hy => 1,
            Component::Ez | Component::Hz => 2,
        }
    }

    pub fn electric(direction: usize) -> Component {
        [Component::Ex, Component::Ey, Component::Ez][direction]
    }

    pub fn magnetic(direction: usize) -> Component {
        [Component::Hx, Component::Hy, Component::Hz][direction]
    }

    /// Offset of the sample from the cell node, in half cells, per axis.
    pub fn half_offsets(self) -> [u8; 3] {
        match self {
            Component::Ex => [1, 0, 0],
            Component::Ey => [0, 1, 0],
            Component::Ez => [0, 0, 1],
            Component::Hx => [0, 1, 1],
            Component::Hy => [1, 0, 1],
            Component::Hz => [1, 1, 0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "Ex",
            Component::Ey => "Ey",
            Component::Ez => "Ez",
            Component::Hx => "Hx",
            Component::Hy => "Hy",
            Component::Hz => "Hz",
        }
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Configuration(format!("unknown field component {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub courant_factor: f64,
    /// Physical position of node (0, 0, 0), metres.
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn cubic(n: [usize; 3], spacing: f64, courant_factor: f64, origin: [f64; 3]) -> Self {
        Self {
            nx: n[0],
            ny: n[1],
            nz: n[2],
            dx: spacing,
            dy: spacing,
            dz: spacing,
            courant_factor,
            origin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("nz", self.nz)] {
            if n < 4 {
                return Err(Error::InvalidGrid(format!("{name} = {n}, need at least 4 cells")));
            }
        }
        for (name, d) in [("dx", self.dx), ("dy", self.dy), ("dz", self.dz)] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidGrid(format!("{name} = {d} must be positive")));
            }
        }
        if !(self.courant_factor > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "courant factor {} must be positive",
                self.courant_factor
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.nz;
        let j = (idx / self.nz) % self.ny;
        let i = idx / (self.nz * self.ny);
        [i, j, k]
    }

    /// Physical position of a component sample.
    pub fn position(&self, comp: Component, i: usize, j: usize, k: usize) -> [f64; 3] {
        let off = comp.half_offsets();
        let d = self.spacing();
        let n = [i, j, k];
        std::array::from_fn(|a| self.origin[a] + (n[a] as f64 + 0.5 * off[a] as f64) * d[a])
    }

    /// Nearest sample of `comp` to a physical point, if it lies on the grid.
    pub fn nearest_sample(&self, comp: Component, point: [f64; 3]) -> Option<[usize; 3]> {
        let off = comp.half_offsets();
        let d = self.spacing();
        let dims = self.dims();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = (point[a] - self.origin[a]) / d[a] - 0.5 * off[a] as f64;
            let r = f.round();
            if r < 0.0 || r >= dims[a] as f64 {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    /// Index of the grid node closest to physical coordinate `x` along `axis`.
    pub fn node_index(&self, axis: Axis, x: f64) -> isize {
        let a = axis.index();
        ((x - self.origin[a]) / self.spacing()[a]).round() as isize
    }
}

/// Largest stable time step scaled by the grid's Courant factor:
/// `courant_factor / (c0 * sqrt(1/dx^2 + 1/dy^2 + 1/dz^2))`.
pub fn courant_dt(grid: &GridSpec) -> Result<f64> {
    for d in grid.spacing() {
        if !(d > 0.0) {
            return Err(Error::InvalidGrid(format!("non-positive spacing {d}")));
        }
    }
    let inv = (1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy) + 1.0 / (grid.dz * grid.dz))
        .sqrt();
    Ok(grid.courant_factor / (C0 * inv))
}
