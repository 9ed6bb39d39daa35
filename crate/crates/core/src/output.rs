//! On-disk formats.
//!
//! - Spectra: CSV with header `wavelength_nm,value`.
//! - Field maps: `<stem>_re.csv` and `<stem>_im.csv` matrices (one row per y
//!   sample, one column per x sample, both ascending) plus a `<stem>.json`
//!   sidecar describing the plane.
//! - `metadata.json`: the run manifest.
//!
//! Numbers are written in Rust's shortest round-trip form, so identical
//! results give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{Spectrum, SpectrumKind};
use crate::constants::NM;
use crate::grid::Component;
use crate::monitors::FieldSlice;
use crate::{Error, Result};

pub const METADATA_FILE: &str = "metadata.json";
pub const MAP_DIR: &str = "maps";

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Write {
        path: path.to_path_buf(),
        source,
    }
}

fn read_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Read {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(write_err(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(write_err(path))
}

pub fn write_spectrum(path: &Path, s: &Spectrum) -> Result<()> {
    let mut out = String::from("wavelength_nm,value\n");
    for (w, v) in s.wavelengths_nm.iter().zip(&s.values) {
        out.push_str(&format!("{w},{v}\n"));
    }
    write_text(path, &out)
}

pub fn read_spectrum(path: &Path, kind: SpectrumKind) -> Result<Spectrum> {
    let text = fs::read_to_string(path).map_err(read_err(path))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(path, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "wavelength_nm" {
        return Err(malformed(path, "expected header `wavelength_nm,value`"));
    }
    let mut w = Vec::new();
    let mut v = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| malformed(path, format!("row {} is not numeric", line + 2)))
        };
        w.push(parse(0)?);
        v.push(parse(1)?);
    }
    if w.is_empty() {
        return Err(malformed(path, "no data rows"));
    }
    Spectrum::new(w, v, kind).map_err(|e| malformed(path, e.to_string()))
}

/// Sidecar of a field-map pair of matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMapSidecar {
    pub component: Component,
    pub wavelength_nm: f64,
    pub plane_z_nm: f64,
    pub x_nm: Vec<f64>,
    pub y_nm: Vec<f64>,
    pub spacing_nm: [f64; 2],
    pub re_file: String,
    pub im_file: String,
    /// Quantity and units of the matrices; phases refer to the source time origin.
    pub value: String,
}

pub fn map_stem(component: Component, wavelength_nm: f64) -> String {
    format!("{}_{:.1}nm", component.name().to_lowercase(), wavelength_nm)
}

/// Write `<dir>/<stem>_{re,im}.csv` and `<dir>/<stem>.json`; returns the sidecar path.
pub fn write_field_map(dir: &Path, slice: &FieldSlice) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let stem = map_stem(slice.component, slice.wavelength_nm);
    let (nx, ny) = (slice.xs.len(), slice.ys.len());
    let matrix = |part: fn(&Complex64) -> f64| {
        let mut out = String::new();
        for iy in 0..ny {
            let row: Vec<String> = (0..nx).map(|ix| format!("{}", part(&slice.at(ix, iy)))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    };
    let re_file = format!("{stem}_re.csv");
    let im_file = format!("{stem}_im.csv");
    write_text(&dir.join(&re_file), &matrix(|c| c.re))?;
    write_text(&dir.join(&im_file), &matrix(|c| c.im))?;
    let step = |v: &[f64]| if v.len() > 1 { (v[1] - v[0]) / NM } else { 0.0 };
    let sidecar = FieldMapSidecar {
        component: slice.component,
        wavelength_nm: slice.wavelength_nm,
        plane_z_nm: slice.z / NM,
        x_nm: slice.xs.iter().map(|x| x / NM).collect(),
        y_nm: slice.ys.iter().map(|y| y / NM).collect(),
        spacing_nm: [step(&slice.xs), step(&slice.ys)],
        re_file,
        im_file,
        value: "DFT phasor, V/m*s".into(),
    };
    let path = dir.join(format!("{stem}.json"));
    write_text(&path, &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
    Ok(path)
}

fn read_matrix(path: &Path, nx: usize, ny: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(read_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        let row: Option<Vec<f64>> = rec.iter().map(|s| s.trim().parse().ok()).collect();
        let row = row.ok_or_else(|| malformed(path, format!("row {} is not numeric", rows.len() + 1)))?;
        if row.len() != nx {
            return Err(malformed(path, format!("row {} has {} columns, expected {nx}", rows.len() + 1, row.len())));
        }
        rows.push(row);
    }
    if rows.len() != ny {
        return Err(malformed(path, format!("{} rows, expected {ny}", rows.len())));
    }
    Ok(rows)
}

pub fn read_field_map(sidecar_path: &Path) -> Result<FieldSlice> {
    let text = fs::read_to_string(sidecar_path).map_err(read_err(sidecar_path))?;
    let side: FieldMapSidecar =
        serde_json::from_str(&text).map_err(|e| malformed(sidecar_path, e.to_string()))?;
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let (nx, ny) = (side.x_nm.len(), side.y_nm.len());
    let re = read_matrix(&dir.join(&side.re_file), nx, ny)?;
    let im = read_matrix(&dir.join(&side.im_file), nx, ny)?;
    let mut values = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            values.push(Complex64::new(re[iy][ix], im[iy][ix]));
        }
    }
    Ok(FieldSlice {
        component: side.component,
        wavelength_nm: side.wavelength_nm,
        z: side.plane_z_nm * NM,
        xs: side.x_nm.iter().map(|x| x * NM).collect(),
        ys: side.y_nm.iter().map(|y| y * NM).collect(),
        values,
    })
}

/// Sidecars in `<dir>/maps`, sorted by file name.
pub fn list_field_maps(dir: &Path) -> Result<Vec<PathBuf>> {
    let maps = dir.join(MAP_DIR);
    if !maps.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(&maps)
        .map_err(read_err(&maps))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    out.sort();
    Ok(out)
}

/// Run manifest written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub config_hash: String,
    pub software_version: String,
    pub steps: u64,
    pub wall_time_s: f64,
    /// Final field energy over its running peak.
    pub decay_ratio: f64,
    pub decayed: bool,
    pub dt_s: f64,
    pub grid_cells: [usize; 3],
    pub resolution_nm: f64,
    pub delta_nm: f64,
    pub polarization: Option<String>,
    /// How the main spectrum is normalized.
    pub normalization: String,
    /// Output files relative to the run directory.
    pub files: Vec<String>,
    /// Manifest of the empty-cell reference run, when one was made.
    #[serde(default)]
    pub reference: Option<Box<RunMetadata>>,
}

impl RunMetadata {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(METADATA_FILE), &(serde_json::to_string_pretty(self)? + "\n"))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(METADATA_FILE);
        let text = fs::read_to_string(&path).map_err(read_err(&path))?;
        serde_json::from_str(&text).map_err(|e| malformed(&path, e.to_string()))
    }
}
