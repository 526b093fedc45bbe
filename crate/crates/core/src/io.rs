//! File formats: MSR JSON documents, indicator CSV grids, plain PGM images,
//! provenance maps. Every write goes to a temporary file that is then renamed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImagingGrid;
use crate::msr::{DirectionGrid, MsrMatrix, Provenance};

pub const MSR_FORMAT: &str = "msr-v1";
pub const NORMALIZATION: &str = "phi-to-plane-wave";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

#[derive(Serialize, Deserialize)]
struct MsrHeader {
    format: String,
    k: f64,
    m: usize,
    curve: String,
    normalization: String,
}

#[derive(Deserialize)]
struct MsrDocument {
    format: String,
    k: f64,
    m: usize,
    #[serde(default)]
    curve: Option<String>,
    normalization: String,
    entries: Vec<Vec<[f64; 2]>>,
    mask: Vec<Vec<bool>>,
    provenance: Vec<Vec<Provenance>>,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("in-memory values serialize")
}

/// Serializes an MSR matrix. Rows appear in incident order, one per line.
///
/// Numbers use the shortest representation that parses back to the same
/// `f64`, so a write/read cycle is bit-exact.
pub fn msr_to_string(f: &MsrMatrix) -> String {
    let n = f.size();
    let mut meta = f.meta.clone();
    meta.insert("index_base".into(), 1.into());
    meta.insert("row_index".into(), "incident direction".into());
    meta.insert("column_index".into(), "observation direction".into());
    meta.insert("grid_angles".into(), "theta_i = (i-1) pi / m".into());
    if let Some(nq) = f.node_count {
        meta.insert("node_count".into(), nq.into());
    }
    let header = MsrHeader {
        format: MSR_FORMAT.into(),
        k: f.wavenumber,
        m: f.grid.m,
        curve: f.curve.clone().unwrap_or_else(|| "unspecified".into()),
        normalization: NORMALIZATION.into(),
    };
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "\"format\": {},", json(&header.format));
    let _ = writeln!(s, "\"k\": {},", json(&header.k));
    let _ = writeln!(s, "\"m\": {},", header.m);
    let _ = writeln!(s, "\"curve\": {},", json(&header.curve));
    let _ = writeln!(s, "\"normalization\": {},", json(&header.normalization));

    let rows = |cell: &dyn Fn(usize, usize) -> String| -> String {
        (0..n)
            .map(|i| {
                let row: Vec<String> = (0..n).map(|j| cell(i, j)).collect();
                format!("[{}]", row.join(","))
            })
            .collect::<Vec<_>>()
            .join(",\n")
    };
    let _ = writeln!(
        s,
        "\"entries\": [\n{}\n],",
        rows(&|i, j| {
            let v = f.entries[(i, j)];
            format!("[{},{}]", json(&v.re), json(&v.im))
        })
    );
    let _ = writeln!(
        s,
        "\"mask\": [\n{}\n],",
        rows(&|i, j| json(&f.is_known(i, j)))
    );
    let _ = writeln!(
        s,
        "\"provenance\": [\n{}\n],",
        rows(&|i, j| json(&f.provenance[(i, j)]))
    );
    let _ = writeln!(s, "\"meta\": {}", json(&meta));
    s.push_str("}\n");
    s
}

pub fn write_msr(path: &Path, f: &MsrMatrix) -> Result<()> {
    write_atomic(path, msr_to_string(f).as_bytes())
}

pub fn msr_from_str(text: &str, path: &Path) -> Result<MsrMatrix> {
    let doc: MsrDocument =
        serde_json::from_str(text).map_err(|e| format_err(path, e.to_string()))?;
    if doc.format != MSR_FORMAT {
        return Err(format_err(
            path,
            format!("unsupported format `{}`", doc.format),
        ));
    }
    if doc.normalization != NORMALIZATION {
        return Err(format_err(
            path,
            format!("unsupported normalization `{}`", doc.normalization),
        ));
    }
    let grid = DirectionGrid::new(doc.m).map_err(|e| format_err(path, e.to_string()))?;
    let n = grid.len();
    let square = |lens: Vec<usize>| lens.len() == n && lens.iter().all(|&l| l == n);
    if !square(doc.entries.iter().map(Vec::len).collect())
        || !square(doc.mask.iter().map(Vec::len).collect())
        || !square(doc.provenance.iter().map(Vec::len).collect())
    {
        return Err(format_err(
            path,
            format!("entries, mask and provenance must be {n}×{n}"),
        ));
    }
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let [re, im] = doc.entries[i][j];
        Complex64::new(re, im)
    });
    let provenance = DMatrix::from_fn(n, n, |i, j| doc.provenance[i][j]);
    for i in 0..n {
        for j in 0..n {
            let known = provenance[(i, j)].is_known();
            if doc.mask[i][j] != known {
                return Err(format_err(
                    path,
                    format!("mask and provenance disagree at ({}, {})", i + 1, j + 1),
                ));
            }
            let v = entries[(i, j)];
            if known && !(v.re.is_finite() && v.im.is_finite()) {
                return Err(format_err(
                    path,
                    format!("non-finite known entry at ({}, {})", i + 1, j + 1),
                ));
            }
        }
    }
    let mut meta = doc.meta;
    let node_count = meta
        .remove("node_count")
        .and_then(|v| v.as_u64())
        .map(|v| v as usize);
    for key in ["index_base", "row_index", "column_index", "grid_angles"] {
        meta.remove(key);
    }
    Ok(MsrMatrix {
        grid,
        wavenumber: doc.k,
        entries,
        provenance,
        curve: doc.curve.filter(|c| c != "unspecified"),
        node_count,
        meta,
    })
}

pub fn read_msr(path: &Path) -> Result<MsrMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    msr_from_str(&text, path)
}

fn provenance_char(p: Provenance) -> char {
    match p {
        Provenance::Measured => 'm',
        Provenance::Symmetry => 's',
        Provenance::Mgf => 'g',
        Provenance::Mslp => 'l',
        Provenance::Unknown => '.',
    }
}

/// One line per incident row, one character per entry:
/// `m` measured, `s` symmetry, `g` Green's formula, `l` single layer, `.` unknown.
pub fn provenance_map(f: &MsrMatrix) -> String {
    let n = f.size();
    let mut s = String::with_capacity(n * (n + 1));
    for i in 0..n {
        for j in 0..n {
            s.push(provenance_char(f.provenance[(i, j)]));
        }
        s.push('\n');
    }
    s
}

/// `x,y,value` rows, row-major from `(x_min, y_min)`, 17 significant digits.
pub fn grid_to_csv(grid: &ImagingGrid) -> String {
    let mut s = String::from("x,y,value\n");
    for (i, v) in grid.values.iter().enumerate() {
        let p = grid.point(i);
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p.x, p.y, v);
    }
    s
}

pub fn write_grid_csv(path: &Path, grid: &ImagingGrid) -> Result<()> {
    write_atomic(path, grid_to_csv(grid).as_bytes())
}

pub fn grid_from_csv(text: &str, path: &Path) -> Result<ImagingGrid> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y,value") {
        return Err(format_err(path, "missing `x,y,value` header"));
    }
    let mut pts = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| format_err(path, format!("bad number `{s}` on line {}", n + 2)))
        };
        if cols.len() != 3 {
            return Err(format_err(
                path,
                format!("expected 3 columns on line {}", n + 2),
            ));
        }
        pts.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
    }
    if pts.is_empty() {
        return Err(format_err(path, "no grid points"));
    }
    // the first row runs in x at constant y
    let y0 = pts[0].1;
    let nx = pts.iter().take_while(|p| p.1 == y0).count();
    if pts.len() % nx != 0 {
        return Err(format_err(
            path,
            "point count is not a multiple of the row length",
        ));
    }
    let ny = pts.len() / nx;
    let bounds = [pts[0].0, pts[nx - 1].0, y0, pts[pts.len() - 1].1];
    let mut grid = ImagingGrid::new(bounds, nx, ny).map_err(|e| format_err(path, e.to_string()))?;
    grid.values = pts.iter().map(|p| p.2).collect();
    Ok(grid)
}

pub fn read_grid_csv(path: &Path) -> Result<ImagingGrid> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    grid_from_csv(&text, path)
}

/// Plain `P2` image, top row at `y_max`, grey level `round(255 · normalized)`.
pub fn grid_to_pgm(grid: &ImagingGrid) -> String {
    let norm = grid.normalize();
    let mut s = format!("P2\n{} {}\n255\n", grid.nx, grid.ny);
    for iy in (0..grid.ny).rev() {
        let mut line = String::new();
        for ix in 0..grid.nx {
            let level = (255.0 * norm.value_at(ix, iy)).round().clamp(0.0, 255.0) as u32;
            let tok = level.to_string();
            if !line.is_empty() && line.len() + 1 + tok.len() > 70 {
                s.push_str(&line);
                s.push('\n');
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&tok);
        }
        s.push_str(&line);
        s.push('\n');
    }
    s
}

pub fn write_pgm(path: &Path, grid: &ImagingGrid) -> Result<()> {
    write_atomic(path, grid_to_pgm(grid).as_bytes())
}
