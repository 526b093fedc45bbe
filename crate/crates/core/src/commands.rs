//! Subcommand implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{Indicator, RunConfig};
use crate::error::{Error, Result};
use crate::forward::{assemble_msr, ScatteringProblem};
use crate::geometry::Curve;
use crate::imaging::{dsm_full, dsm_limited, fm_indicator, ImagingGrid, FM_EIGEN_FLOOR};
use crate::io;
use crate::msr::{MsrMatrix, NoiseSpec, Provenance};
use crate::recovery::{dr_msr, ArtificialBoundary, Method, RecoverySchedule};

pub const FORWARD_FILE: &str = "msr.json";
pub const DEGRADED_FILE: &str = "msr_limited.json";

pub fn recovered_file(method: Method) -> String {
    format!("msr_recovered_{method}.json")
}

fn imaging_grid(cfg: &RunConfig) -> Result<ImagingGrid> {
    ImagingGrid::new(cfg.bounds, cfg.grid.0, cfg.grid.1)
}

/// Exact full-aperture MSR matrix for the configured obstacle.
pub fn cmd_forward(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = ScatteringProblem::new(cfg.k, cfg.obstacle)?;
    let mut f = assemble_msr(problem, cfg.m, cfg.nq)?;
    f.meta
        .insert("boundary_condition".into(), "sound-soft".into());
    f.meta
        .insert("solver".into(), "combined-field Nystrom, eta = k".into());
    let path = cfg.out.join(FORWARD_FILE);
    io::write_msr(&path, &f)?;
    log::info!(
        "forward data written to {} in {:.2?}",
        path.display(),
        start.elapsed()
    );
    Ok(path)
}

/// Keeps the configured aperture and perturbs it with relative noise.
pub fn cmd_degrade(cfg: &RunConfig, input: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let f = io::read_msr(input)?;
    let l = cfg.aperture.columns(&f.grid)?;
    if l >= f.size() {
        return Err(Error::config(format!(
            "aperture keeps {l} of {} columns; degrade needs l < 2m",
            f.size()
        )));
    }
    let limited = f
        .restrict(l)?
        .add_noise(NoiseSpec::new(cfg.delta, cfg.seed)?)?;
    let path = cfg.out.join(DEGRADED_FILE);
    io::write_msr(&path, &limited)?;
    Ok(path)
}

/// Runs the stepping recovery; writes the completed matrix and its provenance map.
pub fn cmd_recover(cfg: &RunConfig, input: &Path) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let f = io::read_msr(input)?;
    let boundary = ArtificialBoundary::new(cfg.radius, cfg.nq)?;
    if let Some(curve) = f.curve.as_deref().and_then(|c| c.parse::<Curve>().ok()) {
        boundary.check_encloses(&curve)?;
    }
    let schedule = RecoverySchedule::new(cfg.method, cfg.t)?;
    let recovered = dr_msr(&f, schedule, &boundary, cfg.alpha)?;
    let path = cfg.out.join(recovered_file(cfg.method));
    io::write_msr(&path, &recovered)?;
    let map_path = cfg.out.join(format!("provenance_{}.txt", cfg.method));
    io::write_atomic(&map_path, io::provenance_map(&recovered).as_bytes())?;
    Ok((path, map_path))
}

/// Evaluates an indicator; writes raw and normalized CSV grids, a PGM heatmap
/// and a metadata sidecar.
pub fn cmd_image(cfg: &RunConfig, input: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let f = io::read_msr(input)?;
    let grid = imaging_grid(cfg)?;
    let (values, variant) = match cfg.indicator {
        Indicator::Dsm if f.is_full() => (dsm_full(&f, &grid)?, "full"),
        Indicator::Dsm => (dsm_limited(&f, &grid)?, "limited"),
        Indicator::Fm => {
            if !f.is_full() {
                return Err(Error::config(
                    "the factorization method needs full-aperture data (recover it first)",
                ));
            }
            (fm_indicator(&f, &grid)?, "full")
        }
    };
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "msr".into());
    let base = format!("{stem}_{}", cfg.indicator);
    let raw = cfg.out.join(format!("{base}.csv"));
    let norm = cfg.out.join(format!("{base}_normalized.csv"));
    let pgm = cfg.out.join(format!("{base}.pgm"));
    let meta = cfg.out.join(format!("{base}_meta.json"));
    io::write_grid_csv(&raw, &values)?;
    io::write_grid_csv(&norm, &values.normalize())?;
    io::write_pgm(&pgm, &values)?;
    let mut info = json!({
        "indicator": cfg.indicator.to_string(),
        "variant": variant,
        "source": input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        "k": f.wavenumber,
        "m": f.grid.m,
        "known_columns": f.leading_columns(),
        "grid": [grid.nx, grid.ny],
        "bounds": [grid.x_min, grid.x_max, grid.y_min, grid.y_max],
        "raw_max": values.max(),
        "layout": "row-major from (x_min, y_min); PGM top row = y_max",
    });
    if cfg.indicator == Indicator::Fm {
        info["eigenvalue_floor"] = json!(FM_EIGEN_FLOOR);
    }
    io::write_atomic(
        &meta,
        serde_json::to_string_pretty(&info)
            .expect("json")
            .as_bytes(),
    )?;
    Ok(vec![raw, norm, pgm, meta])
}

/// Selects MSR entries for comparison, judged on the provenance of `f`.
///
/// `all`, `known`, `measured`, `symmetry`, `mgf`, `mslp`, `recovered`
/// (mgf or mslp), or `rows=A-B,cols=C-D` with 1-based inclusive ranges.
pub fn parse_region(spec: &str, f: &MsrMatrix) -> Result<DMatrix<bool>> {
    let n = f.size();
    let by = |pred: &dyn Fn(Provenance) -> bool| f.provenance.map(pred);
    Ok(match spec.trim() {
        "all" => DMatrix::from_element(n, n, true),
        "known" => by(&|p| p.is_known()),
        "measured" => by(&|p| p == Provenance::Measured),
        "symmetry" => by(&|p| p == Provenance::Symmetry),
        "mgf" => by(&|p| p == Provenance::Mgf),
        "mslp" => by(&|p| p == Provenance::Mslp),
        "recovered" => by(&|p| matches!(p, Provenance::Mgf | Provenance::Mslp)),
        other => {
            let bad = || Error::config(format!("cannot parse region `{other}`"));
            let mut rows = (1, n);
            let mut cols = (1, n);
            for part in other.split(',') {
                let (key, range) = part.split_once('=').ok_or_else(bad)?;
                let (a, b) = range.split_once('-').ok_or_else(bad)?;
                let r: (usize, usize) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if r.0 < 1 || r.0 > r.1 || r.1 > n {
                    return Err(Error::config(format!(
                        "region range {a}-{b} outside 1..{n}"
                    )));
                }
                match key.trim() {
                    "rows" => rows = r,
                    "cols" => cols = r,
                    _ => return Err(bad()),
                }
            }
            DMatrix::from_fn(n, n, |i, j| {
                (rows.0..=rows.1).contains(&(i + 1)) && (cols.0..=cols.1).contains(&(j + 1))
            })
        }
    })
}

fn is_msr_path(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
}

fn point_json(p: crate::geometry::Vec2) -> Value {
    json!([p.x, p.y])
}

/// Compares two MSR files (reference first) or two CSV grids.
pub fn cmd_compare(a: &Path, b: &Path, region: Option<&str>) -> Result<Value> {
    match (is_msr_path(a), is_msr_path(b)) {
        (true, true) => {
            let fa = io::read_msr(a)?;
            let fb = io::read_msr(b)?;
            if fa.grid != fb.grid {
                return Err(Error::config(format!(
                    "shape mismatch: {}×{} vs {}×{}",
                    fa.size(),
                    fa.size(),
                    fb.size(),
                    fb.size()
                )));
            }
            let region_spec = region.unwrap_or("all");
            let mask = parse_region(region_spec, &fb)?;
            let metrics = fb.error_metrics(&fa, &mask)?;
            Ok(json!({
                "kind": "msr",
                "region": region_spec,
                "entries": metrics.count,
                "max_abs": metrics.max_abs,
                "rel_fro": metrics.rel_fro,
            }))
        }
        (false, false) => {
            if region.is_some() {
                return Err(Error::config("--region applies to MSR files only"));
            }
            let ga = io::read_grid_csv(a)?;
            let gb = io::read_grid_csv(b)?;
            let diff = ga.max_abs_difference(&gb)?;
            let (pa, pb) = (ga.argmax(), gb.argmax());
            let na = ga.normalize();
            let nb = gb.normalize();
            Ok(json!({
                "kind": "grid",
                "max_abs": diff,
                "max_abs_normalized": na.max_abs_difference(&nb)?,
                "argmax_a": point_json(pa),
                "argmax_b": point_json(pb),
                "argmax_distance": (pa - pb).norm(),
                "centroid_0.9_a": ga.level_centroid(0.9).map(point_json),
                "centroid_0.9_b": gb.level_centroid(0.9).map(point_json),
            }))
        }
        _ => Err(Error::config(
            "compare needs two MSR files or two grid files",
        )),
    }
}

/// Full pipeline for one aperture: forward, degrade, both recoveries, images.
pub fn cmd_demo(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut files = Vec::new();
    let exact = cmd_forward(cfg)?;
    files.push(exact.clone());
    let limited = cmd_degrade(cfg, &exact)?;
    files.push(limited.clone());

    let mut dsm = cfg.clone();
    dsm.indicator = Indicator::Dsm;
    files.extend(cmd_image(&dsm, &exact)?);
    files.extend(cmd_image(&dsm, &limited)?);

    let mut report = serde_json::Map::new();
    for method in [Method::Mgf, Method::Mslp] {
        let mut c = cfg.clone();
        c.method = method;
        let (recovered, map) = cmd_recover(&c, &limited)?;
        files.push(recovered.clone());
        files.push(map);
        files.extend(cmd_image(&dsm, &recovered)?);
        let mut fm = c.clone();
        fm.indicator = Indicator::Fm;
        files.extend(cmd_image(&fm, &recovered)?);
        report.insert(
            method.to_string(),
            json!({
                "all": cmd_compare(&exact, &recovered, Some("all"))?,
                "recovered": cmd_compare(&exact, &recovered, Some("recovered"))?,
            }),
        );
    }
    let summary = cfg.out.join("demo_report.json");
    io::write_atomic(
        &summary,
        serde_json::to_string_pretty(&Value::Object(report))
            .expect("json")
            .as_bytes(),
    )?;
    files.push(summary);
    Ok(files)
}
