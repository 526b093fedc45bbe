//! Multi-static response matrices on equispaced direction grids.
//!
//! Rows index incident directions `d_i`, columns observation directions
//! `x̂_j`, both drawn from the same grid `θ_i = (i-1)π/m`, `i = 1..2m`.
//! Indices are 0-based in code.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// The `2m` equispaced directions `θ_i = iπ/m`, `i = 0..2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionGrid {
    pub m: usize,
}

impl DirectionGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("direction grid needs m >= 1"));
        }
        Ok(Self { m })
    }

    /// Number of directions, `2m`.
    pub fn len(&self) -> usize {
        2 * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * PI / self.m as f64
    }

    pub fn direction(&self, i: usize) -> Vec2 {
        let (s, c) = self.angle(i).sin_cos();
        Vec2::new(c, s)
    }

    pub fn directions(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.direction(i)).collect()
    }

    /// Index of the antipodal direction, `d_{i+m} = -d_i`.
    pub fn antipode(&self, i: usize) -> usize {
        (i + self.m) % self.len()
    }

    /// Reciprocity involution `σ(i, j) = (j + m, i + m) mod 2m`.
    pub fn sigma(&self, i: usize, j: usize) -> (usize, usize) {
        (self.antipode(j), self.antipode(i))
    }

    /// Number of leading observation columns covering `fraction` of the circle.
    pub fn columns_for_fraction(&self, fraction: f64) -> Result<usize> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!(
                "aperture fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let l = (fraction * self.len() as f64).round() as usize;
        Ok(l.max(1))
    }
}

/// Where an entry's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Symmetry,
    Mgf,
    Mslp,
    Unknown,
}

impl Provenance {
    pub fn is_known(self) -> bool {
        self != Provenance::Unknown
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Symmetry => "symmetry",
            Provenance::Mgf => "mgf",
            Provenance::Mslp => "mslp",
            Provenance::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "measured" => Provenance::Measured,
            "symmetry" => Provenance::Symmetry,
            "mgf" => Provenance::Mgf,
            "mslp" => Provenance::Mslp,
            "unknown" => Provenance::Unknown,
            _ => return Err(Error::config(format!("unknown provenance `{s}`"))),
        })
    }
}

/// A `2m × 2m` far-field matrix with a per-entry provenance map.
///
/// An entry is known exactly when its provenance is not `Unknown`; unknown
/// entries are stored as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrMatrix {
    pub grid: DirectionGrid,
    pub wavenumber: f64,
    pub entries: DMatrix<Complex64>,
    pub provenance: DMatrix<Provenance>,
    pub curve: Option<String>,
    pub node_count: Option<usize>,
    /// Free-form metadata carried into the file header.
    pub meta: BTreeMap<String, serde_json::Value>,
}

/// Relative noise level and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::config(format!(
                "noise level must be >= 0, got {delta}"
            )));
        }
        Ok(Self { delta, seed })
    }
}

/// The four `m × m` blocks `[[F11, F12], [F21, F22]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub f11: DMatrix<Complex64>,
    pub f12: DMatrix<Complex64>,
    pub f21: DMatrix<Complex64>,
    pub f22: DMatrix<Complex64>,
}

impl Blocks {
    pub fn assemble(&self) -> DMatrix<Complex64> {
        let m = self.f11.nrows();
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(&self.f11);
        out.view_mut((0, m), (m, m)).copy_from(&self.f12);
        out.view_mut((m, 0), (m, m)).copy_from(&self.f21);
        out.view_mut((m, m), (m, m)).copy_from(&self.f22);
        out
    }

    /// `[[F12, F11], [F22, F21]]`, which reciprocity makes symmetric.
    pub fn rearranged(&self) -> DMatrix<Complex64> {
        Blocks {
            f11: self.f12.clone(),
            f12: self.f11.clone(),
            f21: self.f22.clone(),
            f22: self.f21.clone(),
        }
        .assemble()
    }
}

/// Mismatch between a pair of matrices over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub max_abs: f64,
    pub rel_fro: f64,
    pub count: usize,
}

/// A measured/measured reciprocity pair that disagrees beyond rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conflict {
    pub entry: (usize, usize),
    pub partner: (usize, usize),
    pub difference: f64,
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

impl MsrMatrix {
    /// Wraps a fully known matrix; every entry is marked measured.
    pub fn from_entries(
        grid: DirectionGrid,
        wavenumber: f64,
        entries: DMatrix<Complex64>,
    ) -> Result<Self> {
        let n = grid.len();
        if entries.shape() != (n, n) {
            return Err(Error::config(format!(
                "MSR entries must be {n}×{n}, got {:?}",
                entries.shape()
            )));
        }
        if entries
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::numerical("non-finite MSR entry"));
        }
        Ok(Self {
            grid,
            wavenumber,
            entries,
            provenance: DMatrix::from_element(n, n, Provenance::Measured),
            curve: None,
            node_count: None,
            meta: BTreeMap::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn is_known(&self, i: usize, j: usize) -> bool {
        self.provenance[(i, j)].is_known()
    }

    pub fn mask(&self) -> DMatrix<bool> {
        self.provenance.map(Provenance::is_known)
    }

    pub fn known_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.is_known()).count()
    }

    pub fn is_full(&self) -> bool {
        self.provenance.iter().all(|p| p.is_known())
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.provenance.iter().filter(|&&q| q == p).count()
    }

    /// `Some(l)` when the mask is exactly the first `l` columns (`l = 2m` for a full mask).
    pub fn leading_columns(&self) -> Option<usize> {
        let n = self.size();
        let l = (0..n).take_while(|&j| self.is_known(0, j)).count();
        for i in 0..n {
            for j in 0..n {
                if self.is_known(i, j) != (j < l) {
                    return None;
                }
            }
        }
        Some(l)
    }

    /// Keeps the first `l` observation columns as measured data.
    pub fn restrict(&self, l: usize) -> Result<Self> {
        let n = self.size();
        if l == 0 || l >= n {
            return Err(Error::config(format!(
                "aperture must satisfy 1 <= l < 2m = {n}, got l = {l}"
            )));
        }
        if !self.is_full() {
            return Err(Error::config("restrict needs a fully known MSR matrix"));
        }
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                if j < l {
                    out.provenance[(i, j)] = Provenance::Measured;
                } else {
                    out.provenance[(i, j)] = Provenance::Unknown;
                    out.entries[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        out.meta.insert("aperture_columns".into(), l.into());
        Ok(out)
    }

    pub fn blocks(&self) -> Blocks {
        let m = self.grid.m;
        let e = &self.entries;
        Blocks {
            f11: e.view((0, 0), (m, m)).into_owned(),
            f12: e.view((0, m), (m, m)).into_owned(),
            f21: e.view((m, 0), (m, m)).into_owned(),
            f22: e.view((m, m), (m, m)).into_owned(),
        }
    }

    /// Copies every known entry onto its unknown reciprocity partner.
    ///
    /// Known entries are never overwritten. Because `σ` is an involution a
    /// single pass closes the mask.
    pub fn reciprocity_complete(&self) -> Self {
        let n = self.size();
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                if !self.is_known(i, j) {
                    continue;
                }
                let (p, q) = self.grid.sigma(i, j);
                if !self.is_known(p, q) {
                    out.entries[(p, q)] = self.entries[(i, j)];
                    out.provenance[(p, q)] = Provenance::Symmetry;
                }
            }
        }
        for c in self.reciprocity_conflicts(10.0 * f64::EPSILON) {
            log::debug!(
                "reciprocity conflict at {:?} / {:?}: |Δ| = {:.3e}",
                c.entry,
                c.partner,
                c.difference
            );
        }
        out
    }

    /// Measured pairs `(i,j)`, `σ(i,j)` whose values differ by more than
    /// `rel_tol · |value|`. Noisy data legitimately produces conflicts.
    pub fn reciprocity_conflicts(&self, rel_tol: f64) -> Vec<Conflict> {
        let n = self.size();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let partner = self.grid.sigma(i, j);
                if partner <= (i, j) {
                    continue;
                }
                if self.provenance[(i, j)] != Provenance::Measured
                    || self.provenance[partner] != Provenance::Measured
                {
                    continue;
                }
                let a = self.entries[(i, j)];
                let diff = (a - self.entries[partner]).norm();
                if diff > rel_tol * a.norm() {
                    out.push(Conflict {
                        entry: (i, j),
                        partner,
                        difference: diff,
                    });
                }
            }
        }
        out
    }

    /// Row and column ranges of the known block, which must be a full rectangle.
    fn known_rectangle(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.size();
        let rows: Vec<usize> = (0..n)
            .filter(|&i| (0..n).any(|j| self.is_known(i, j)))
            .collect();
        let cols: Vec<usize> = (0..n)
            .filter(|&j| (0..n).any(|i| self.is_known(i, j)))
            .collect();
        for &i in &rows {
            for &j in &cols {
                if !self.is_known(i, j) {
                    return Err(Error::config(
                        "noise model needs the known entries to form a rectangular block",
                    ));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::config("noise model needs at least one known entry"));
        }
        Ok((rows, cols))
    }

    /// The known block as a dense matrix (rows × columns of the known rectangle).
    pub fn known_block(&self) -> Result<DMatrix<Complex64>> {
        let (rows, cols) = self.known_rectangle()?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
            self.entries[(rows[a], cols[b])]
        }))
    }

    /// `F^δ = F + δ‖F‖ (R1 + iR2)/‖R1 + iR2‖` on the known block, spectral norms.
    pub fn add_noise(&self, noise: NoiseSpec) -> Result<Self> {
        let (rows, cols) = self.known_rectangle()?;
        let mut out = self.clone();
        out.meta.insert("noise_delta".into(), noise.delta.into());
        out.meta.insert("noise_seed".into(), noise.seed.into());
        out.meta.insert("noise_norm".into(), "spectral".into());
        if noise.delta == 0.0 {
            return Ok(out);
        }
        let (nr, nc) = (rows.len(), cols.len());
        let block = DMatrix::from_fn(nr, nc, |a, b| self.entries[(rows[a], cols[b])]);
        let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
        let mut draw = |count: usize| -> Vec<f64> {
            (0..count)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        };
        let r1 = draw(nr * nc);
        let r2 = draw(nr * nc);
        // row-major fill
        let perturb = DMatrix::from_fn(nr, nc, |a, b| {
            Complex64::new(r1[a * nc + b], r2[a * nc + b])
        });
        let scale = noise.delta * spectral_norm(&block) / spectral_norm(&perturb);
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.entries[(i, j)] = block[(a, b)] + perturb[(a, b)] * scale;
            }
        }
        Ok(out)
    }

    /// Compares `self` against `reference` on the entries where `region` is true.
    pub fn error_metrics(
        &self,
        reference: &MsrMatrix,
        region: &DMatrix<bool>,
    ) -> Result<ErrorMetrics> {
        if self.grid != reference.grid {
            return Err(Error::config(format!(
                "direction grids differ (m = {} vs {})",
                self.grid.m, reference.grid.m
            )));
        }
        if region.shape() != self.entries.shape() {
            return Err(Error::config("region shape does not match the matrix"));
        }
        let mut max_abs = 0.0_f64;
        let (mut num, mut den) = (0.0, 0.0);
        let mut count = 0;
        for ((a, b), &r) in self
            .entries
            .iter()
            .zip(reference.entries.iter())
            .zip(region.iter())
        {
            if !r {
                continue;
            }
            let d = (a - b).norm();
            max_abs = max_abs.max(d);
            num += d * d;
            den += b.norm_sqr();
            count += 1;
        }
        if count == 0 {
            return Err(Error::config("comparison region contains no entries"));
        }
        let rel_fro = if den > 0.0 {
            (num / den).sqrt()
        } else if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Ok(ErrorMetrics {
            max_abs,
            rel_fro,
            count,
        })
    }
}
