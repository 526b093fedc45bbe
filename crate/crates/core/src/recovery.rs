//! Full-aperture recovery of far-field data on an artificial circle.
//!
//! Two first-kind models are fitted to the known far-field samples of one
//! incident row and then re-evaluated in every direction:
//!
//! * Green's formula: Cauchy data `(φ, ψ) = (u^s, ∂u^s/∂ν)` on `∂B` with
//!   `u∞(x̂) = ∫ φ ∂_ν e^{-ik x̂·y} - ψ e^{-ik x̂·y} ds(y)`.
//! * Single layer: a density `φ` on `∂B` with `u∞(x̂) = ∫ e^{-ik x̂·y} φ ds(y)`.
//!
//! Quadrature weights are folded into the operator matrices so the
//! Tikhonov problem `min ‖Ac - b‖² + α‖c‖²` is in standard form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{discretize, Curve, QuadratureBoundary, Vec2};
use crate::msr::{MsrMatrix, Provenance};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default Tikhonov parameter.
pub const DEFAULT_ALPHA: f64 = 1e-2;
/// Default radius of the artificial circle.
pub const DEFAULT_RADIUS: f64 = 5.0;
/// Default node count on the artificial circle.
pub const DEFAULT_NODES: usize = 256;
/// Default number of new directions per side per step.
pub const DEFAULT_STEP: usize = 5;

/// Origin-centred circle `∂B` carrying the recovery densities.
#[derive(Debug, Clone)]
pub struct ArtificialBoundary {
    pub radius: f64,
    pub quadrature: QuadratureBoundary,
}

impl ArtificialBoundary {
    pub fn new(radius: f64, node_count: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config(format!(
                "artificial radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            radius,
            quadrature: discretize(Curve::circle(radius), node_count)?,
        })
    }

    /// Fails when the obstacle is not strictly inside the circle.
    pub fn check_encloses(&self, obstacle: &Curve) -> Result<()> {
        let r = obstacle.circumradius();
        if r >= self.radius {
            return Err(Error::config(format!(
                "artificial radius {} does not enclose the obstacle (circumradius {r:.4})",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.quadrature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quadrature.is_empty()
    }
}

/// Recovery scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Green's formula (Cauchy data on `∂B`).
    Mgf,
    /// Single-layer potential on `∂B`.
    Mslp,
}

impl Method {
    pub fn provenance(self) -> Provenance {
        match self {
            Method::Mgf => Provenance::Mgf,
            Method::Mslp => Provenance::Mslp,
        }
    }

    pub fn operator(
        self,
        boundary: &ArtificialBoundary,
        k: f64,
        observations: &[Vec2],
    ) -> DMatrix<Complex64> {
        match self {
            Method::Mgf => mgf_operator(boundary, k, observations),
            Method::Mslp => mslp_operator(boundary, k, observations),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mgf => "mgf",
            Method::Mslp => "mslp",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mgf" => Ok(Method::Mgf),
            "mslp" => Ok(Method::Mslp),
            _ => Err(Error::config(format!(
                "unknown method `{s}` (expected mgf or mslp)"
            ))),
        }
    }
}

/// Cauchy data on the artificial boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyDensity {
    pub trace: Vec<Complex64>,
    pub flux: Vec<Complex64>,
}

impl CauchyDensity {
    fn stacked(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.trace.len() + self.flux.len(),
            self.trace.iter().chain(&self.flux).copied(),
        )
    }
}

/// Single-layer density on the artificial boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLayerDensity(pub Vec<Complex64>);

/// `[ -ik(x̂·ν_j) e^{-ik x̂·y_j} w_j | -e^{-ik x̂·y_j} w_j ]`, one row per direction.
pub fn mgf_operator(
    boundary: &ArtificialBoundary,
    k: f64,
    observations: &[Vec2],
) -> DMatrix<Complex64> {
    let q = &boundary.quadrature;
    let n = q.len();
    DMatrix::from_fn(observations.len(), 2 * n, |o, c| {
        let xh = observations[o];
        let j = c % n;
        let plane = Complex64::from_polar(q.weights[j], -k * xh.dot(&q.points[j]));
        if c < n {
            -I * k * xh.dot(&q.normals[j]) * plane
        } else {
            -plane
        }
    })
}

/// `e^{-ik x̂·y_j} w_j`, one row per direction.
pub fn mslp_operator(
    boundary: &ArtificialBoundary,
    k: f64,
    observations: &[Vec2],
) -> DMatrix<Complex64> {
    let q = &boundary.quadrature;
    DMatrix::from_fn(observations.len(), q.len(), |o, j| {
        Complex64::from_polar(q.weights[j], -k * observations[o].dot(&q.points[j]))
    })
}

/// Far field of Cauchy data in the given directions.
pub fn mgf_far_field(
    boundary: &ArtificialBoundary,
    k: f64,
    density: &CauchyDensity,
    observations: &[Vec2],
) -> Vec<Complex64> {
    (mgf_operator(boundary, k, observations) * density.stacked())
        .iter()
        .copied()
        .collect()
}

/// Far field of a single-layer density in the given directions.
pub fn mslp_far_field(
    boundary: &ArtificialBoundary,
    k: f64,
    density: &SingleLayerDensity,
    observations: &[Vec2],
) -> Vec<Complex64> {
    let c = DVector::from_column_slice(&density.0);
    (mslp_operator(boundary, k, observations) * c)
        .iter()
        .copied()
        .collect()
}

/// SVD of a first-kind operator, reusable across right-hand sides and `α`.
pub struct Tikhonov {
    u: DMatrix<Complex64>,
    sigma: DVector<f64>,
    v_adj: DMatrix<Complex64>,
}

impl Tikhonov {
    pub fn new(a: &DMatrix<Complex64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::config("Tikhonov operator is empty"));
        }
        if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("non-finite entry in Tikhonov operator"));
        }
        let svd = a.clone().svd(true, true);
        let u = svd
            .u
            .ok_or_else(|| Error::numerical("SVD did not return U"))?;
        let v_adj = svd
            .v_t
            .ok_or_else(|| Error::numerical("SVD did not return V*"))?;
        if svd.singular_values.iter().any(|s| !s.is_finite()) {
            return Err(Error::numerical("SVD failed to converge"));
        }
        Ok(Self {
            u,
            sigma: svd.singular_values,
            v_adj,
        })
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }

    /// Filter factors `σ/(σ² + α)`.
    fn filter(&self, alpha: f64) -> DVector<Complex64> {
        self.sigma.map(|s| Complex64::new(s / (s * s + alpha), 0.0))
    }

    /// The regularized inverse `V diag(σ/(σ²+α)) U*` as a dense matrix.
    pub fn regularized_inverse(&self, alpha: f64) -> Result<DMatrix<Complex64>> {
        check_alpha(alpha)?;
        let mut uh = self.u.adjoint();
        let f = self.filter(alpha);
        for (r, mut row) in uh.row_iter_mut().enumerate() {
            row *= f[r];
        }
        Ok(self.v_adj.adjoint() * uh)
    }

    pub fn solve(&self, b: &DVector<Complex64>, alpha: f64) -> Result<DVector<Complex64>> {
        check_alpha(alpha)?;
        if b.len() != self.u.nrows() {
            return Err(Error::config(format!(
                "right-hand side has length {}, operator has {} rows",
                b.len(),
                self.u.nrows()
            )));
        }
        if b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("non-finite right-hand side"));
        }
        let coeffs = self.u.ad_mul(b).component_mul(&self.filter(alpha));
        Ok(self.v_adj.ad_mul(&coeffs))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!(
            "Tikhonov parameter must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Minimizer of `‖Ac - b‖² + α‖c‖²` via the SVD of `A`.
pub fn tikhonov_solve(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    alpha: f64,
) -> Result<DVector<Complex64>> {
    check_alpha(alpha)?;
    if a.nrows() != b.len() {
        return Err(Error::config(format!(
            "operator has {} rows but right-hand side has length {}",
            a.nrows(),
            b.len()
        )));
    }
    Tikhonov::new(a)?.solve(b, alpha)
}

/// Fits far-field samples `values` at `known` directions and evaluates the
/// fitted field at `targets`.
pub fn recover_far_field(
    method: Method,
    boundary: &ArtificialBoundary,
    k: f64,
    alpha: f64,
    known: &[Vec2],
    values: &[Complex64],
    targets: &[Vec2],
) -> Result<Vec<Complex64>> {
    if known.is_empty() {
        return Err(Error::config("recovery needs at least one known direction"));
    }
    if known.len() != values.len() {
        return Err(Error::config(
            "known directions and values differ in length",
        ));
    }
    let a = method.operator(boundary, k, known);
    let b = DVector::from_column_slice(values);
    let c = tikhonov_solve(&a, &b, alpha)?;
    Ok((method.operator(boundary, k, targets) * c)
        .iter()
        .copied()
        .collect())
}

/// Recovers the entries `targets` of row `row` from the row's known entries.
///
/// Returns `(column, value)` pairs; known entries in `targets` are skipped.
pub fn recover_row(
    f: &MsrMatrix,
    row: usize,
    method: Method,
    boundary: &ArtificialBoundary,
    alpha: f64,
    targets: &[usize],
) -> Result<Vec<(usize, Complex64)>> {
    let n = f.size();
    if row >= n {
        return Err(Error::config(format!("row {row} out of range")));
    }
    let known: Vec<usize> = (0..n).filter(|&j| f.is_known(row, j)).collect();
    if known.is_empty() {
        return Err(Error::config(format!("row {row} has no known entries")));
    }
    let targets: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&j| j < n && !f.is_known(row, j))
        .collect();
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let dirs = |idx: &[usize]| idx.iter().map(|&j| f.grid.direction(j)).collect::<Vec<_>>();
    let values: Vec<Complex64> = known.iter().map(|&j| f.entries[(row, j)]).collect();
    let out = recover_far_field(
        method,
        boundary,
        f.wavenumber,
        alpha,
        &dirs(&known),
        &values,
        &dirs(&targets),
    )?;
    Ok(targets.into_iter().zip(out).collect())
}

/// Stepping parameters for [`dr_msr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySchedule {
    pub method: Method,
    /// New directions recovered on each side of the known aperture per step.
    pub step: usize,
}

impl RecoverySchedule {
    pub fn new(method: Method, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::config("recovery step t must be >= 1"));
        }
        Ok(Self { method, step })
    }
}

/// Columns recovered in step `s`: `l..l+t` and `2m-st-t..2m-st` (0-based, half open).
pub fn step_targets(n: usize, l: usize, t: usize, s: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = (l..(l + t).min(n)).collect();
    let hi = n.saturating_sub(s * t);
    let lo = hi.saturating_sub(t);
    cols.extend(lo..hi);
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Alternates small-extension recovery with reciprocity completion until
/// every entry of the MSR matrix is known.
pub fn dr_msr(
    limited: &MsrMatrix,
    schedule: RecoverySchedule,
    boundary: &ArtificialBoundary,
    alpha: f64,
) -> Result<MsrMatrix> {
    check_alpha(alpha)?;
    let n = limited.size();
    let l0 = match limited.leading_columns() {
        Some(l) if l >= 1 && l < n => l,
        Some(l) if l == n => return Ok(limited.clone()),
        _ => {
            return Err(Error::config(
                "recovery needs the known entries to be the first l columns, 1 <= l < 2m",
            ))
        }
    };
    let k = limited.wavenumber;
    let t = schedule.step;
    let method = schedule.method;
    let dirs = limited.grid.directions();
    let full_eval = method.operator(boundary, k, &dirs);

    let mut f = limited.reciprocity_complete();
    let (mut l, mut s) = (l0, 0usize);
    let mut steps = 0usize;
    while !f.is_full() {
        if steps >= n {
            return Err(Error::numerical(format!(
                "recovery did not terminate within {n} steps"
            )));
        }
        let window = step_targets(n, l, t, s);

        // Rows sharing a known set share one regularized inverse.
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            if (0..n).all(|j| f.is_known(i, j)) {
                continue;
            }
            if !window.iter().any(|&j| !f.is_known(i, j)) {
                continue;
            }
            let known: Vec<usize> = (0..n).filter(|&j| f.is_known(i, j)).collect();
            groups.entry(known).or_default().push(i);
        }

        let updates: Vec<Vec<(usize, usize, Complex64)>> = groups
            .par_iter()
            .map(|(known, rows)| -> Result<Vec<(usize, usize, Complex64)>> {
                let known_dirs: Vec<Vec2> = known.iter().map(|&j| dirs[j]).collect();
                let a = method.operator(boundary, k, &known_dirs);
                let pinv = Tikhonov::new(&a)?.regularized_inverse(alpha)?;
                let mut out = Vec::new();
                for &i in rows {
                    let targets: Vec<usize> = window
                        .iter()
                        .copied()
                        .filter(|&j| !f.is_known(i, j))
                        .collect();
                    let b = DVector::from_iterator(
                        known.len(),
                        known.iter().map(|&j| f.entries[(i, j)]),
                    );
                    let density = &pinv * b;
                    for j in targets {
                        let v = (full_eval.row(j) * &density)[(0, 0)];
                        out.push((i, j, v));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        for (i, j, v) in updates.into_iter().flatten() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::numerical(format!(
                    "non-finite recovered value at ({i}, {j})"
                )));
            }
            f.entries[(i, j)] = v;
            f.provenance[(i, j)] = method.provenance();
        }
        f = f.reciprocity_complete();
        l += t;
        s += 1;
        steps += 1;
    }
    f.meta
        .insert("recovery_method".into(), method.to_string().into());
    f.meta.insert("recovery_step".into(), t.into());
    f.meta.insert("recovery_alpha".into(), alpha.into());
    f.meta
        .insert("recovery_radius".into(), boundary.radius.into());
    f.meta
        .insert("recovery_nodes".into(), boundary.len().into());
    f.meta.insert("recovery_iterations".into(), steps.into());
    log::info!("recovery finished after {steps} steps");
    Ok(f)
}
