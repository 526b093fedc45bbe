//! Sound-soft exterior scattering by a smooth obstacle.
//!
//! The scattered field is sought as a combined potential
//! `u^s = ∫ (∂Φ/∂ν(y) - iη Φ) φ ds(y)` with `η = k`, which leads to the
//! second-kind equation `φ + Kφ - iη Sφ = -2 u^i` on the boundary. The
//! logarithmic singularities of both kernels are split off and integrated
//! with the trigonometric product weights of Kress; the remaining smooth
//! parts use the trapezoidal rule. Convergence is exponential in the node
//! count for analytic boundaries.
//!
//! Far fields follow the normalization in which the point source `Φ(·, z)`
//! has far field `e^{-ik x̂·z}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{discretize, Curve, QuadratureBoundary, Vec2};
use crate::msr::{DirectionGrid, MsrMatrix};
use crate::specfun::{self, EULER_GAMMA};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Exterior Dirichlet problem for a plane wave `e^{ik x·d}`.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringProblem {
    pub wavenumber: f64,
    pub obstacle: Curve,
}

impl ScatteringProblem {
    pub fn new(wavenumber: f64, obstacle: Curve) -> Result<Self> {
        if !(wavenumber > 0.0 && wavenumber.is_finite()) {
            return Err(Error::config(format!(
                "wavenumber must be positive, got {wavenumber}"
            )));
        }
        Ok(Self {
            wavenumber,
            obstacle,
        })
    }
}

/// Far-field pattern for one incident direction.
#[derive(Debug, Clone)]
pub struct FarFieldRow {
    pub incident: Vec2,
    pub observations: Vec<Vec2>,
    pub values: Vec<Complex64>,
}

/// Factorized Nyström matrix of the combined-field equation.
pub struct BoundaryOperator {
    pub problem: ScatteringProblem,
    pub boundary: QuadratureBoundary,
    pub coupling: f64,
    lu: LU<Complex64, Dyn, Dyn>,
}

/// Kress weights `R_j` for `∫ ln(4 sin²((t-τ)/2)) f(τ) dτ` on `2n` nodes,
/// indexed by the node offset `|i - j|`.
fn log_weights(node_count: usize) -> Vec<f64> {
    let n = node_count / 2;
    let nf = n as f64;
    (0..node_count)
        .map(|d| {
            let theta = d as f64 * PI / nf;
            let series: f64 = (1..n).map(|m| (m as f64 * theta).cos() / m as f64).sum();
            let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * PI / nf * series - PI / (nf * nf) * alt
        })
        .collect()
}

fn system_matrix(boundary: &QuadratureBoundary, k: f64, eta: f64) -> DMatrix<Complex64> {
    let nq = boundary.len();
    let r_weights = log_weights(nq);
    let h = 2.0 * PI / nq as f64;
    let ieta = I * eta;

    let rows: Vec<Vec<Complex64>> = (0..nq)
        .into_par_iter()
        .map(|i| {
            let xi = boundary.points[i];
            let ti = boundary.params[i];
            (0..nq)
                .map(|j| {
                    let s = boundary.speeds[j];
                    let (l1, l2, m1, m2) = if i == j {
                        let l2 = boundary.normals[j].dot(&boundary.accels[j]) / (2.0 * PI * s);
                        let m1 = -s / (2.0 * PI);
                        let m2 = s * (0.5 * I - EULER_GAMMA / PI - (0.5 * k * s).ln() / PI);
                        (Complex64::new(0.0, 0.0), Complex64::new(l2, 0.0), m1, m2)
                    } else {
                        let diff = xi - boundary.points[j];
                        let r = diff.norm();
                        let (h0, h1) = specfun::hankel01_unchecked(k * r);
                        let proj = boundary.normals[j].dot(&diff) * s / r;
                        let l = 0.5 * I * k * proj * h1;
                        let l1 = -k / (2.0 * PI) * proj * h1.re;
                        let m = 0.5 * I * s * h0;
                        let m1 = -s / (2.0 * PI) * h0.re;
                        let lg = (4.0 * (0.5 * (ti - boundary.params[j])).sin().powi(2)).ln();
                        (Complex64::new(l1, 0.0), l - l1 * lg, m1, m - m1 * lg)
                    };
                    let singular = r_weights[i.abs_diff(j)] * (l1 - ieta * m1);
                    let smooth = h * (l2 - ieta * m2);
                    let delta = if i == j { 1.0 } else { 0.0 };
                    delta + singular + smooth
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(nq, nq, |i, j| rows[i][j])
}

/// Discretizes and factorizes the combined-field operator.
pub fn assemble_operator(
    problem: ScatteringProblem,
    node_count: usize,
) -> Result<BoundaryOperator> {
    let boundary = discretize(problem.obstacle, node_count)?;
    let k = problem.wavenumber;
    let coupling = k;
    let matrix = system_matrix(&boundary, k, coupling);
    let lu = matrix.lu();
    if !lu.is_invertible() {
        return Err(Error::numerical(format!(
            "combined-field matrix is singular (k = {k}, n_q = {node_count})"
        )));
    }
    let op = BoundaryOperator {
        problem,
        boundary,
        coupling,
        lu,
    };
    Ok(op)
}

impl BoundaryOperator {
    /// Boundary densities, one column per incident direction.
    pub fn densities(&self, incidents: &[Vec2]) -> Result<DMatrix<Complex64>> {
        let k = self.problem.wavenumber;
        let pts = &self.boundary.points;
        let rhs = DMatrix::from_fn(pts.len(), incidents.len(), |i, c| {
            -2.0 * Complex64::from_polar(1.0, k * pts[i].dot(&incidents[c]))
        });
        let sol = self.lu.solve(&rhs).ok_or_else(|| {
            Error::numerical(format!(
                "back substitution failed (k = {k}, n_q = {})",
                pts.len()
            ))
        })?;
        if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite boundary density (k = {k}, n_q = {})",
                pts.len()
            )));
        }
        Ok(sol)
    }

    /// Far-field evaluation matrix `[observations × nodes]`.
    fn far_field_matrix(&self, observations: &[Vec2]) -> DMatrix<Complex64> {
        let k = self.problem.wavenumber;
        let b = &self.boundary;
        DMatrix::from_fn(observations.len(), b.len(), |o, j| {
            let xh = observations[o];
            let amp = k * xh.dot(&b.normals[j]) + self.coupling;
            -I * amp * b.weights[j] * Complex64::from_polar(1.0, -k * xh.dot(&b.points[j]))
        })
    }

    /// Far fields `[observations × incidents]`.
    pub fn far_field_block(
        &self,
        incidents: &[Vec2],
        observations: &[Vec2],
    ) -> Result<DMatrix<Complex64>> {
        let dens = self.densities(incidents)?;
        Ok(self.far_field_matrix(observations) * dens)
    }

    pub fn far_field(&self, incident: Vec2, observations: &[Vec2]) -> Result<FarFieldRow> {
        let block = self.far_field_block(&[incident], observations)?;
        Ok(FarFieldRow {
            incident,
            observations: observations.to_vec(),
            values: block.column(0).iter().copied().collect(),
        })
    }
}

/// Far field of the sound-soft disc of the given radius centred at the origin,
/// by separation of variables:
/// `u∞ = 4i Σ_{|n|≤N} J_n(ka)/H_n(ka) e^{in(θ_x̂ - θ_d)}`.
pub fn circle_far_field_analytic(
    k: f64,
    radius: f64,
    observation: Vec2,
    incident: Vec2,
    truncation: usize,
) -> Result<Complex64> {
    let ka = k * radius;
    if (truncation as f64) < ka + 20.0 {
        log::warn!(
            "truncation N = {truncation} is below ka + 20 = {:.1}; series may be inaccurate",
            ka + 20.0
        );
    }
    let j = specfun::bessel_j_orders(truncation, ka)?;
    let y = specfun::bessel_y_orders(truncation, ka)?;
    let cos_angle = observation.dot(&incident).clamp(-1.0, 1.0);
    let angle = cos_angle.acos();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..=truncation {
        let h = Complex64::new(j[n], y[n]);
        if !(h.re.is_finite() && h.im.is_finite()) {
            break;
        }
        let ratio = j[n] / h;
        let factor = if n == 0 {
            1.0
        } else {
            2.0 * (n as f64 * angle).cos()
        };
        sum += ratio * factor;
    }
    Ok(4.0 * I * sum)
}

/// Factor converting far fields from this crate's convention (point source
/// maps to `e^{-ik x̂·z}`) to the convention `u^s ~ e^{ikr}/√r · u∞`, which
/// carries the prefactor `e^{iπ/4}/√(8πk)`.
pub fn standard_convention_factor(k: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (8.0 * PI * k).sqrt(), PI / 4.0)
}

/// Full MSR matrix on the `2m`-direction grid. One factorization serves all rows.
pub fn assemble_msr(problem: ScatteringProblem, m: usize, node_count: usize) -> Result<MsrMatrix> {
    let grid = DirectionGrid::new(m)?;
    let op = assemble_operator(problem, node_count)?;
    let dirs = grid.directions();
    // [observation × incident]
    let block = op.far_field_block(&dirs, &dirs)?;
    let n = grid.len();
    let entries = DMatrix::from_fn(n, n, |i, j| block[(j, i)]);
    if entries
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::numerical("non-finite far-field value"));
    }
    let mut f = MsrMatrix::from_entries(grid, problem.wavenumber, entries)?;
    f.curve = Some(problem.obstacle.to_string());
    f.node_count = Some(node_count);
    Ok(f)
}
