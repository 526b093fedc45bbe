//! Qualitative imaging from MSR data: direct sampling and factorization indicators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::msr::MsrMatrix;

/// Relative eigenvalue floor in the factorization-method sum.
pub const FM_EIGEN_FLOOR: f64 = 1e-14;

/// Rectangular grid of sampling points with one nonnegative value per point.
///
/// Values are stored row-major starting at `(x_min, y_min)`: the index of
/// point `(ix, iy)` is `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        a
    } else {
        a + (b - a) * i as f64 / (n - 1) as f64
    }
}

impl ImagingGrid {
    pub fn new(bounds: [f64; 4], nx: usize, ny: usize) -> Result<Self> {
        let [x_min, x_max, y_min, y_max] = bounds;
        if nx == 0 || ny == 0 {
            return Err(Error::config(
                "imaging grid needs at least one point per axis",
            ));
        }
        if !(bounds.iter().all(|b| b.is_finite()) && x_min <= x_max && y_min <= y_max) {
            return Err(Error::config(format!("invalid imaging bounds {bounds:?}")));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
            values: vec![0.0; nx * ny],
        })
    }

    /// 121 × 121 points on `[-6, 6]²`.
    pub fn default_grid() -> Self {
        Self::new([-6.0, 6.0, -6.0, 6.0], 121, 121).expect("valid default grid")
    }

    pub fn x(&self, ix: usize) -> f64 {
        linspace(self.x_min, self.x_max, self.nx, ix)
    }

    pub fn y(&self, iy: usize) -> f64 {
        linspace(self.y_min, self.y_max, self.ny, iy)
    }

    pub fn point(&self, index: usize) -> Vec2 {
        Vec2::new(self.x(index % self.nx), self.y(index / self.nx))
    }

    pub fn value_at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Divides by the maximum when it is positive.
    pub fn normalize(&self) -> Self {
        let mut out = self.clone();
        let max = self.max();
        if max > 0.0 {
            for v in out.values.iter_mut() {
                *v /= max;
            }
        }
        out
    }

    pub fn argmax(&self) -> Vec2 {
        let (idx, _) =
            self.values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
        self.point(idx)
    }

    /// Sampling points whose normalized value is at least `level`.
    pub fn level_set(&self, level: f64) -> Vec<Vec2> {
        let max = self.max();
        if max <= 0.0 {
            return Vec::new();
        }
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v / max >= level)
            .map(|(i, _)| self.point(i))
            .collect()
    }

    /// Mean position of the points in [`ImagingGrid::level_set`].
    pub fn level_centroid(&self, level: f64) -> Option<Vec2> {
        let pts = self.level_set(level);
        if pts.is_empty() {
            return None;
        }
        Some(pts.iter().fold(Vec2::zeros(), |a, p| a + p) / pts.len() as f64)
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.x_min == other.x_min
            && self.x_max == other.x_max
            && self.y_min == other.y_min
            && self.y_max == other.y_max
    }

    /// Largest pointwise difference between two grids of identical layout.
    pub fn max_abs_difference(&self, other: &Self) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::config("imaging grids have different layouts"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// `(e^{sign·ik z·dir_1}, ..., e^{sign·ik z·dir_n})`.
pub fn steering_vector(k: f64, z: Vec2, directions: &[Vec2], sign: f64) -> Vec<Complex64> {
    directions
        .iter()
        .map(|d| Complex64::from_polar(1.0, sign * k * z.dot(d)))
        .collect()
}

/// `|φ(z;-d) F φ(z;x̂)^T|²` using the first `columns` observation directions.
fn dsm_columns(f: &MsrMatrix, columns: usize, grid: &ImagingGrid) -> ImagingGrid {
    let k = f.wavenumber;
    let dirs = f.grid.directions();
    let n = dirs.len();
    let obs = &dirs[..columns];
    let data = f.entries.columns(0, columns);
    let mut out = grid.clone();
    out.values = (0..grid.ny)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let y = grid.y(iy);
            // observation steering vectors for the whole grid row, one per column
            let obs_steer = DMatrix::from_fn(columns, grid.nx, |j, ix| {
                let z = Vec2::new(grid.x(ix), y);
                Complex64::from_polar(1.0, k * z.dot(&obs[j]))
            });
            let fb = data * obs_steer;
            (0..grid.nx)
                .map(|ix| {
                    let z = Vec2::new(grid.x(ix), y);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        acc += Complex64::from_polar(1.0, -k * z.dot(&dirs[i])) * fb[(i, ix)];
                    }
                    acc.norm_sqr()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out
}

/// Direct sampling indicator for fully known data.
pub fn dsm_full(f: &MsrMatrix, grid: &ImagingGrid) -> Result<ImagingGrid> {
    if !f.is_full() {
        return Err(Error::config(
            "direct sampling on full data needs every entry known (use the limited variant)",
        ));
    }
    Ok(dsm_columns(f, f.size(), grid))
}

/// Direct sampling indicator restricted to the first `l` observation directions.
pub fn dsm_limited(f: &MsrMatrix, grid: &ImagingGrid) -> Result<ImagingGrid> {
    let l = f.leading_columns().filter(|&l| l >= 1).ok_or_else(|| {
        Error::config("limited-aperture sampling needs the first l columns known")
    })?;
    Ok(dsm_columns(f, l, grid))
}

/// `|A| = Σ |λ_j| v_j v_j*` for Hermitian `A`.
pub fn hermitian_abs(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::numerical("Hermitian eigendecomposition failed"));
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(eig.eigenvalues[c].abs(), 0.0);
    }
    Ok(scaled * v.adjoint())
}

/// `F♯ = |Re F| + |Im F|` with `Re F = (F + F*)/2`, `Im F = (F - F*)/(2i)`.
pub fn sharp_matrix(f: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let adj = f.adjoint();
    let re = (f + &adj) * Complex64::new(0.5, 0.0);
    let im = (f - &adj) * Complex64::new(0.0, -0.5);
    let mut sharp = hermitian_abs(&re)? + hermitian_abs(&im)?;
    // remove rounding asymmetry
    let sym = (&sharp + sharp.adjoint()) * Complex64::new(0.5, 0.0);
    sharp.copy_from(&sym);
    Ok(sharp)
}

/// Eigensystem of `F♯` with the eigenvalue floor applied.
pub struct FmEigensystem {
    pub values: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
    /// Number of eigenpairs kept after the floor.
    pub kept: usize,
}

pub fn fm_eigensystem(f: &DMatrix<Complex64>) -> Result<FmEigensystem> {
    let sharp = sharp_matrix(f)?;
    let eig = SymmetricEigen::new(sharp);
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::numerical("eigendecomposition of F♯ failed"));
    }
    let max = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&n| max > 0.0 && eig.eigenvalues[n].abs() >= FM_EIGEN_FLOOR * max)
        .collect();
    let values = DVector::from_iterator(keep.len(), keep.iter().map(|&n| eig.eigenvalues[n]));
    let vectors = DMatrix::from_fn(f.nrows(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    Ok(FmEigensystem {
        values,
        kept: keep.len(),
        vectors,
    })
}

/// Factorization-method indicator `[Σ_n |φ_z* ψ_n|² / |σ_n|]^{-1}`,
/// `(φ_z)_n = e^{-ik d_n·z}`.
pub fn fm_indicator(f: &MsrMatrix, grid: &ImagingGrid) -> Result<ImagingGrid> {
    if !f.is_full() {
        return Err(Error::config(
            "factorization method needs a fully known MSR matrix",
        ));
    }
    let sys = fm_eigensystem(&f.entries)?;
    if sys.kept == 0 {
        return Err(Error::numerical(
            "F♯ vanishes; factorization indicator undefined",
        ));
    }
    let k = f.wavenumber;
    let dirs = f.grid.directions();
    let inv_sigma: Vec<f64> = sys.values.iter().map(|s| 1.0 / s.abs()).collect();
    // ψ_n^T so that (ψ^T conj(φ_z))_n = φ_z* ψ_n
    let psi_t = sys.vectors.transpose();
    let values: Vec<f64> = (0..grid.ny)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let y = grid.y(iy);
            let conj_phi = DMatrix::from_fn(dirs.len(), grid.nx, |i, ix| {
                let z = Vec2::new(grid.x(ix), y);
                Complex64::from_polar(1.0, k * z.dot(&dirs[i]))
            });
            let proj = &psi_t * conj_phi;
            (0..grid.nx)
                .map(|ix| {
                    let sum: f64 = (0..sys.kept)
                        .map(|n| proj[(n, ix)].norm_sqr() * inv_sigma[n])
                        .sum();
                    1.0 / sum
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("factorization indicator is not finite"));
    }
    let mut out = grid.clone();
    out.values = values;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msr::DirectionGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
    }

    fn msr(entries: DMatrix<Complex64>, k: f64) -> MsrMatrix {
        let m = entries.nrows() / 2;
        MsrMatrix::from_entries(DirectionGrid::new(m).unwrap(), k, entries).unwrap()
    }

    fn small_grid() -> ImagingGrid {
        ImagingGrid::new([-1.0, 1.0, -0.5, 0.5], 7, 5).unwrap()
    }

    #[test]
    fn dsm_of_zero_matrix_is_zero() {
        let f = msr(DMatrix::zeros(8, 8), 6.0);
        let g = dsm_full(&f, &small_grid()).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        let lim = f.restrict(3).unwrap();
        let g = dsm_limited(&lim, &small_grid()).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dsm_two_direction_hand_case() {
        let f = msr(DMatrix::identity(2, 2), 1.0);
        let grid = ImagingGrid::new([0.0, 0.0, 0.0, 0.0], 1, 1).unwrap();
        let g = dsm_full(&f, &grid).unwrap();
        assert!((g.values[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dsm_matches_direct_bilinear_form() {
        let f = msr(random_matrix(6, 1), 2.5);
        let grid = small_grid();
        let g = dsm_full(&f, &grid).unwrap();
        let dirs = f.grid.directions();
        for idx in [0, 3, 17, 34] {
            let z = grid.point(idx);
            let a = steering_vector(2.5, z, &dirs, -1.0);
            let b = steering_vector(2.5, z, &dirs, 1.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..6 {
                for j in 0..6 {
                    acc += a[i] * f.entries[(i, j)] * b[j];
                }
            }
            assert!((g.values[idx] - acc.norm_sqr()).abs() <= 1e-12 * acc.norm_sqr().max(1.0));
        }
    }

    #[test]
    fn dsm_scales_quadratically() {
        let e = random_matrix(8, 2);
        let f = msr(e.clone(), 3.0);
        let g = msr(e * Complex64::new(0.0, 3.0), 3.0);
        let a = dsm_full(&f, &small_grid()).unwrap();
        let b = dsm_full(&g, &small_grid()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((9.0 * x - y).abs() <= 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn limited_with_full_mask_equals_full() {
        let f = msr(random_matrix(10, 3), 4.0);
        let a = dsm_full(&f, &small_grid()).unwrap();
        let b = dsm_limited(&f, &small_grid()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_dsm_rejects_masked_data() {
        let f = msr(random_matrix(8, 4), 4.0).restrict(5).unwrap();
        assert!(dsm_full(&f, &small_grid()).is_err());
        assert!(fm_indicator(&f, &small_grid()).is_err());
        let mut odd = msr(random_matrix(8, 4), 4.0);
        odd.provenance[(2, 1)] = crate::msr::Provenance::Unknown;
        assert!(dsm_limited(&odd, &small_grid()).is_err());
    }

    #[test]
    fn sharp_of_diagonal() {
        let f = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(-3.0, 0.0),
        ]));
        let s = sharp_matrix(&f).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((s[(1, 1)].re - 3.0).abs() < 1e-14);
        assert!(s[(0, 1)].norm() < 1e-14);
        let sys = fm_eigensystem(&f).unwrap();
        let mut v: Vec<f64> = sys.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sharp_is_hermitian_psd() {
        for seed in 0..5 {
            let f = random_matrix(12, seed);
            let s = sharp_matrix(&f).unwrap();
            assert!((s.clone() - s.adjoint()).norm() < 1e-12 * s.norm());
            let eig = SymmetricEigen::new(s);
            let max = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * max));
        }
    }

    /// Brute-force re-implementation: eigen-decompose the real-symmetric
    /// 2n×2n embedding of each Hermitian part with a Jacobi sweep, build F♯,
    /// then sum the series directly.
    fn fm_bruteforce(f: &DMatrix<Complex64>, k: f64, z: Vec2, dirs: &[Vec2]) -> f64 {
        let n = f.nrows();
        let adj = f.adjoint();
        let re = (f + &adj) * Complex64::new(0.5, 0.0);
        let im = (f - &adj) * Complex64::new(0.0, -0.5);
        let abs = |h: &DMatrix<Complex64>| {
            // real embedding [[A, -B], [B, A]] for H = A + iB
            let mut emb = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
                let (rr, cc) = (r % n, c % n);
                let v = h[(rr, cc)];
                match (r < n, c < n) {
                    (true, true) | (false, false) => v.re,
                    (true, false) => -v.im,
                    (false, true) => v.im,
                }
            });
            let mut vecs = DMatrix::<f64>::identity(2 * n, 2 * n);
            for _ in 0..100 {
                for p in 0..2 * n {
                    for q in p + 1..2 * n {
                        if emb[(p, q)].abs() < 1e-300 {
                            continue;
                        }
                        let theta = (emb[(q, q)] - emb[(p, p)]) / (2.0 * emb[(p, q)]);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for r in 0..2 * n {
                            let (a, b) = (emb[(r, p)], emb[(r, q)]);
                            emb[(r, p)] = c * a - s * b;
                            emb[(r, q)] = s * a + c * b;
                        }
                        for r in 0..2 * n {
                            let (a, b) = (emb[(p, r)], emb[(q, r)]);
                            emb[(p, r)] = c * a - s * b;
                            emb[(q, r)] = s * a + c * b;
                        }
                        for r in 0..2 * n {
                            let (a, b) = (vecs[(r, p)], vecs[(r, q)]);
                            vecs[(r, p)] = c * a - s * b;
                            vecs[(r, q)] = s * a + c * b;
                        }
                    }
                }
            }
            // each eigenvalue appears twice in the embedding; halve the sum
            let mut out = DMatrix::<Complex64>::zeros(n, n);
            for e in 0..2 * n {
                let lam = emb[(e, e)].abs();
                for r in 0..n {
                    for c in 0..n {
                        let vr = Complex64::new(vecs[(r, e)], vecs[(r + n, e)]);
                        let vc = Complex64::new(vecs[(c, e)], vecs[(c + n, e)]);
                        out[(r, c)] += 0.5 * lam * vr * vc.conj();
                    }
                }
            }
            out
        };
        let sharp = abs(&re) + abs(&im);
        // F♯^{-1} quadratic form equals Σ |φ*ψ_n|²/σ_n when F♯ is invertible
        let phi = DVector::from_iterator(
            n,
            dirs.iter()
                .map(|d| Complex64::from_polar(1.0, -k * z.dot(d))),
        );
        let x = sharp.lu().solve(&phi).unwrap();
        1.0 / phi.dotc(&x).re
    }

    #[test]
    fn fm_matches_bruteforce() {
        let f = msr(random_matrix(4, 7), 1.7);
        let grid = ImagingGrid::new([0.3, 0.3, -0.2, -0.2], 1, 1).unwrap();
        let v = fm_indicator(&f, &grid).unwrap().values[0];
        let o = fm_bruteforce(&f.entries, 1.7, Vec2::new(0.3, -0.2), &f.grid.directions());
        assert!((v - o).abs() <= 1e-12 * o.abs(), "{v} vs {o}");
        assert!(v > 0.0);
    }

    #[test]
    fn fm_of_zero_is_an_error() {
        let f = msr(DMatrix::zeros(4, 4), 1.0);
        assert!(fm_indicator(&f, &small_grid()).is_err());
    }

    #[test]
    fn normalize_cases() {
        let mut g = small_grid();
        assert_eq!(g.normalize(), g);
        g.values.iter_mut().for_each(|v| *v = 2.5);
        assert!(g.normalize().values.iter().all(|&v| v == 1.0));
        g.values[3] = 7.0;
        assert_eq!(g.normalize().max(), 1.0);
    }

    #[test]
    fn grid_layout_is_row_major_from_lower_left() {
        let g = small_grid();
        assert_eq!(g.point(0), Vec2::new(-1.0, -0.5));
        assert_eq!(g.point(6), Vec2::new(1.0, -0.5));
        assert_eq!(g.point(7), Vec2::new(-1.0, -0.25));
        assert_eq!(g.point(34), Vec2::new(1.0, 0.5));
        let d = ImagingGrid::default_grid();
        assert_eq!((d.nx, d.ny), (121, 121));
        assert!((d.x(1) - d.x(0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn steering_vectors_are_unimodular() {
        let dirs = DirectionGrid::new(5).unwrap().directions();
        for s in [-1.0, 1.0] {
            for v in steering_vector(6.0, Vec2::new(0.7, -2.0), &dirs, s) {
                assert!((v.norm() - 1.0).abs() < 1e-15);
            }
        }
    }
}
