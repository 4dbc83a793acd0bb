//! Dense complex linear algebra shared by every module.
//!
//! Vectors and matrices are `nalgebra` dynamic types over `Complex<f64>`.
//! Hermitian matrices are stored in full; helpers that need Hermitian
//! structure symmetrize their input first so round-off in the lower
//! triangle never leaks into eigen decompositions.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Relative tolerance below which negative eigenvalues count as round-off.
pub const PSD_REL_TOL: f64 = 1e-9;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn zeros_vec(n: usize) -> CVec {
    CVec::zeros(n)
}

pub fn zeros_mat(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Canonical basis vector `e_i` of length `n`.
pub fn unit_vec(n: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[i] = c64(1.0, 0.0);
    v
}

/// `a^H b`.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// `‖v‖²`.
pub fn norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of `h^H M h`; exact for Hermitian `M`.
pub fn quad_form(m: &CMat, h: &CVec) -> f64 {
    h.dotc(&(m * h)).re
}

/// `v v^H`.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Frobenius norm squared.
pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest absolute deviation of `m` from Hermitian symmetry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Sum of a non-empty slice of matrices (zero matrix of size `n` otherwise).
pub fn sum_mats(ms: &[CMat], n: usize) -> CMat {
    ms.iter().fold(zeros_mat(n), |acc, m| acc + m)
}

/// Eigen decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: CMat,
}

pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).values.first().copied().unwrap_or(0.0)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).values.last().copied().unwrap_or(0.0)
}

/// Scale used for relative PSD checks.
fn psd_scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0)
}

/// True when `m` is Hermitian and has no eigenvalue below `-tol·max(1, ‖m‖₂)`.
pub fn is_psd(m: &CMat, tol: f64) -> bool {
    let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(1.0);
    if hermitian_defect(m) > tol * scale {
        return false;
    }
    let eig = hermitian_eigen(m);
    let floor = -tol * psd_scale(&eig.values);
    eig.values.iter().all(|&v| v >= floor)
}

/// Principal square root of a PSD matrix. Round-off negative eigenvalues are
/// clamped to zero; genuinely indefinite input is rejected.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::invalid("square root of a non-square matrix"));
    }
    let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(1.0);
    if hermitian_defect(m) > 1e-8 * scale {
        return Err(Error::NotPsd("matrix is not Hermitian".into()));
    }
    let eig = hermitian_eigen(m);
    let floor = -PSD_REL_TOL * psd_scale(&eig.values);
    if let Some(&bad) = eig.values.iter().find(|&&v| v < floor) {
        return Err(Error::NotPsd(format!("eigenvalue {bad:e}")));
    }
    let mut out = zeros_mat(n);
    for (i, &lambda) in eig.values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let u = eig.vectors.column(i).into_owned();
        out += outer(&u).scale(lambda.sqrt());
    }
    Ok(hermitian_part(&out))
}

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]`.
pub fn embed_hermitian(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

/// Inverse of [`embed_hermitian`]; reads the left block column.
pub fn lift_embedded(x: &DMatrix<f64>) -> Result<CMat> {
    if x.nrows() != x.ncols() || !x.nrows().is_multiple_of(2) {
        return Err(Error::invalid("embedded matrix must be 2n x 2n"));
    }
    let n = x.nrows() / 2;
    Ok(CMat::from_fn(n, n, |i, j| c64(x[(i, j)], x[(i + n, j)])))
}

/// One draw of `CN(0, I_n)`.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re * s, im * s)
    })
}

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed `index` of `parent`; distinct indices give unrelated streams.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}
