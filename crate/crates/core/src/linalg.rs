//! Dense and sparse complex linear algebra helpers on top of nalgebra.

use nalgebra::ComplexField;
use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{lit, Real, C};

fn split<T: Real>(m: &DMatrix<C<T>>) -> (DMatrix<T>, DMatrix<T>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn merge<T: Real>(re: DMatrix<T>, im: &DMatrix<T>) -> DMatrix<C<T>> {
    re.zip_map(im, C::new)
}

/// `a · b` through four real products, which reach the blocked gemm kernels
/// for f32/f64 (the complex product in nalgebra is a plain loop).
pub fn cmul<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    merge(re, &im)
}

/// `a* · b`.
pub fn cmul_adj<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let (ar, ai) = split(a);
    let (ar, ai) = (ar.transpose(), ai.transpose());
    let (br, bi) = split(b);
    let re = &ar * &br + &ai * &bi;
    let im = &ar * &bi - &ai * &br;
    merge(re, &im)
}

/// Singular values of a complex matrix (unsorted order as returned by the SVD).
pub fn singular_values<T: Real>(m: DMatrix<C<T>>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    SVD::new(m, false, false).singular_values.iter().copied().collect()
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(m: &DMatrix<C<T>>) -> T {
    singular_values(m.clone())
        .into_iter()
        .fold(T::zero(), |a, s| a.max(s))
}

/// Sum of singular values, dropping values below `1e-12 · max`.
pub fn nuclear_norm_of<T: Real>(sv: &[T]) -> T {
    let top = sv.iter().fold(T::zero(), |a, s| a.max(*s));
    let cut = top * lit(1e-12);
    sv.iter().filter(|s| **s > cut).fold(T::zero(), |a, s| a + *s)
}

pub fn kron<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    a.kronecker(b)
}

/// Orthonormal basis of the column span, keeping left singular vectors whose
/// singular value exceeds `tol`. Returns the basis and all singular values.
pub fn orthonormal_span<T: Real>(m: &DMatrix<C<T>>, tol: T) -> (DMatrix<C<T>>, Vec<T>) {
    if m.ncols() == 0 {
        return (DMatrix::zeros(m.nrows(), 0), vec![]);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv: Vec<T> = svd.singular_values.iter().copied().collect();
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol).collect();
    let mut basis = DMatrix::zeros(m.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &u.column(i));
    }
    (basis, sv)
}

/// Q factor of a thin QR decomposition with columns normalized to a positive
/// real diagonal in R (deterministic representative).
pub fn qf<T: Real>(m: DMatrix<C<T>>) -> DMatrix<C<T>> {
    let (rows, cols) = m.shape();
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..cols.min(rows) {
        let d = r[(c, c)];
        let modulus = d.modulus();
        if modulus > T::zero() {
            let phase = d / C::new(modulus, T::zero());
            let mut col = q.column_mut(c);
            col *= phase;
        }
    }
    q
}

/// Haar-like random frame: Q factor of a complex Gaussian `n × r` matrix.
pub fn random_frame<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> DMatrix<C<T>> {
    qf(gaussian_matrix(rng, n, r))
}

pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C<T>> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(lit(re * std::f64::consts::FRAC_1_SQRT_2), lit(im * std::f64::consts::FRAC_1_SQRT_2))
    })
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen<T: Real>(h: DMatrix<C<T>>) -> (Vec<T>, DMatrix<C<T>>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(eig.eigenvectors.nrows(), order.len());
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Top eigenpair of a Hermitian matrix.
pub fn top_eigenpair<T: Real>(h: DMatrix<C<T>>) -> (T, DVector<C<T>>) {
    let (vals, vecs) = hermitian_eigen(h);
    let last = vals.len() - 1;
    (vals[last], vecs.column(last).into_owned())
}

/// Row-compressed sparse matrix used for windowed operator models.
#[derive(Clone, Debug, Default)]
pub struct SparseRows<T: Real> {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, C<T>)>>,
}

impl<T: Real> SparseRows<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseRows { ncols, rows: vec![Vec::new(); nrows] }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn add(&mut self, i: usize, j: usize, v: C<T>) {
        let row = &mut self.rows[i];
        if let Some(slot) = row.iter_mut().find(|(c, _)| *c == j) {
            slot.1 += v;
        } else {
            row.push((j, v));
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `self · x` for a dense `x`.
    pub fn mul_dense(&self, x: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let mut out = DMatrix::zeros(self.rows.len(), x.ncols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                for c in 0..x.ncols() {
                    out[(i, c)] += v * x[(j, c)];
                }
            }
        }
        out
    }

    /// `self* · x` for a dense `x`.
    pub fn adjoint_mul_dense(&self, x: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let mut out = DMatrix::zeros(self.ncols, x.ncols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let vc = v.conj();
                for c in 0..x.ncols() {
                    out[(j, c)] += vc * x[(i, c)];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut out = DMatrix::zeros(self.rows.len(), self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] += v;
            }
        }
        out
    }
}
