use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot floor for the Cholesky factorization: a pivot at or below
/// `PIVOT_REL_TOL * max(diag)` is treated as a loss of positive definiteness.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Square symmetric matrix. Constructors symmetrize with `(H + Hᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let t = m.transpose();
        Ok(SymMatrix((m + t) * 0.5))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Principal submatrix on `idx` (rows and columns, in the given order).
    pub fn select(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        SymMatrix(DMatrix::from_fn(k, k, |i, j| self.0[(idx[i], idx[j])]))
    }
}

/// Half-vectorization: the lower triangle stacked column by column,
/// `(h11, h21, .., hp1, h22, h32, .., hpp)`.
pub fn vech(h: &SymMatrix) -> DVector<f64> {
    let p = h.dim();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for j in 0..p {
        for i in j..p {
            out.push(h.0[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Column-major vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Duplication matrix `D` (p² × p(p+1)/2) with `D·vech(H) = vec(H)`, in the
/// same lower-triangle column order as [`vech`].
pub fn duplication_map(p: usize) -> DMatrix<f64> {
    assert!(p >= 1, "duplication_map needs p >= 1");
    let mut d = DMatrix::zeros(p * p, p * (p + 1) / 2);
    let mut k = 0;
    for j in 0..p {
        for i in j..p {
            d[(i + j * p, k)] = 1.0;
            d[(j + i * p, k)] = 1.0;
            k += 1;
        }
    }
    d
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Lower Cholesky factor. Fails when a pivot drops to
/// `PIVOT_REL_TOL * max(diag)` or below.
pub fn cholesky_lower(h: &SymMatrix) -> Result<DMatrix<f64>> {
    let a = &h.0;
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "largest diagonal entry is {max_diag}"
        )));
    }
    let floor = PIVOT_REL_TOL * max_diag;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > floor) {
            return Err(Error::NotPositiveDefinite(format!(
                "pivot {j} is {pivot:e} (floor {floor:e}); draws may be degenerate"
            )));
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
/// Never falls back to a pseudo-inverse.
pub fn sym_inverse(h: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky_lower(h)?;
    let n = l.nrows();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    SymMatrix::new(l_inv.transpose() * l_inv)
}

/// Numerical row rank of `r`: singular values above `tol * σ_max`.
pub fn row_rank(r: &DMatrix<f64>, tol: f64) -> usize {
    if r.nrows() == 0 || r.ncols() == 0 {
        return 0;
    }
    let sv = r.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-5.0..5.0));
        SymMatrix::new(m).unwrap()
    }

    fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let b = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(&b * b.transpose() + DMatrix::identity(p, p) * 0.5).unwrap()
    }

    #[test]
    fn vech_small_cases() {
        let one = SymMatrix::identity(1);
        assert_eq!(vech(&one).as_slice(), &[1.0]);
        let h = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0])).unwrap();
        assert_eq!(vech(&h).as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn vech_three_by_three_rebuilds_vec() {
        // entries 1..6 placed on the lower triangle
        let h = SymMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0],
        ))
        .unwrap();
        let v = vech(&h);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // brute-force vec: walk columns, then rows
        let mut brute = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                brute.push(h.as_matrix()[(i, j)]);
            }
        }
        let rebuilt = duplication_map(3) * v;
        assert_eq!(rebuilt.as_slice(), brute.as_slice());
    }

    #[test]
    fn duplication_small_cases() {
        assert_eq!(duplication_map(1), DMatrix::from_element(1, 1, 1.0));
        let d2 = duplication_map(2);
        let expect = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        assert_eq!(d2, expect);
    }

    #[test]
    fn duplication_reproduces_vec_for_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 1..=8 {
            let d = duplication_map(p);
            assert!(d.iter().all(|&x| x == 0.0 || x == 1.0));
            let trials = if p == 3 { 100 } else { 10 };
            for _ in 0..trials {
                let h = random_sym(p, &mut rng);
                assert_eq!(&d * vech(&h), vec_of(h.as_matrix()));
            }
        }
    }

    #[test]
    fn inverse_of_simple_matrices() {
        let i3 = SymMatrix::identity(3);
        assert_eq!(sym_inverse(&i3).unwrap(), i3);
        let d = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let inv = sym_inverse(&d).unwrap();
        let want = SymMatrix::from_diagonal(&[0.5, 0.25]);
        assert!((inv.as_matrix() - want.as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn inverse_residual_random_pd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h = random_pd(5, &mut rng);
            let inv = sym_inverse(&h).unwrap();
            let resid = h.as_matrix() * inv.as_matrix() - DMatrix::<f64>::identity(5, 5);
            assert!(resid.amax() < 1e-10, "residual {}", resid.amax());
        }
    }

    #[test]
    fn inverse_rejects_singular() {
        let h = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(sym_inverse(&h), Err(Error::NotPositiveDefinite(_))));
        let z = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(sym_inverse(&z), Err(Error::NotPositiveDefinite(_))));
        let neg = SymMatrix::from_diagonal(&[1.0, -2.0]);
        assert!(sym_inverse(&neg).is_err());
    }

    #[test]
    fn constructor_symmetrizes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s.as_matrix()[(0, 1)], 3.0);
        assert_eq!(s.as_matrix()[(1, 0)], 3.0);
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn kron_matches_definition() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(1, 2, &[0.5, -1.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 4));
        assert_eq!(k.row(1).iter().cloned().collect::<Vec<_>>(), vec![1.5, -3.0, 2.0, -4.0]);
    }

    #[test]
    fn rank_detection() {
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(row_rank(&r, 1e-10), 1);
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(row_rank(&r, 1e-10), 2);
    }
}
