use nalgebra::SymmetricEigen;

use super::{ComplexMatrix, NumericsError, C64};

/// Largest matrix the eigensolver accepts.
pub const MAX_EIGH_DIM: usize = 512;

/// Hermiticity tolerance, relative to the largest entry (absolute below 1).
pub const HERMITIAN_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 10_000;

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }
}

pub fn check_hermitian(h: &ComplexMatrix) -> Result<(), NumericsError> {
    if !h.is_square() {
        return Err(NumericsError::Shape(format!(
            "expected a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let err = h.hermiticity_error();
    let scale = h.max_abs().max(1.0);
    if err > HERMITIAN_TOL * scale {
        return Err(NumericsError::NonHermitianInput { max_deviation: err });
    }
    Ok(())
}

/// Hermitian eigensolver.
///
/// Eigenvalues come back ascending. Each eigenvector's phase is fixed so that
/// its first non-negligible component is real and positive, which makes the
/// output deterministic for downstream state labeling.
pub fn eigh(h: &ComplexMatrix) -> Result<Eigh, NumericsError> {
    check_hermitian(h)?;
    let n = h.rows();
    if n > MAX_EIGH_DIM {
        return Err(NumericsError::DimensionTooLarge { dim: n, max: MAX_EIGH_DIM });
    }
    // symmetrize exactly so roundoff in the input does not leak into the solver
    let sym = ComplexMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
    let decomp = SymmetricEigen::try_new(sym.to_nalgebra(), f64::EPSILON, MAX_SWEEPS)
        .ok_or(NumericsError::NoConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep solver order
    order.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));

    let values = order.iter().map(|&k| decomp.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = decomp.eigenvectors.column(k);
        let pivot = v
            .iter()
            .find(|z| z.norm() > 1e-8)
            .or_else(|| v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())))
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let gauge = C64::from_polar(1.0, -pivot.arg());
        for i in 0..n {
            vectors[(i, col)] = v[i] * gauge;
        }
    }
    Ok(Eigh { values, vectors })
}

/// `exp(-i H t)` through the spectral decomposition.
pub fn expm_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix, NumericsError> {
    let e = eigh(h)?;
    let n = h.rows();
    let phases: Vec<C64> = e.values.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| e.vectors[(i, k)] * phases[k] * e.vectors[(j, k)].conj())
            .sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    #[test]
    fn diagonal_input() {
        let h = ComplexMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let e = eigh(&h).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        // eigenvector for 1.0 is e_1, etc.
        assert!((e.vectors[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((e.vectors[(2, 1)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((e.vectors[(0, 2)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sorted_diagonal_gives_identity_vectors() {
        let e = eigh(&ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 3.0])).unwrap();
        assert!(e.vectors.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn pauli_x() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let x = ComplexMatrix::from_vec(2, 2, vec![zero, one, one, zero]).unwrap();
        let e = eigh(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let n = 50;
        let h = random_hermitian(n, 7);
        let e = eigh(&h).unwrap();
        let hnorm = h.norm();
        for k in 0..n {
            let v = e.vector(k);
            let hv = h.mat_vec(&v);
            let resid: f64 = hv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - e.values[k] * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-9 * hnorm, "residual {resid}");
        }
        let vd = e.vectors.adjoint();
        assert!(vd.matmul(&e.vectors).max_abs_diff(&ComplexMatrix::identity(n)) < 1e-10);
        let lam = ComplexMatrix::from_real_diagonal(&e.values);
        let rebuilt = e.vectors.matmul(&lam).matmul(&vd);
        assert!(rebuilt.max_abs_diff(&h) < 1e-9 * hnorm);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigenvector_gauge_is_real_positive() {
        let h = random_hermitian(12, 3);
        let e = eigh(&h).unwrap();
        for k in 0..12 {
            let first = e.vector(k).into_iter().find(|z| z.norm() > 1e-8).unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = ComplexMatrix::identity(2);
        h[(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(eigh(&h), Err(NumericsError::NonHermitianInput { .. })));
    }

    #[test]
    fn rejects_oversized() {
        let h = ComplexMatrix::identity(MAX_EIGH_DIM + 1);
        assert!(matches!(eigh(&h), Err(NumericsError::DimensionTooLarge { .. })));
    }

    #[test]
    fn expm_is_unitary() {
        let h = random_hermitian(8, 11);
        let u = expm_hermitian(&h, 0.37).unwrap();
        assert!(u.unitarity_error() < 1e-12);
    }
}
