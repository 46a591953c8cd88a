use super::{ComplexMatrix, NumericsError, StateVector, C64};

/// Norm error tolerated before renormalization.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// A (possibly time-dependent) Hamiltonian in angular-frequency units.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;

    /// `out = H(t) psi`
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);

    /// Applies `H(t)` to several states stored back to back.
    ///
    /// Implementations with expensive time-dependent coefficients override
    /// this to evaluate them once per call.
    fn apply_many(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let d = self.dim();
        for (p, o) in psi.chunks(d).zip(out.chunks_mut(d)) {
            self.apply(t, p, o);
        }
    }
}

/// Time-independent dense Hamiltonian.
pub struct StaticHamiltonian(pub ComplexMatrix);

impl Hamiltonian for StaticHamiltonian {
    fn dim(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0.row(i).iter().zip(psi).map(|(a, b)| a * b).sum();
        }
    }
}

/// Dense Hamiltonian rebuilt from a callback at every evaluation.
pub struct DenseHamiltonian<F> {
    dim: usize,
    build: F,
}

impl<F: Fn(f64) -> ComplexMatrix + Sync> DenseHamiltonian<F> {
    pub fn new(dim: usize, build: F) -> Self {
        Self { dim, build }
    }
}

impl<F: Fn(f64) -> ComplexMatrix + Sync> Hamiltonian for DenseHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let h = (self.build)(t);
        StaticHamiltonian(h).apply(t, psi, out);
    }

    fn apply_many(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let h = StaticHamiltonian((self.build)(t));
        for (p, o) in psi.chunks(self.dim).zip(out.chunks_mut(self.dim)) {
            h.apply(t, p, o);
        }
    }
}

/// Number of fixed steps used to cover `span` with steps no longer than `dt`.
pub fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Integrates `i dψ/dt = H(t) ψ` from `t0` to `t1` with fixed-step RK4.
///
/// The step is shrunk slightly so that an integer number of steps lands on
/// `t1`. The result is renormalized; a norm error above [`NORM_DRIFT_TOL`]
/// before renormalization is reported as [`NumericsError::NormDrift`].
pub fn evolve<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &StateVector,
    t_span: (f64, f64),
    dt: f64,
) -> Result<StateVector, NumericsError> {
    let mut out = evolve_many(h, std::slice::from_ref(psi0), t_span, dt)?;
    Ok(out.pop().expect("one state in, one state out"))
}

/// [`evolve`] for several initial states sharing the same Hamiltonian.
pub fn evolve_many<H: Hamiltonian + ?Sized>(
    h: &H,
    states: &[StateVector],
    (t0, t1): (f64, f64),
    dt: f64,
) -> Result<Vec<StateVector>, NumericsError> {
    let d = h.dim();
    if let Some(bad) = states.iter().find(|s| s.dim() != d) {
        return Err(NumericsError::Shape(format!(
            "state of dimension {} for a {d}-level Hamiltonian",
            bad.dim()
        )));
    }
    if !(dt > 0.0) || !(t1 >= t0) {
        return Err(NumericsError::BadTimeGrid { dt, span: t1 - t0 });
    }
    let mut psi: Vec<C64> = states.iter().flat_map(|s| s.0.iter().copied()).collect();
    if t1 > t0 {
        let n = step_count(t1 - t0, dt);
        let step = (t1 - t0) / n as f64;
        let len = psi.len();
        let zero = C64::new(0.0, 0.0);
        let (mut k1, mut k2, mut k3, mut k4) =
            (vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]);
        let mut tmp = vec![zero; len];
        let mi = C64::new(0.0, -1.0);
        for s in 0..n {
            let t = t0 + s as f64 * step;
            h.apply_many(t, &psi, &mut k1);
            for i in 0..len {
                tmp[i] = psi[i] + mi * k1[i] * (0.5 * step);
            }
            h.apply_many(t + 0.5 * step, &tmp, &mut k2);
            for i in 0..len {
                tmp[i] = psi[i] + mi * k2[i] * (0.5 * step);
            }
            h.apply_many(t + 0.5 * step, &tmp, &mut k3);
            for i in 0..len {
                tmp[i] = psi[i] + mi * k3[i] * step;
            }
            h.apply_many(t + step, &tmp, &mut k4);
            let w = mi * (step / 6.0);
            for i in 0..len {
                psi[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let mut out = Vec::with_capacity(states.len());
    for (chunk, init) in psi.chunks(d).zip(states) {
        let s = StateVector(chunk.to_vec());
        let drift = (s.norm() - init.norm()).abs();
        if drift > NORM_DRIFT_TOL {
            return Err(NumericsError::NormDrift { drift });
        }
        out.push(s.normalized());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expm_hermitian;

    fn two_level(delta: f64, omega: f64) -> ComplexMatrix {
        // ground at 0, excited at delta, coupling omega/2
        let z = C64::new(0.0, 0.0);
        let c = C64::new(omega / 2.0, 0.0);
        ComplexMatrix::from_vec(2, 2, vec![z, c, c, C64::new(delta, 0.0)]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let h = StaticHamiltonian(ComplexMatrix::zeros(3, 3));
        let psi0 = StateVector(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
            C64::new(0.0, 0.0),
        ]);
        let psi = evolve(&h, &psi0, (0.0, 5.0), 0.01).unwrap();
        assert_eq!(psi, psi0);
    }

    #[test]
    fn resonant_rabi_full_transfer() {
        let omega = 2.0 * std::f64::consts::PI * 10e6;
        let h = StaticHamiltonian(two_level(0.0, omega));
        let t = std::f64::consts::PI / omega;
        let psi = evolve(&h, &StateVector::basis(2, 0), (0.0, t), t / 2000.0).unwrap();
        assert!((psi.populations()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detuned_rabi_matches_formula() {
        let omega = 2.0 * std::f64::consts::PI * 10e6;
        let delta = omega;
        let h = StaticHamiltonian(two_level(delta, omega));
        let w = (omega * omega + delta * delta).sqrt();
        for t in [0.3 / w, 1.7 / w, std::f64::consts::PI / w, 2.0 * std::f64::consts::PI / w] {
            let psi = evolve(&h, &StateVector::basis(2, 0), (0.0, t), t / 4000.0).unwrap();
            let expect = (omega / w).powi(2) * (w * t / 2.0).sin().powi(2);
            assert!((psi.populations()[1] - expect).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn agrees_with_spectral_propagator() {
        let h = two_level(3.0, 2.0);
        let mut big = h.kron(&ComplexMatrix::identity(2));
        big[(0, 3)] = C64::new(0.0, 0.4);
        big[(3, 0)] = C64::new(0.0, -0.4);
        let t = 2.5;
        let u = expm_hermitian(&big, t).unwrap();
        let psi0 = StateVector::basis(4, 0);
        let exact = StateVector(u.mat_vec(&psi0.0));
        let psi = evolve(&StaticHamiltonian(big), &psi0, (0.0, t), 1e-3).unwrap();
        assert!(exact.inner(&psi).norm() >= 1.0 - 1e-7);
    }

    #[test]
    fn coarse_step_reports_norm_drift() {
        let h = StaticHamiltonian(two_level(100.0, 1.0));
        let err = evolve(&h, &StateVector::basis(2, 1), (0.0, 50.0), 0.02).unwrap_err();
        assert!(matches!(err, NumericsError::NormDrift { .. }));
    }

    #[test]
    fn deterministic_for_fixed_dt() {
        let h = StaticHamiltonian(two_level(1.0, 3.0));
        let a = evolve(&h, &StateVector::basis(2, 0), (0.0, 1.3), 1e-3).unwrap();
        let b = evolve(&h, &StateVector::basis(2, 0), (0.0, 1.3), 1e-3).unwrap();
        assert_eq!(a, b);
    }
}
