use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CouplerSystemSpec, CzError, ModelParts};
use crate::numerics::{eigh, hz_to_rad, rad_to_hz, Eigh};

/// Smallest acceptable winning overlap `|⟨bare|dressed⟩|²`.
pub const LABEL_THRESHOLD: f64 = 0.5;

/// The eight labels `|a c b⟩` with `a, b, c ∈ {0, 1}`.
pub(crate) const TRACKED: [[usize; 3]; 8] =
    [[0, 0, 0], [0, 0, 1], [1, 0, 0], [1, 0, 1], [0, 1, 0], [0, 1, 1], [1, 1, 0], [1, 1, 1]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedSpectrum {
    pub coupler_hz: f64,
    /// Bare label of each eigenstate, eigenvalues ascending.
    pub labels: Vec<[usize; 3]>,
    pub energies_hz: Vec<f64>,
    /// Winning overlap of each eigenstate.
    pub overlaps: Vec<f64>,
    pub zeta_hz: f64,
    /// `omega_c_hz[a][b] = E(a1b) − E(a0b)`.
    pub omega_c_hz: [[f64; 2]; 2],
}

impl DressedSpectrum {
    pub fn energy_hz(&self, label: [usize; 3]) -> Option<f64> {
        self.labels.iter().position(|l| *l == label).map(|k| self.energies_hz[k])
    }

    /// `max_ab |ω_c^{ab} − ω_c^{00}|`.
    pub fn max_separation_hz(&self) -> f64 {
        let w = self.omega_c_hz;
        [w[0][1], w[1][0], w[1][1]].iter().map(|x| (x - w[0][0]).abs()).fold(0.0, f64::max)
    }
}

/// Eigendecomposition with a bijective bare-label assignment: all
/// `(bare, dressed)` pairs are taken in order of decreasing overlap and
/// accepted when both ends are still free.
pub(crate) struct Labeled {
    pub eig: Eigh,
    /// Dressed index for each basis state.
    pub dressed_of: Vec<usize>,
    /// Winning overlap for each basis state.
    pub overlap_of: Vec<f64>,
}

pub(crate) fn label(parts: &ModelParts, wc: f64) -> Result<Labeled, CzError> {
    let h = parts.static_h(wc);
    let eig = eigh(&h)?;
    let n = parts.basis.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for k in 0..n {
        for i in 0..n {
            let o = eig.vectors[(i, k)].norm_sqr();
            if o > 1e-6 {
                pairs.push((o, i, k));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut dressed_of = vec![usize::MAX; n];
    let mut overlap_of = vec![0.0; n];
    let mut taken = vec![false; n];
    for (o, i, k) in pairs {
        if dressed_of[i] == usize::MAX && !taken[k] {
            dressed_of[i] = k;
            overlap_of[i] = o;
            taken[k] = true;
        }
    }
    // leftovers (only possible with vanishing overlaps) pair up in order
    let mut free = (0..n).filter(|&k| !taken[k]);
    for i in 0..n {
        if dressed_of[i] == usize::MAX {
            dressed_of[i] = free.next().expect("counts match");
        }
    }
    Ok(Labeled { eig, dressed_of, overlap_of })
}

impl Labeled {
    pub fn check(&self, parts: &ModelParts, coupler_hz: f64, labels: &[[usize; 3]]) -> Result<(), CzError> {
        for &l in labels {
            let i = parts.basis.find(l).ok_or_else(|| CzError::InvalidInput(format!("label {l:?} outside basis")))?;
            if self.overlap_of[i] < LABEL_THRESHOLD {
                return Err(CzError::LabelAmbiguity { label: l, overlap: self.overlap_of[i], coupler_hz });
            }
        }
        Ok(())
    }

    pub fn energy(&self, parts: &ModelParts, l: [usize; 3]) -> f64 {
        self.eig.values[self.dressed_of[parts.basis.find(l).expect("tracked label")]]
    }

    /// ζ in rad/s.
    pub fn zeta(&self, parts: &ModelParts) -> f64 {
        let e = |l| self.energy(parts, l);
        e([1, 0, 1]) + e([0, 0, 0]) - e([1, 0, 0]) - e([0, 0, 1])
    }
}

pub(crate) fn spectrum_from(parts: &ModelParts, coupler_hz: f64) -> Result<DressedSpectrum, CzError> {
    let lab = label(parts, hz_to_rad(coupler_hz))?;
    lab.check(parts, coupler_hz, &TRACKED)?;
    let n = parts.basis.len();
    let mut labels = vec![[0; 3]; n];
    let mut overlaps = vec![0.0; n];
    for i in 0..n {
        labels[lab.dressed_of[i]] = parts.basis.states[i];
        overlaps[lab.dressed_of[i]] = lab.overlap_of[i];
    }
    let e = |l| rad_to_hz(lab.energy(parts, l));
    let mut omega_c_hz = [[0.0; 2]; 2];
    for (a, row) in omega_c_hz.iter_mut().enumerate() {
        for (b, w) in row.iter_mut().enumerate() {
            *w = e([a, 1, b]) - e([a, 0, b]);
        }
    }
    Ok(DressedSpectrum {
        coupler_hz,
        labels,
        energies_hz: lab.eig.values.iter().map(|&v| rad_to_hz(v)).collect(),
        overlaps,
        zeta_hz: rad_to_hz(lab.zeta(parts)),
        omega_c_hz,
    })
}

/// Dressed energies, ζ and the conditional coupler transitions at bare
/// coupler frequency `coupler_hz`.
pub fn dressed_spectrum(spec: &CouplerSystemSpec, coupler_hz: f64) -> Result<DressedSpectrum, CzError> {
    let parts = ModelParts::new(spec, None)?;
    spectrum_from(&parts, coupler_hz)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzPoint {
    pub coupler_hz: f64,
    /// `None` where labeling failed.
    pub spectrum: Option<DressedSpectrum>,
    pub error: Option<String>,
}

pub fn zz_vs_coupler(spec: &CouplerSystemSpec, grid_hz: &[f64]) -> Result<Vec<ZzPoint>, CzError> {
    let parts = ModelParts::new(spec, None)?;
    grid_hz
        .par_iter()
        .map(|&f| match spectrum_from(&parts, f) {
            Ok(s) => Ok(ZzPoint { coupler_hz: f, spectrum: Some(s), error: None }),
            Err(e @ CzError::LabelAmbiguity { .. }) => {
                Ok(ZzPoint { coupler_hz: f, spectrum: None, error: Some(e.to_string()) })
            }
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cz::ModeSpec;

    #[test]
    fn uncoupled_levels_are_bare_sums() {
        let spec = CouplerSystemSpec::transmons(5.3e9, 5.0e9, 6.0e9, [-2e8; 3], 0.0, 0.0, 0.0, 3);
        let s = dressed_spectrum(&spec, 6.0e9).unwrap();
        assert!(s.zeta_hz.abs() < 1e-3);
        assert!(s.max_separation_hz() < 1e-3);
        let e = s.energy_hz([1, 2, 1]).unwrap();
        assert!((e - (5.3e9 + 5.0e9 + 12.0e9 - 2e8)).abs() < 1e-3);
    }

    #[test]
    fn explicit_duffing_matches_builtin() {
        let d = CouplerSystemSpec::reference(3);
        let explicit = |f: f64, a: f64| ModeSpec::Explicit {
            levels_hz: vec![0.0, f, 2.0 * f + a],
            coupling: vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 2f64.sqrt()], vec![0.0, 2f64.sqrt(), 0.0]],
        };
        let e = CouplerSystemSpec {
            qubit1: explicit(5.3e9, -2e8),
            coupler: explicit(6.5e9, -2e8),
            qubit2: explicit(5.0e9, -2e8),
            ..d.clone()
        };
        let (a, b) = (dressed_spectrum(&d, 6.0e9).unwrap(), dressed_spectrum(&e, 6.0e9).unwrap());
        assert!((a.zeta_hz - b.zeta_hz).abs() < 1e-3);
    }
}
