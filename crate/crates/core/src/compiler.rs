//! Pulse-shape-invariant compilation.
//!
//! Every single-qubit layer becomes two √X pulses per qubit with virtual-Z
//! frame updates, and every two-qubit layer becomes two √CZ slots with a full
//! single-qubit dressing cycle between them, so CZ and idle pairs share the
//! same physical schedule.
//!
//! Phase convention: a pulse with carrier phase φ implements
//! `P(φ) = Rz(−φ)·SX·Rz(φ)`. The ideal operator after any prefix of the
//! program is `e^{iγ}·⊗_q Rz(F_q)·(physical pulses)`, where `F` is the
//! virtual-Z frame.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::circuit::{
    controlled_phase, embed_single, Layer, LayeredCircuit, Mat2, PairKind, TwoQubitLayer,
};
use crate::numerics::{wrap_angle, ComplexMatrix, C64};

pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompileError {
    #[error("matrix is not unitary (max |U†U − I| = {0:e})")]
    NotUnitary(f64),
    #[error("invalid layered circuit: {0}")]
    InvalidLayers(String),
}

/// `U = e^{iγ}·Rz(post)·SX·Rz(mid)·SX·Rz(pre)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZxzxzDecomposition {
    pub pre_z: f64,
    pub mid_z: f64,
    pub post_z: f64,
    pub global_phase: f64,
}

impl ZxzxzDecomposition {
    pub fn matrix(&self) -> Mat2 {
        let w = Mat2::rz(self.post_z) * Mat2::sx() * Mat2::rz(self.mid_z) * Mat2::sx() * Mat2::rz(self.pre_z);
        w.scale(C64::from_polar(1.0, self.global_phase))
    }
}

/// Below this magnitude an off-diagonal (or diagonal) pair counts as zero.
const GAUGE_EPS: f64 = 1e-12;

pub fn decompose_u3(u: &Mat2) -> Result<ZxzxzDecomposition, CompileError> {
    let err = u.unitarity_error();
    if !(err <= UNITARITY_TOL) {
        return Err(CompileError::NotUnitary(err));
    }
    let m = &u.0;
    let (pre, mid, post) = if m[1][0].norm() < GAUGE_EPS {
        (m[1][1].arg() - m[0][0].arg() + PI, -PI, 0.0)
    } else if m[0][0].norm() < GAUGE_EPS {
        (m[0][1].arg() - m[1][0].arg(), 0.0, 0.0)
    } else {
        let mid = 2.0 * m[0][0].norm().atan2(m[1][0].norm());
        (
            m[0][1].arg() - m[0][0].arg(),
            mid,
            m[1][0].arg() - m[0][0].arg(),
        )
    };
    let mut d = ZxzxzDecomposition {
        pre_z: wrap_angle(pre),
        mid_z: if mid == -PI { mid } else { wrap_angle(mid) },
        post_z: wrap_angle(post),
        global_phase: 0.0,
    };
    let w = d.matrix();
    let overlap: C64 = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| w.0[i][j].conj() * m[i][j])
        .sum();
    d.global_phase = overlap.arg();
    Ok(d)
}

/// Per-qubit virtual-Z frame, kept in `(−π, π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualZFrame {
    pub phases: Vec<f64>,
}

impl VirtualZFrame {
    pub fn new(n: usize) -> Self {
        Self { phases: vec![0.0; n] }
    }

    /// Adds `delta` to qubit `q`'s frame and returns the global phase picked
    /// up by the reduction (`Rz(x + 2π) = −Rz(x)`).
    pub fn advance(&mut self, q: usize, delta: f64) -> f64 {
        let raw = self.phases[q] + delta;
        let reduced = wrap_angle(raw);
        let turns = ((raw - reduced) / (2.0 * PI)).round();
        self.phases[q] = reduced;
        if turns.rem_euclid(2.0) == 1.0 {
            PI
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSlot {
    pub qubits: (usize, usize),
    pub role: PairKind,
    /// Conditional phase requested from the pair in each √CZ slot.
    pub slot_phases: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhysicalCycle {
    /// `phases[q] = (φ₁, φ₂)` for every qubit.
    OneQubit { phases: Vec<[f64; 2]> },
    /// Slot 1, a full dressing pulse pair on every qubit, slot 2.
    TwoQubit {
        pairs: Vec<PairSlot>,
        dressing: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// Use `√CZ = diag(1,1,1,−i)` instead of `diag(1,1,1,i)`.
    pub negative_sqrt_cz: bool,
}

impl CompileOptions {
    pub fn sqrt_cz_phase(&self) -> f64 {
        if self.negative_sqrt_cz {
            -FRAC_PI_2
        } else {
            FRAC_PI_2
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledProgram {
    pub num_qubits: usize,
    pub options: CompileOptions,
    pub cycles: Vec<PhysicalCycle>,
    pub final_frame: VirtualZFrame,
    pub global_phase: f64,
}

struct Builder {
    frame: VirtualZFrame,
    global_phase: f64,
}

impl Builder {
    fn pulse_pair(&mut self, q: usize, u: &Mat2) -> Result<[f64; 2], CompileError> {
        let d = decompose_u3(u)?;
        let f = self.frame.phases[q];
        let phi1 = wrap_angle(f + d.pre_z);
        let phi2 = wrap_angle(f + d.pre_z + d.mid_z);
        self.global_phase += d.global_phase;
        self.global_phase += self.frame.advance(q, d.pre_z + d.mid_z + d.post_z);
        Ok([phi1, phi2])
    }

    fn cycle(&mut self, ops: &[Mat2]) -> Result<Vec<[f64; 2]>, CompileError> {
        ops.iter()
            .enumerate()
            .map(|(q, u)| self.pulse_pair(q, u))
            .collect()
    }
}

/// The pair slots and dressing operations for one two-qubit layer.
///
/// Identity pairs `(a, b)` run `X_a · √CZ · X_a · √CZ` in time order; the
/// leading `X_a` is returned in `pre_x` for absorption into the preceding
/// single-qubit layer, the middle one is part of `dressing`, and the residual
/// `diag(1, ±i)` on `b` is cancelled by the virtual-Z in `frame_fix`.
pub struct TwoQubitPlan {
    pub pairs: Vec<PairSlot>,
    pub pre_x: Vec<usize>,
    pub dressing: Vec<Mat2>,
    pub frame_fix: Vec<(usize, f64)>,
    /// Phase removed by the frame fix, `e^{∓iπ/4}` per identity pair.
    pub global_phase: f64,
}

pub fn compile_two_qubit_layer(
    layer: &TwoQubitLayer,
    n: usize,
    options: &CompileOptions,
) -> TwoQubitPlan {
    let s = options.sqrt_cz_phase();
    let mut plan = TwoQubitPlan {
        pairs: Vec::new(),
        pre_x: Vec::new(),
        dressing: vec![Mat2::identity(); n],
        frame_fix: Vec::new(),
        global_phase: 0.0,
    };
    for p in &layer.pairs {
        let slot_phases = match p.kind {
            PairKind::Cz | PairKind::Identity => [s, s],
            // the circuit gate is always diag(1,1,1,i), whatever the hardware sign
            PairKind::SqrtCz => [s, wrap_angle(FRAC_PI_2 - s)],
        };
        plan.pairs.push(PairSlot {
            qubits: p.qubits,
            role: p.kind,
            slot_phases,
        });
        if p.kind == PairKind::Identity {
            let (a, b) = p.qubits;
            plan.pre_x.push(a);
            plan.dressing[a] = Mat2::pauli_x();
            // diag(1, e^{is}) = e^{is/2} Rz(s); undo with Rz(−s)
            plan.frame_fix.push((b, -s));
            plan.global_phase -= s / 2.0;
        }
    }
    plan
}

pub fn compile(lc: &LayeredCircuit, options: &CompileOptions) -> Result<CompiledProgram, CompileError> {
    lc.check_invariants()
        .map_err(|e| CompileError::InvalidLayers(e.to_string()))?;
    let n = lc.num_qubits;
    let mut b = Builder {
        frame: VirtualZFrame::new(n),
        global_phase: 0.0,
    };
    let mut cycles = Vec::new();
    let plans: Vec<Option<TwoQubitPlan>> = lc
        .layers
        .iter()
        .map(|l| match l {
            Layer::Two(t) => Some(compile_two_qubit_layer(t, n, options)),
            Layer::Single(_) => None,
        })
        .collect();

    for (i, layer) in lc.layers.iter().enumerate() {
        match layer {
            Layer::Single(l) => {
                let mut ops: Vec<Mat2> = l.ops.iter().map(|o| o.unitary).collect();
                if let Some(Some(next)) = plans.get(i + 1) {
                    for &a in &next.pre_x {
                        ops[a] = Mat2::pauli_x() * ops[a];
                    }
                }
                let phases = b.cycle(&ops)?;
                cycles.push(PhysicalCycle::OneQubit { phases });
            }
            Layer::Two(_) => {
                let plan = plans[i].as_ref().expect("plan for every two-qubit layer");
                let dressing = b.cycle(&plan.dressing)?;
                for &(q, dz) in &plan.frame_fix {
                    b.global_phase += b.frame.advance(q, dz);
                }
                b.global_phase += plan.global_phase;
                cycles.push(PhysicalCycle::TwoQubit {
                    pairs: plan.pairs.clone(),
                    dressing,
                });
            }
        }
    }
    Ok(CompiledProgram {
        num_qubits: n,
        options: *options,
        cycles,
        final_frame: b.frame,
        global_phase: wrap_angle(b.global_phase),
    })
}

/// `P(φ) = Rz(−φ)·SX·Rz(φ)`
pub fn pulse_matrix(phi: f64) -> Mat2 {
    Mat2::rz(-phi) * Mat2::sx() * Mat2::rz(phi)
}

impl CompiledProgram {
    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Every cycle drives every qubit with exactly two pulses.
    pub fn check_isomorphism(&self) -> bool {
        self.cycles.iter().all(|c| match c {
            PhysicalCycle::OneQubit { phases } => phases.len() == self.num_qubits,
            PhysicalCycle::TwoQubit { dressing, .. } => dressing.len() == self.num_qubits,
        })
    }

    /// Operator realized by the physical pulses, frame and tracked phase.
    pub fn unitary(&self) -> ComplexMatrix {
        let n = self.num_qubits;
        let pulses = |u: ComplexMatrix, phases: &[[f64; 2]]| {
            let mut u = u;
            for (q, [p1, p2]) in phases.iter().enumerate() {
                let m = pulse_matrix(*p2) * pulse_matrix(*p1);
                u = embed_single(n, q, &m).matmul(&u);
            }
            u
        };
        let slot = |u: ComplexMatrix, pairs: &[PairSlot], k: usize| {
            let mut u = u;
            for p in pairs {
                u = controlled_phase(n, p.qubits, p.slot_phases[k]).matmul(&u);
            }
            u
        };
        let mut u = ComplexMatrix::identity(1 << n);
        for c in &self.cycles {
            u = match c {
                PhysicalCycle::OneQubit { phases } => pulses(u, phases),
                PhysicalCycle::TwoQubit { pairs, dressing } => {
                    let u = slot(u, pairs, 0);
                    let u = pulses(u, dressing);
                    slot(u, pairs, 1)
                }
            };
        }
        for (q, &f) in self.final_frame.phases.iter().enumerate() {
            u = embed_single(n, q, &Mat2::rz(f)).matmul(&u);
        }
        u.scale(C64::from_polar(1.0, self.global_phase))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{layerize, parse_circuit, PairOp};

    fn check(u: &Mat2) {
        let d = decompose_u3(u).unwrap();
        assert!(d.matrix().max_abs_diff(u) < 1e-12, "{u:?} -> {d:?}");
    }

    #[test]
    fn sx_identity_and_paulis() {
        for u in [
            Mat2::sx(),
            Mat2::identity(),
            Mat2::pauli_x(),
            Mat2::rz(0.7),
            Mat2::u3(PI / 2.0, 0.0, PI),
        ] {
            check(&u);
        }
    }

    #[test]
    fn diagonal_gauge_is_fixed() {
        let d = decompose_u3(&Mat2::rz(0.4)).unwrap();
        assert_eq!(d.mid_z, -PI);
        assert_eq!(d.post_z, 0.0);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = Mat2::identity().scale(C64::new(1.1, 0.0));
        assert!(matches!(decompose_u3(&m), Err(CompileError::NotUnitary(_))));
    }

    #[test]
    fn frame_reduction_tracks_sign() {
        let mut f = VirtualZFrame::new(1);
        assert_eq!(f.advance(0, 3.0), 0.0);
        let g = f.advance(0, 3.0);
        assert!((f.phases[0] - (6.0 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(g, PI);
    }

    #[test]
    fn hadamard_program() {
        let c = parse_circuit(r#"{"num_qubits":1,"gates":[{"name":"h","qubits":[0]}]}"#).unwrap();
        let lc = layerize(&c);
        let p = compile(&lc, &CompileOptions::default()).unwrap();
        assert_eq!(p.cycles.len(), 1);
        assert!(p.unitary().max_abs_diff(&c.unitary()) < 1e-12);
    }

    #[test]
    fn empty_circuit_compiles_to_nothing() {
        let lc = layerize(&crate::circuit::Circuit::new(3));
        let p = compile(&lc, &CompileOptions::default()).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn identity_pair_dressing_is_identity() {
        for negative in [false, true] {
            let opts = CompileOptions { negative_sqrt_cz: negative };
            let layer = TwoQubitLayer {
                pairs: vec![PairOp { qubits: (0, 1), kind: PairKind::Identity }],
            };
            let lc = LayeredCircuit {
                num_qubits: 2,
                layers: vec![
                    Layer::Single(crate::circuit::SingleQubitLayer {
                        ops: vec![
                            crate::circuit::SingleOp {
                                unitary: Mat2::identity(),
                                explicit: false
                            };
                            2
                        ],
                    }),
                    Layer::Two(layer),
                    Layer::Single(crate::circuit::SingleQubitLayer {
                        ops: vec![
                            crate::circuit::SingleOp {
                                unitary: Mat2::identity(),
                                explicit: false
                            };
                            2
                        ],
                    }),
                ],
            };
            let p = compile(&lc, &opts).unwrap();
            assert!(p.unitary().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        }
    }
}
