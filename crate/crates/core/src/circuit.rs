//! Gate-level circuits: JSON ingestion, validation and layering into
//! alternating single-/two-qubit layers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::numerics::{ComplexMatrix, C64};

#[derive(Debug, thiserror::Error)]
pub enum CircuitError {
    #[error("circuit JSON parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid gate #{index} ({name}): {reason}")]
    Validation {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("invalid circuit: {0}")]
    Circuit(String),
}

/// 2×2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Mat2([[o, z], [z, o]])
    }

    pub fn pauli_x() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Mat2([[z, o], [o, z]])
    }

    /// √X = ½[[1+i, 1−i], [1−i, 1+i]].
    pub fn sx() -> Self {
        let a = C64::new(0.5, 0.5);
        let b = C64::new(0.5, -0.5);
        Mat2([[a, b], [b, a]])
    }

    /// Rz(λ) = diag(e^{-iλ/2}, e^{iλ/2}).
    pub fn rz(lambda: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        Mat2([
            [C64::from_polar(1.0, -lambda / 2.0), z],
            [z, C64::from_polar(1.0, lambda / 2.0)],
        ])
    }

    pub fn u3(theta: f64, phi: f64, lambda: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Mat2([
            [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
            [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
        ])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    /// `max |U†U − I|`
    pub fn unitarity_error(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Mat2::identity())
    }

    /// Splits into `e^{iγ} U3(θ, φ, λ)` with θ ∈ [0, π].
    pub fn to_u3(&self) -> (U3Params, f64) {
        let m = &self.0;
        let theta = 2.0 * m[1][0].norm().atan2(m[0][0].norm());
        let tiny = 1e-14;
        let (gamma, phi, lambda) = if m[1][0].norm() < tiny {
            // diagonal: only φ+λ is defined
            let g = m[0][0].arg();
            (g, 0.0, m[1][1].arg() - g)
        } else if m[0][0].norm() < tiny {
            // anti-diagonal: only φ−λ is defined
            let g = m[1][0].arg();
            (g, 0.0, (-m[0][1]).arg() - g)
        } else {
            let g = m[0][0].arg();
            (g, m[1][0].arg() - g, (-m[0][1]).arg() - g)
        };
        (U3Params { theta, phi, lambda }, gamma)
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| self.0[i][j])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct U3Params {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl U3Params {
    pub fn matrix(&self) -> Mat2 {
        Mat2::u3(self.theta, self.phi, self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// Every single-qubit gate is held as U3 parameters after parsing.
    U3 { qubit: usize, params: U3Params },
    Cz { qubits: (usize, usize) },
    SqrtCz { qubits: (usize, usize) },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::U3 { qubit, .. } => vec![*qubit],
            Gate::Cz { qubits: (a, b) } | Gate::SqrtCz { qubits: (a, b) } => vec![*a, *b],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    num_qubits: i64,
    gates: Vec<RawGate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    name: String,
    qubits: Vec<i64>,
    #[serde(default)]
    params: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct RawGateOut<'a> {
    name: &'a str,
    qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    params: Vec<f64>,
}

#[derive(Serialize)]
struct RawCircuitOut<'a> {
    num_qubits: usize,
    gates: Vec<RawGateOut<'a>>,
}

pub fn parse_circuit(json_text: &str) -> Result<Circuit, CircuitError> {
    let raw: RawCircuit = serde_json::from_str(json_text).map_err(|e| CircuitError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if raw.num_qubits <= 0 {
        return Err(CircuitError::Circuit(format!(
            "num_qubits must be positive, got {}",
            raw.num_qubits
        )));
    }
    let n = raw.num_qubits as usize;
    let gates = raw
        .gates
        .into_iter()
        .enumerate()
        .map(|(index, g)| validate_gate(index, g, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Circuit { num_qubits: n, gates })
}

fn validate_gate(index: usize, g: RawGate, n: usize) -> Result<Gate, CircuitError> {
    let fail = |reason: String| CircuitError::Validation {
        index,
        name: g.name.clone(),
        reason,
    };
    let arity = match g.name.as_str() {
        "u3" | "x" | "sx" | "h" | "rz" | "id" => 1,
        "cz" | "sqrt_cz" => 2,
        other => return Err(fail(format!("unknown gate name '{other}'"))),
    };
    if g.qubits.len() != arity {
        return Err(fail(format!("expects {arity} qubit(s), got {}", g.qubits.len())));
    }
    let mut qubits = Vec::with_capacity(arity);
    for &q in &g.qubits {
        if q < 0 || q as usize >= n {
            return Err(fail(format!("qubit index {q} out of range for {n} qubits")));
        }
        qubits.push(q as usize);
    }
    if arity == 2 && qubits[0] == qubits[1] {
        return Err(fail("two-qubit gate needs two distinct qubits".into()));
    }
    let params = g.params.clone().unwrap_or_default();
    let want = match g.name.as_str() {
        "u3" => 3,
        "rz" => 1,
        _ => 0,
    };
    if params.len() != want {
        return Err(fail(format!("expects {want} parameter(s), got {}", params.len())));
    }
    if let Some(p) = params.iter().find(|p| !p.is_finite()) {
        return Err(fail(format!("non-finite parameter {p}")));
    }
    let u3 = |theta, phi, lambda| Gate::U3 {
        qubit: qubits[0],
        params: U3Params { theta, phi, lambda },
    };
    Ok(match g.name.as_str() {
        "u3" => u3(params[0], params[1], params[2]),
        "x" => u3(PI, 0.0, PI),
        "sx" => u3(FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2),
        "h" => u3(FRAC_PI_2, 0.0, PI),
        "rz" => u3(0.0, 0.0, params[0]),
        "id" => u3(0.0, 0.0, 0.0),
        "cz" => Gate::Cz { qubits: (qubits[0], qubits[1]) },
        _ => Gate::SqrtCz { qubits: (qubits[0], qubits[1]) },
    })
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, gates: Vec::new() }
    }

    pub fn to_json(&self) -> String {
        let gates = self
            .gates
            .iter()
            .map(|g| match g {
                Gate::U3 { qubit, params } => RawGateOut {
                    name: "u3",
                    qubits: vec![*qubit],
                    params: vec![params.theta, params.phi, params.lambda],
                },
                Gate::Cz { qubits: (a, b) } => RawGateOut {
                    name: "cz",
                    qubits: vec![*a, *b],
                    params: vec![],
                },
                Gate::SqrtCz { qubits: (a, b) } => RawGateOut {
                    name: "sqrt_cz",
                    qubits: vec![*a, *b],
                    params: vec![],
                },
            })
            .collect();
        serde_json::to_string_pretty(&RawCircuitOut {
            num_qubits: self.num_qubits,
            gates,
        })
        .expect("circuit serializes")
    }

    /// Full `2^n × 2^n` unitary; qubit 0 is the most significant bit.
    pub fn unitary(&self) -> ComplexMatrix {
        let mut u = ComplexMatrix::identity(1 << self.num_qubits);
        for g in &self.gates {
            let step = match g {
                Gate::U3 { qubit, params } => embed_single(self.num_qubits, *qubit, &params.matrix()),
                Gate::Cz { qubits } => controlled_phase(self.num_qubits, *qubits, PI),
                Gate::SqrtCz { qubits } => controlled_phase(self.num_qubits, *qubits, FRAC_PI_2),
            };
            u = step.matmul(&u);
        }
        u
    }
}

/// `I ⊗ … ⊗ m ⊗ … ⊗ I` with `m` acting on `qubit`.
pub fn embed_single(n: usize, qubit: usize, m: &Mat2) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for q in 0..n {
        let f = if q == qubit { m.to_matrix() } else { ComplexMatrix::identity(2) };
        out = out.kron(&f);
    }
    out
}

/// diag(1, 1, 1, e^{iφ}) on the pair.
pub fn controlled_phase(n: usize, (a, b): (usize, usize), phase: f64) -> ComplexMatrix {
    let dim = 1 << n;
    let mut out = ComplexMatrix::identity(dim);
    let (ma, mb) = (1 << (n - 1 - a), 1 << (n - 1 - b));
    for k in 0..dim {
        if k & ma != 0 && k & mb != 0 {
            out[(k, k)] = C64::from_polar(1.0, phase);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleOp {
    pub unitary: Mat2,
    /// `false` for identity padding.
    pub explicit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleQubitLayer {
    /// Indexed by qubit.
    pub ops: Vec<SingleOp>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Cz,
    SqrtCz,
    /// An idle coupled pair that still sees the shared flux pulse.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairOp {
    pub qubits: (usize, usize),
    pub kind: PairKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitLayer {
    pub pairs: Vec<PairOp>,
}

impl TwoQubitLayer {
    pub fn touches(&self, q: usize) -> bool {
        self.pairs.iter().any(|p| p.qubits.0 == q || p.qubits.1 == q)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Single(SingleQubitLayer),
    Two(TwoQubitLayer),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredCircuit {
    pub num_qubits: usize,
    pub layers: Vec<Layer>,
}

/// Greedy as-soon-as-possible layering. See [`layerize_with_couplers`].
pub fn layerize(c: &Circuit) -> LayeredCircuit {
    layerize_with_couplers(c, &[])
}

/// Layers `c` and marks idle coupled pairs as identity pairs.
///
/// Every coupler from `couplers` whose qubits are both free in a two-qubit
/// layer is added to that layer as a [`PairKind::Identity`] pair, in coupler
/// order, keeping the pairs disjoint.
pub fn layerize_with_couplers(c: &Circuit, couplers: &[(usize, usize)]) -> LayeredCircuit {
    let n = c.num_qubits;
    let mut layers: Vec<Layer> = Vec::new();
    // index of the last layer holding an explicit op on each qubit
    let mut last: Vec<Option<usize>> = vec![None; n];

    let blank_single = || {
        Layer::Single(SingleQubitLayer {
            ops: vec![
                SingleOp {
                    unitary: Mat2::identity(),
                    explicit: false,
                };
                n
            ],
        })
    };
    let ensure = |layers: &mut Vec<Layer>, idx: usize| {
        while layers.len() <= idx {
            if layers.len() % 2 == 0 {
                layers.push(blank_single());
            } else {
                layers.push(Layer::Two(TwoQubitLayer { pairs: Vec::new() }));
            }
        }
    };

    for g in &c.gates {
        match g {
            Gate::U3 { qubit, params } => {
                let idx = match last[*qubit] {
                    None => 0,
                    Some(k) if k % 2 == 0 => k,
                    Some(k) => k + 1,
                };
                ensure(&mut layers, idx);
                if let Layer::Single(l) = &mut layers[idx] {
                    let op = &mut l.ops[*qubit];
                    op.unitary = params.matrix() * op.unitary;
                    op.explicit = true;
                }
                last[*qubit] = Some(idx);
            }
            Gate::Cz { qubits } | Gate::SqrtCz { qubits } => {
                let kind = if matches!(g, Gate::Cz { .. }) { PairKind::Cz } else { PairKind::SqrtCz };
                let after = match (last[qubits.0], last[qubits.1]) {
                    (None, None) => None,
                    (a, b) => a.max(b),
                };
                let idx = match after {
                    None => 1,
                    Some(k) if k % 2 == 0 => k + 1,
                    Some(k) => k + 2,
                };
                ensure(&mut layers, idx);
                if let Layer::Two(l) = &mut layers[idx] {
                    l.pairs.push(PairOp { qubits: *qubits, kind });
                }
                last[qubits.0] = Some(idx);
                last[qubits.1] = Some(idx);
            }
        }
    }
    if layers.len() % 2 == 0 && !layers.is_empty() {
        layers.push(blank_single());
    }
    for layer in &mut layers {
        if let Layer::Two(l) = layer {
            for &(a, b) in couplers {
                if a != b && a < n && b < n && !l.touches(a) && !l.touches(b) {
                    l.pairs.push(PairOp {
                        qubits: (a, b),
                        kind: PairKind::Identity,
                    });
                }
            }
        }
    }
    LayeredCircuit { num_qubits: n, layers }
}

impl LayeredCircuit {
    /// Back to a gate list: explicit single-qubit ops as `u3` (global phases
    /// dropped) and the CZ-family pairs. Identity pairs are omitted.
    pub fn flatten(&self) -> Circuit {
        let mut gates = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Single(l) => {
                    for (q, op) in l.ops.iter().enumerate() {
                        if op.explicit {
                            gates.push(Gate::U3 {
                                qubit: q,
                                params: op.unitary.to_u3().0,
                            });
                        }
                    }
                }
                Layer::Two(l) => {
                    for p in &l.pairs {
                        match p.kind {
                            PairKind::Cz => gates.push(Gate::Cz { qubits: p.qubits }),
                            PairKind::SqrtCz => gates.push(Gate::SqrtCz { qubits: p.qubits }),
                            PairKind::Identity => {}
                        }
                    }
                }
            }
        }
        Circuit {
            num_qubits: self.num_qubits,
            gates,
        }
    }

    pub fn check_invariants(&self) -> Result<(), CircuitError> {
        if self.layers.is_empty() {
            return Ok(());
        }
        if self.layers.len() % 2 == 0 {
            return Err(CircuitError::Circuit("layer count must be odd".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            match (i % 2, layer) {
                (0, Layer::Single(l)) => {
                    if l.ops.len() != self.num_qubits {
                        return Err(CircuitError::Circuit(format!(
                            "single-qubit layer {i} covers {} of {} qubits",
                            l.ops.len(),
                            self.num_qubits
                        )));
                    }
                }
                (1, Layer::Two(l)) => {
                    let mut seen = vec![false; self.num_qubits];
                    for p in &l.pairs {
                        for q in [p.qubits.0, p.qubits.1] {
                            if q >= self.num_qubits || seen[q] {
                                return Err(CircuitError::Circuit(format!(
                                    "qubit {q} repeated or out of range in layer {i}"
                                )));
                            }
                            seen[q] = true;
                        }
                    }
                }
                _ => {
                    return Err(CircuitError::Circuit(format!(
                        "layer {i} breaks the 1q/2q alternation"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn unitary(&self) -> ComplexMatrix {
        let n = self.num_qubits;
        let mut u = ComplexMatrix::identity(1 << n);
        for layer in &self.layers {
            match layer {
                Layer::Single(l) => {
                    for (q, op) in l.ops.iter().enumerate() {
                        u = embed_single(n, q, &op.unitary).matmul(&u);
                    }
                }
                Layer::Two(l) => {
                    for p in &l.pairs {
                        let phase = match p.kind {
                            PairKind::Cz => PI,
                            PairKind::SqrtCz => FRAC_PI_2,
                            PairKind::Identity => continue,
                        };
                        u = controlled_phase(n, p.qubits, phase).matmul(&u);
                    }
                }
            }
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_parses_to_u3_pi_0_pi() {
        let c = parse_circuit(r#"{"num_qubits":1,"gates":[{"name":"x","qubits":[0]}]}"#).unwrap();
        match &c.gates[0] {
            Gate::U3 { qubit: 0, params } => {
                assert!(params.matrix().max_abs_diff(&Mat2::pauli_x()) < 1e-15);
                assert_eq!(
                    *params,
                    U3Params {
                        theta: PI,
                        phi: 0.0,
                        lambda: PI
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cz_parses() {
        let c = parse_circuit(r#"{"num_qubits":2,"gates":[{"name":"cz","qubits":[0,1]}]}"#).unwrap();
        assert_eq!(c.gates, vec![Gate::Cz { qubits: (0, 1) }]);
    }

    #[test]
    fn repeated_qubit_is_rejected() {
        let err = parse_circuit(r#"{"num_qubits":2,"gates":[{"name":"cz","qubits":[0,0]}]}"#)
            .unwrap_err();
        assert!(matches!(err, CircuitError::Validation { index: 0, .. }));
    }

    #[test]
    fn validation_errors() {
        for bad in [
            r#"{"num_qubits":2,"gates":[{"name":"x","qubits":[2]}]}"#,
            r#"{"num_qubits":2,"gates":[{"name":"x","qubits":[0,1]}]}"#,
            r#"{"num_qubits":2,"gates":[{"name":"u3","qubits":[0],"params":[1.0]}]}"#,
            r#"{"num_qubits":2,"gates":[{"name":"ccx","qubits":[0]}]}"#,
            r#"{"num_qubits":2,"gates":[{"name":"x","qubits":[-1]}]}"#,
        ] {
            assert!(matches!(parse_circuit(bad), Err(CircuitError::Validation { .. })), "{bad}");
        }
        assert!(matches!(
            parse_circuit(r#"{"num_qubits":0,"gates":[]}"#),
            Err(CircuitError::Circuit(_))
        ));
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_circuit("{\n  \"num_qubits\": 1,\n  \"gates\": [ }").unwrap_err();
        match err {
            CircuitError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn named_gates_match_definitions() {
        let sx = Mat2::sx();
        let parsed = parse_circuit(r#"{"num_qubits":1,"gates":[{"name":"sx","qubits":[0]}]}"#).unwrap();
        let Gate::U3 { params, .. } = parsed.gates[0] else { panic!() };
        let (err, _) = params.matrix().to_matrix().diff_up_to_phase(&sx.to_matrix());
        assert!(err < 1e-15);
    }

    #[test]
    fn x_then_x_is_one_identity_layer() {
        let c = parse_circuit(
            r#"{"num_qubits":1,"gates":[{"name":"x","qubits":[0]},{"name":"x","qubits":[0]}]}"#,
        )
        .unwrap();
        let lc = layerize(&c);
        assert_eq!(lc.layers.len(), 1);
        let Layer::Single(l) = &lc.layers[0] else { panic!() };
        assert!(l.ops[0].unitary.max_abs_diff(&Mat2::identity()) < 1e-15);
    }

    #[test]
    fn shared_qubit_splits_cz_layers() {
        let c = Circuit {
            num_qubits: 3,
            gates: vec![Gate::Cz { qubits: (0, 1) }, Gate::Cz { qubits: (1, 2) }],
        };
        let lc = layerize(&c);
        assert_eq!(lc.layers.len(), 5);
        lc.check_invariants().unwrap();
        for i in [0, 2, 4] {
            let Layer::Single(l) = &lc.layers[i] else { panic!() };
            assert!(l.ops.iter().all(|op| !op.explicit));
        }
    }

    #[test]
    fn identity_pairs_fill_idle_couplers() {
        let c = Circuit {
            num_qubits: 4,
            gates: vec![Gate::Cz { qubits: (0, 1) }],
        };
        let lc = layerize_with_couplers(&c, &[(0, 1), (1, 2), (2, 3)]);
        let Layer::Two(l) = &lc.layers[1] else { panic!() };
        assert_eq!(
            l.pairs,
            vec![
                PairOp { qubits: (0, 1), kind: PairKind::Cz },
                PairOp { qubits: (2, 3), kind: PairKind::Identity },
            ]
        );
    }

    #[test]
    fn empty_circuit_has_no_layers() {
        assert!(layerize(&Circuit::new(3)).layers.is_empty());
    }

    #[test]
    fn to_u3_roundtrip_up_to_phase() {
        for m in [Mat2::sx(), Mat2::pauli_x(), Mat2::rz(0.3), Mat2::u3(0.4, 1.1, -2.0)] {
            let (p, g) = m.to_u3();
            let rebuilt = p.matrix().scale(C64::from_polar(1.0, g));
            assert!(rebuilt.max_abs_diff(&m) < 1e-14, "{m:?}");
        }
    }
}
