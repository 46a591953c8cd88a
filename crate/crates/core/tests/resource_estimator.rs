use std::f64::consts::PI;

use muxctl_core::resources::*;

#[test]
fn multiplicity_examples() {
    assert_eq!(multiplicity(1e9, 10e6).unwrap(), 100);
    assert_eq!(multiplicity(3e9, 10e6).unwrap(), 300);
    assert_eq!(multiplicity(7e6, 7e6).unwrap(), 1);
    assert_eq!(multiplicity(25e6, 10e6).unwrap(), 2);
    assert!(multiplicity(5e6, 10e6).is_err());
    assert!(multiplicity(1e9, 0.0).is_err());
}

#[test]
fn ten_by_ten_counts() {
    let l = LatticeSpec { rows: 10, cols: 10 };
    let r = SharingRules::default();
    let t = wire_counts(&l, Scheme::Traditional, 100, &r);
    assert_eq!((t.qubit_xy, t.coupler_z, t.total), (100, 180, 280));
    let m = wire_counts(&l, Scheme::Multiplexed, 100, &r);
    assert_eq!((m.qubit_xy, m.coupler_z, m.coupler_xy, m.total), (10, 20, 10, 40));
}

#[test]
fn single_qubit_lattice_is_degenerate() {
    let l = LatticeSpec { rows: 1, cols: 1 };
    let r = SharingRules::default();
    assert_eq!(wire_counts(&l, Scheme::Traditional, 10, &r).total, wire_counts(&l, Scheme::Multiplexed, 10, &r).total);
}

#[test]
fn counts_monotone_and_multiplexing_never_worse() {
    let r = SharingRules::default();
    for m in [2, 3, 4, 16, 100] {
        for rows in 1..12 {
            for cols in 1..12 {
                let l = LatticeSpec { rows, cols };
                let (t, x) = (wire_counts(&l, Scheme::Traditional, m, &r), wire_counts(&l, Scheme::Multiplexed, m, &r));
                for bigger in [LatticeSpec { rows: rows + 1, cols }, LatticeSpec { rows, cols: cols + 1 }] {
                    assert!(wire_counts(&bigger, Scheme::Traditional, m, &r).total >= t.total);
                    assert!(wire_counts(&bigger, Scheme::Multiplexed, m, &r).total >= x.total);
                }
                if rows >= 2 && cols >= 2 {
                    assert!(x.total <= t.total, "{rows}x{cols} M={m}");
                }
                assert_eq!(l.couplers(), rows * (cols - 1) + (rows - 1) * cols);
            }
        }
    }
}

#[test]
fn heat_load_reference_and_scaling() {
    let w = |f: f64| 2.0 * PI * f;
    let p = heat_load_per_tone(w(5e9), 10e-3, w(1.6e6)).unwrap();
    assert!((p.dbm + 90.0).abs() < 0.5, "{}", p.dbm);
    let p2 = heat_load_per_tone(w(5e9), 10e-3, w(3.2e6)).unwrap();
    assert!((p2.watts / p.watts - 4.0).abs() < 1e-12);
    let p3 = heat_load_per_tone(w(5e9), 20e-3, w(1.6e6)).unwrap();
    let p4 = heat_load_per_tone(w(10e9), 10e-3, w(1.6e6)).unwrap();
    assert!((p3.watts / p.watts - 2.0).abs() < 1e-12 && (p4.watts / p.watts - 2.0).abs() < 1e-12);
    assert!(heat_load_per_tone(0.0, 1.0, 1.0).is_err());
}

#[test]
fn coupling_scaling() {
    let one = error_scaling(1.0).unwrap();
    assert_eq!((one.t1, one.gate_time, one.error), (1.0, 1.0, 1.0));
    let half = error_scaling(0.5).unwrap();
    assert_eq!((half.t1, half.gate_time, half.error), (4.0, 2.0, 0.5));
    for s in [0.1, 0.3, 2.0, 7.0] {
        let e = error_scaling(s).unwrap();
        assert!((e.error * e.t1 / e.gate_time - 1.0).abs() < 1e-12);
    }
    assert!(error_scaling(0.0).is_err());
}

#[test]
fn feasibility_examples() {
    let r = SharingRules::default();
    let n = 100_000;
    let lat = LatticeSpec::for_qubits(n);
    assert!(lat.qubits() >= n);
    let b = BudgetSpec::reference();
    let rep = system_feasibility(&b, n, &lat, &r).unwrap();
    assert_eq!(rep.multiplicity, 100);
    assert_eq!(rep.xy_cables_required, 1000);
    assert!(rep.feasible);
    assert!((rep.per_attenuator.watts / rep.tone.watts - 100.0).abs() < 1e-9);
    assert!(rep.to_string().contains("readout lines excluded"));

    let m10 = BudgetSpec { band_hz: 100e6, ..b };
    assert!(!system_feasibility(&m10, n, &lat, &r).unwrap().feasible);

    let empty = system_feasibility(&b, 0, &LatticeSpec::for_qubits(0), &r).unwrap();
    assert!(empty.feasible && empty.layout.total == 0);

    let m1 = BudgetSpec { band_hz: 10e6, ..b };
    let lat = LatticeSpec { rows: 4, cols: 4 };
    let rep = system_feasibility(&m1, 16, &lat, &r).unwrap();
    assert_eq!(rep.scheme, Scheme::Traditional);
    assert_eq!(rep.layout, rep.traditional);
}

#[test]
fn report_round_trips_through_json() {
    let lat = LatticeSpec { rows: 10, cols: 10 };
    let rep = system_feasibility(&BudgetSpec::reference(), 100, &lat, &SharingRules::default()).unwrap();
    let back: FeasibilityReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
    assert!((rep.reduction_ratio - 7.0).abs() < 1e-12);
}
