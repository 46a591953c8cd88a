use muxctl_core::leakage::{
    average_leakage, leakage_map, linspace, main_pulse, power_scaling, resonance_lines, spurious,
    Attenuation, LeakageMap, TransitionClass, TransmonSpec,
};

fn spec(levels: usize) -> TransmonSpec {
    TransmonSpec { f01_hz: 5e9, anharmonicity_hz: -200e6, levels }
}

#[test]
fn small_map_is_symmetric_and_repeatable() {
    let s = spec(4);
    let m = main_pulse(&s, 50e-9);
    let ax = linspace(4.7e9, 5.2e9, 4);
    let a = leakage_map(&s, &m, &ax, &ax, Attenuation::None).unwrap();
    let b = leakage_map(&s, &m, &ax, &ax, Attenuation::None).unwrap();
    assert!(a.max_asymmetry() < 1e-9);
    assert_eq!(a, b);
}

#[test]
fn zero_amplitude_tones_change_nothing() {
    let s = spec(5);
    let m = main_pulse(&s, 50e-9);
    let bare = average_leakage(&s, &[m]).unwrap();
    let with = average_leakage(&s, &[m, spurious(&m, 4.8e9, 0.0), spurious(&m, 5.3e9, 0.0)]).unwrap();
    assert_eq!(bare, with);
    assert!(bare < 1e-7);
}

#[test]
fn tone_on_the_12_transition_leaks_strongly() {
    let s = spec(5);
    let m = main_pulse(&s, 50e-9);
    let l = average_leakage(&s, &[m, spurious(&m, 4.8e9, 1.0), spurious(&m, 5.4e9, 1.0)]).unwrap();
    assert!(l >= 0.1, "{l}");
}

#[test]
fn truncation_converges_on_stripes() {
    let (s5, s7) = (spec(5), spec(7));
    let m = main_pulse(&s5, 50e-9);
    for (a, b) in [(4.9e9, 4.9e9), (4.85e9, 4.95e9), (4.6e9, 5.2e9)] {
        let t = [m, spurious(&m, a, 1.0), spurious(&m, b, 1.0)];
        let l5 = average_leakage(&s5, &t).unwrap();
        let l7 = average_leakage(&s7, &t).unwrap();
        assert!((l7 - l5).abs() < 0.1 * l5, "{a} {b}: {l5} vs {l7}");
    }
}

#[test]
fn single_photon_leakage_is_linear_in_power() {
    let s = spec(4);
    let m = main_pulse(&s, 50e-9);
    let p = power_scaling(&s, &m, TransitionClass::SinglePhoton12, &[40.0, 36.0, 32.0, 28.0, 24.0])
        .unwrap();
    assert!((p.slope - 1.0).abs() < 0.05, "{}", p.slope);
}

#[test]
fn power_scaling_refuses_saturated_points() {
    let s = spec(4);
    let m = main_pulse(&s, 50e-9);
    assert!(power_scaling(&s, &m, TransitionClass::SinglePhoton12, &[8.0, 6.0, 4.0, 2.0, 0.0]).is_err());
    assert!(power_scaling(&s, &m, TransitionClass::SinglePhoton12, &[10.0, 0.0]).is_err());
}

fn synthetic(values: impl Fn(f64, f64) -> f64) -> LeakageMap {
    let s = spec(5);
    let ax = linspace(4.5e9, 5.5e9, 21);
    LeakageMap {
        values: ax.iter().map(|&a| ax.iter().map(|&b| values(a, b)).collect()).collect(),
        axis_a_hz: ax.clone(),
        axis_b_hz: ax,
        spec: s,
        main: main_pulse(&s, 50e-9),
        attenuation: Attenuation::None,
    }
}

#[test]
fn stripe_level_reads_the_antidiagonal() {
    // 1e-3 within one grid step of a + b = 9.8 GHz
    let m = synthetic(|a, b| if (a + b - 9.8e9).abs() < 60e6 { 1e-3 } else { 1e-8 });
    let lines = resonance_lines(&m.spec, 3);
    let anti: Vec<_> =
        lines.iter().filter(|l| l.from == 0 && l.to == 2 && l.n_a == 1 && l.n_b == 1).cloned().collect();
    assert_eq!(anti.len(), 1);
    let v = m.stripe_level(&anti, &lines).unwrap();
    assert_eq!(v, 1e-3);
    assert!(m.unexplained_peaks(&lines, 25e6, 10.0, 3).is_empty());
}

#[test]
fn isolated_peak_off_every_line_is_reported() {
    let m = synthetic(|a, b| if a == 4.55e9 && b == 5.05e9 { 1e-2 } else { 1e-8 });
    let lines = resonance_lines(&m.spec, 3);
    assert_eq!(m.unexplained_peaks(&lines, 10e6, 10.0, 3), vec![(1, 11)]);
}
