use muxctl_core::mux::{
    amplitude_scale, effective_tones_at, filter_attenuation_db, validate_plan, FilterTemplate,
    FrequencyPlan, LineModel, LineTone,
};
use proptest::prelude::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("q{k}")).collect()
}

fn plan(spacing: f64, n: usize, sigma: f64) -> FrequencyPlan {
    let names = names(n);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut p = FrequencyPlan::uniform(4.5e9, spacing, spacing * n as f64, &refs).unwrap();
    p.jitter_sigma_hz = sigma;
    p
}

#[test]
fn monte_carlo_matches_gaussian_tail() {
    let p = plan(50e6, 20, 10e6);
    let t = FilterTemplate::Butterworth { bandwidth_hz: 50e6, order: 3 };
    let r = validate_plan(&p, &t, 25e6, 20_000, 42).unwrap();
    // per element 2(1 − Φ(2.5)) = 0.01242
    let per: f64 = 0.012419330651552265;
    let expect = 1.0 - (1.0 - per).powi(20);
    assert!((r.gaussian_estimate - expect).abs() < 1e-9, "{}", r.gaussian_estimate);
    let se = (expect * (1.0 - expect) / 20_000.0).sqrt();
    assert!((r.fraction - expect).abs() < 4.0 * se, "{} vs {expect}", r.fraction);
}

#[test]
fn narrow_spacing_is_infeasible() {
    let p = plan(10e6, 20, 10e6);
    let t = FilterTemplate::Butterworth { bandwidth_hz: 10e6, order: 3 };
    let r = validate_plan(&p, &t, 5e6, 2_000, 7).unwrap();
    assert!(r.fraction > 0.99);
    assert!(r.gaussian_estimate > 0.99);
}

#[test]
fn seeded_runs_repeat() {
    let p = plan(50e6, 8, 15e6);
    let t = FilterTemplate::Butterworth { bandwidth_hz: 50e6, order: 3 };
    let a = validate_plan(&p, &t, 25e6, 5_000, 3).unwrap();
    let b = validate_plan(&p, &t, 25e6, 5_000, 3).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn attenuation_monotone_in_offset_and_order(
        offset in 25e6f64..2e9, extra in 0.0f64..1e9, order in 1u32..12,
    ) {
        let spec = |n| FilterTemplate::Butterworth { bandwidth_hz: 50e6, order: n }.at(5e9);
        let near = filter_attenuation_db(&spec(order), 5e9 + offset).unwrap();
        let far = filter_attenuation_db(&spec(order), 5e9 + offset + extra).unwrap();
        prop_assert!(far >= near);
        let higher = filter_attenuation_db(&spec(order + 1), 5e9 + offset).unwrap();
        prop_assert!(higher >= near);
        let below = filter_attenuation_db(&spec(order), 5e9 - offset).unwrap();
        prop_assert!((below - near).abs() <= 1e-9 * near.max(1.0));
    }

    #[test]
    fn power_and_amplitude_agree(f in 4.0e9f64..6.0e9, order in 1u32..8) {
        let spec = FilterTemplate::Butterworth { bandwidth_hz: 50e6, order }.at(5e9);
        let a = filter_attenuation_db(&spec, f).unwrap();
        let s = amplitude_scale(&spec, f).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((s * s - 10f64.powf(-a / 10.0)).abs() <= 1e-12);
    }

    #[test]
    fn effective_amplitude_is_linear(s in 0.0f64..10.0, f in 4.6e9f64..5.4e9) {
        let p = plan(50e6, 4, 0.0);
        let mk = |amp| LineModel {
            id: "xy".into(),
            elements: names(4),
            template: FilterTemplate::Butterworth { bandwidth_hz: 50e6, order: 3 },
            tones: vec![LineTone { freq_hz: f, amplitude: amp, phase: 0.0 }],
        };
        let one = effective_tones_at("q1", &mk(1.0), &p).unwrap()[0].amplitude;
        let scaled = effective_tones_at("q1", &mk(s), &p).unwrap()[0].amplitude;
        prop_assert!((scaled - s * one).abs() <= 1e-12 * s.max(1.0));
    }
}
