use casimir_core::analysis::{
    compare, consistent_by_containment, excluded_by_count, fit_parabola, GradientSeries, TheoryCurve,
    TheoryErrorConfig,
};
use casimir_core::force::BetaTable;
use casimir_core::optics::PermittivityModel;
use casimir_core::units::NM;
use proptest::prelude::*;

proptest! {
    #[test]
    fn permittivity_falls_along_the_imaginary_axis(lo in 1e12f64..1e17, factor in 1.001f64..100.0) {
        for model in [PermittivityModel::gold_drude(), PermittivityModel::gold_plasma()] {
            let a = model.eval(lo).unwrap();
            let b = model.eval(lo * factor).unwrap();
            prop_assert!(b < a, "ε({}) = {b} not below ε({lo}) = {a}", lo * factor);
            prop_assert!(b > 1.0);
        }
    }

    #[test]
    fn plasma_permittivity_exceeds_drude(xi in 1e11f64..1e17) {
        let drude = PermittivityModel::gold_drude().eval(xi).unwrap();
        let plasma = PermittivityModel::gold_plasma().eval(xi).unwrap();
        prop_assert!(plasma >= drude);
    }

    #[test]
    fn voltage_offset_moves_only_the_apex(
        gamma in 1e2f64..1e5,
        v0 in -0.1f64..0.1,
        offset in -0.5f64..0.5,
        base in -50.0f64..50.0,
    ) {
        let voltages: Vec<f64> = (0..21).map(|i| -0.3 + 0.03 * i as f64).collect();
        let shifts: Vec<f64> = voltages.iter().map(|v| -gamma * (v - v0).powi(2) + base).collect();
        let moved: Vec<f64> = voltages.iter().map(|v| v + offset).collect();
        let a = fit_parabola(0.0, &voltages, &shifts).unwrap();
        let b = fit_parabola(0.0, &moved, &shifts).unwrap();
        prop_assert!((b.v0 - a.v0 - offset).abs() < 1e-9);
        prop_assert!((b.gamma / a.gamma - 1.0).abs() < 1e-9);
        prop_assert!((b.apex - a.apex).abs() < 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn count_rule_and_containment_rule_agree(n in 1usize..5000, frac in 0.0f64..=1.0, percent in 0u32..=100) {
        let outside = ((n as f64) * frac).round() as usize;
        prop_assert_eq!(
            excluded_by_count(outside, n, percent),
            !consistent_by_containment(n - outside, n, percent)
        );
    }

    #[test]
    fn pchip_keeps_monotone_knots_monotone(
        steps in prop::collection::vec((1.0f64..50.0, 0.0f64..0.2), 3..10),
        probes in prop::collection::vec(0.0f64..1.0, 2..40),
    ) {
        let mut knots = Vec::with_capacity(steps.len());
        let (mut a, mut v) = (200.0 * NM, -0.1);
        for (da, dv) in &steps {
            knots.push((a, v));
            a += da * NM;
            v += dv;
        }
        let table = BetaTable::new(&knots, "property").unwrap();
        let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
        let mut xs: Vec<f64> = probes.iter().map(|t| lo + t * (hi - lo)).collect();
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            let (b0, _) = table.eval(w[0]);
            let (b1, _) = table.eval(w[1]);
            prop_assert!(b1 >= b0 - 1e-15, "β({}) = {b1} below β({}) = {b0}", w[1], w[0]);
        }
    }
}

fn synthetic(scale: f64, noise: &[f64]) -> (GradientSeries, Vec<TheoryCurve>) {
    let separations: Vec<f64> = (0..noise.len()).map(|i| (300.0 + i as f64) * NM).collect();
    let curve = |shift: f64| -> Vec<f64> {
        separations.iter().map(|a| scale * (-1e-3 * (400.0 * NM / a).powi(4) + shift)).collect()
    };
    let truth = curve(0.0);
    let series = GradientSeries {
        label: "synthetic".into(),
        mean: truth.iter().zip(noise).map(|(t, e)| t + scale * 1e-5 * e).collect(),
        random: vec![scale * 0.7e-5; noise.len()],
        systematic: vec![scale * 0.7e-5; noise.len()],
        total: vec![scale * 1e-5; noise.len()],
        counts: vec![4; noise.len()],
        separations: separations.clone(),
        warnings: Vec::new(),
    };
    let theories = vec![
        TheoryCurve::new("near", separations.clone(), curve(1e-6)),
        TheoryCurve::new("far", separations.clone(), curve(3e-5)),
    ];
    (series, theories)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn verdicts_do_not_depend_on_the_unit_of_force(
        noise in prop::collection::vec(-2.0f64..2.0, 250),
        scale in prop_oneof![Just(1e-3), Just(7.0), Just(1e6)],
    ) {
        let errors = TheoryErrorConfig::new(0.005, 0.5 * NM);
        let (s1, t1) = synthetic(1.0, &noise);
        let (s2, t2) = synthetic(scale, &noise);
        let r1 = compare(&s1, &t1, &errors, None, 33).unwrap();
        let r2 = compare(&s2, &t2, &errors, None, 33).unwrap();
        for (m1, m2) in r1.models.iter().zip(&r2.models) {
            let v1: Vec<_> = m1.windows.iter().map(|w| (w.outside, w.verdict)).collect();
            let v2: Vec<_> = m2.windows.iter().map(|w| (w.outside, w.verdict)).collect();
            prop_assert_eq!(v1, v2);
        }
    }
}
