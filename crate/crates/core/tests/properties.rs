use std::f64::consts::FRAC_PI_8;

use proptest::prelude::*;

use hoods_core::cost::{annuity_factor, line_capex};
use hoods_core::domain::{
    Bus, BusKind, CableSetting, CableType, LineSection, Network, TransformerOption,
};
use hoods_core::grid::{lindistflow_coefficients, octagon_contains, OCTAGON};
use hoods_core::timeseries::{aggregate, fidelity_report, ward_clusters};

fn cable() -> CableType {
    CableType {
        name: "NAYY 4x150".into(),
        r: 0.206,
        x: 0.080,
        s_max: 121.0,
        c_install: 90.0,
        c_material: 10.0,
    }
}

/// A star of `n` chains of length two below the busbar.
fn star(n: usize) -> Network {
    let mut buses = vec![Bus {
        id: "mbb".into(),
        kind: BusKind::Mbb,
        predecessor: None,
    }];
    let mut lines = Vec::new();
    for i in 0..n {
        for (id, pred) in [(format!("j{i}"), "mbb".to_string()), (format!("l{i}"), format!("j{i}"))] {
            lines.push(LineSection {
                from: pred.clone(),
                to: id.clone(),
                length: 40.0 + i as f64,
                cable: "NAYY 4x150".into(),
                existing: CableSetting::I,
            });
            buses.push(Bus {
                id,
                kind: BusKind::Junction,
                predecessor: Some(pred),
            });
        }
    }
    Network {
        buses,
        lines,
        cables: vec![cable()],
        transformers: vec![TransformerOption::frt(400.0)],
    }
}

/// Parent id of every bus, keyed by id.
fn parents(net: &Network) -> Vec<(String, Option<String>)> {
    let topo = net.topology().unwrap();
    let mut out: Vec<_> = (0..net.buses.len())
        .map(|b| {
            let parent = topo.parent_line[b].map(|l| net.buses[topo.line_from[l]].id.clone());
            (net.buses[b].id.clone(), parent)
        })
        .collect();
    out.sort();
    out
}

proptest! {
    #[test]
    fn octagon_lies_between_incircle_and_circumcircle(kappa in 1.0..500.0f64, angle in 0.0..std::f64::consts::TAU, r in 0.0..1.5f64) {
        let (p, q) = (r * kappa * angle.cos(), r * kappa * angle.sin());
        if r < FRAC_PI_8.cos() * (1.0 - 1e-9) {
            prop_assert!(octagon_contains(p, q, kappa, 0.0));
        }
        if r > 1.0 + 1e-9 {
            prop_assert!(!octagon_contains(p, q, kappa, 0.0));
        }
    }

    #[test]
    fn octagon_vertices_sit_on_the_circle(j in 0usize..8, kappa in 1.0..500.0f64) {
        let t = j as f64 * std::f64::consts::FRAC_PI_4;
        let (p, q) = (kappa * t.cos(), kappa * t.sin());
        let tight = OCTAGON.iter().filter(|&&(a, b, c)| (a * p + b * q - c * kappa).abs() <= 1e-9 * kappa).count();
        prop_assert_eq!(tight, 2);
        prop_assert!(octagon_contains(p, q, kappa, 1e-9 * kappa));
    }

    #[test]
    fn annuity_repays_present_value(wacc in 0.001..0.2f64, life in 1u32..60) {
        let af = annuity_factor(wacc, f64::from(life)).unwrap();
        let pv: f64 = (1..=life).map(|t| (1.0 + wacc).powi(-(t as i32))).sum();
        prop_assert!((af * pv - 1.0).abs() < 1e-10);
        prop_assert!(af > wacc);
    }

    #[test]
    fn topology_ignores_input_order(n in 1usize..6, seed in any::<u64>()) {
        let net = star(n);
        let mut shuffled = net.clone();
        // Deterministic permutation from the seed.
        let mut s = seed | 1;
        for i in (1..shuffled.buses.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.buses.swap(i, (s % (i as u64 + 1)) as usize);
        }
        shuffled.lines.reverse();
        prop_assert_eq!(parents(&net), parents(&shuffled));
    }

    #[test]
    fn aggregation_conserves_weight_and_peaks(
        values in proptest::collection::vec(0.0..10.0f64, 20 * 24),
        n in 2usize..6,
    ) {
        let other: Vec<f64> = values.iter().rev().copied().collect();
        let red = aggregate(&[values.clone(), other.clone()], &[0, 1], n, 24, 480.0).unwrap();
        prop_assert!((red.grid.total_weight() - 480.0).abs() < 1e-9);
        prop_assert_eq!(red.cardinality.iter().sum::<usize>(), 20);
        prop_assert_eq!(red.assignment.len(), 20);
        prop_assert_eq!(fidelity_report(&values, &red).peak_error, 0.0);
        prop_assert_eq!(fidelity_report(&other, &red).peak_error, 0.0);
    }
}

#[test]
fn two_regime_year_gives_one_week_per_regime() {
    let mut series = Vec::with_capacity(52 * 168);
    for w in 0..52 {
        let level = if w % 2 == 0 { 10.0 } else { 1.0 };
        for h in 0..168 {
            series.push(level + 0.1 * ((w * 31 + h * 7) % 11) as f64 / 11.0);
        }
    }
    let red = aggregate(&[series.clone()], &[], 2, 168, 8736.0).unwrap();
    assert_eq!(red.cardinality, vec![26, 26]);
    let regime = |w: usize| w % 2;
    assert_ne!(regime(red.representatives[0]), regime(red.representatives[1]));
    // Every week belongs to the nearest representative.
    let week = |w: usize| &series[w * 168..(w + 1) * 168];
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    for w in 0..52 {
        let nearest = (0..2)
            .min_by(|&a, &b| {
                dist(week(w), week(red.representatives[a])).total_cmp(&dist(week(w), week(red.representatives[b])))
            })
            .unwrap();
        assert_eq!(red.assignment[w], nearest, "week {w}");
    }
}

#[test]
fn ward_separates_obvious_groups() {
    let pts: Vec<Vec<f64>> = [0.0, 0.1, 0.2, 5.0, 5.1, 9.9, 10.0]
        .iter()
        .map(|&x| vec![x])
        .collect();
    let labels = ward_clusters(&pts, 3);
    assert_eq!(labels, vec![0, 0, 0, 1, 1, 2, 2]);
}

#[test]
fn doubling_a_cable_halves_the_voltage_drop_coefficients() {
    let net = star(1);
    let (p1, q1) = lindistflow_coefficients(&net, 0, CableSetting::I, 400.0).unwrap();
    let (p2, q2) = lindistflow_coefficients(&net, 0, CableSetting::II, 400.0).unwrap();
    assert!((p1 - 2.0 * p2).abs() < 1e-15 && (q1 - 2.0 * q2).abs() < 1e-15);
    // 2·r·km / V² in p.u. of kVA: 2 · 0.206 Ω/km · 0.04 km · 1000 / 400².
    assert!((p1 - 2.0 * 0.206 * 0.04 * 1000.0 / 160_000.0).abs() < 1e-15);
}

#[test]
fn existing_cables_cost_nothing_and_additions_pay_one_trench() {
    let mut net = star(1);
    net.lines[0].existing = CableSetting::II;
    assert_eq!(line_capex(&net, 0, CableSetting::I).unwrap(), 0.0);
    assert_eq!(line_capex(&net, 0, CableSetting::II).unwrap(), 0.0);
    assert!((line_capex(&net, 0, CableSetting::III).unwrap() - 40.0 * (90.0 + 10.0)).abs() < 1e-12);
    assert!((line_capex(&net, 1, CableSetting::III).unwrap() - 40.0 * (90.0 + 2.0 * 10.0)).abs() < 1e-12);
}
