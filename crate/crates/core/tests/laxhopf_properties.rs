use proptest::prelude::*;
use signalflow_core::laxhopf::{evaluate_moskowitz, ConditionKind, LinkConditions, LinkDomain, ValueCondition};
use signalflow_core::FundamentalDiagram;

const HORIZON: f64 = 300.0;
const TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
struct Case {
    dom: LinkDomain,
    vc: LinkConditions,
}

fn boundary(kind: ConditionKind, rates: &[f64], cap: f64) -> ValueCondition {
    let mut c = ValueCondition::boundary_origin(kind);
    let dt = HORIZON / rates.len() as f64;
    for r in rates {
        c.extend_by_rate(dt, r * cap).unwrap();
    }
    c
}

fn case() -> impl Strategy<Value = Case> {
    (
        any::<bool>(),
        200.0..1000.0f64,
        prop::collection::vec(0.0..1.0f64, 1..4),
        prop::option::of(prop::collection::vec(0.0..1.0f64, 1..6)),
        prop::option::of(prop::collection::vec(0.0..1.0f64, 1..6)),
    )
        .prop_map(|(tri, length, dens, up, down)| {
            let fd = if tri {
                FundamentalDiagram::reference_triangular()
            } else {
                FundamentalDiagram::reference_greenshields()
            };
            let dom = LinkDomain::new(0.0, length, HORIZON, fd).unwrap();
            let seg = length / dens.len() as f64;
            let segments: Vec<(f64, f64)> = dens
                .iter()
                .enumerate()
                .map(|(i, d)| (i as f64 * seg, d * fd.jam_density()))
                .collect();
            let initial = ValueCondition::initial_from_densities(&dom, &segments).unwrap();
            let cap = fd.capacity();
            let up = up.map(|r| boundary(ConditionKind::Upstream, &r, cap));
            let down = down.map(|r| boundary(ConditionKind::Downstream, &r, cap));
            let vc = LinkConditions::new(&dom, initial, up, down).unwrap();
            Case { dom, vc }
        })
}

fn n(c: &Case, t: f64, x: f64) -> f64 {
    evaluate_moskowitz(&c.dom, &c.vc, t, x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_are_monotone_with_bounded_slopes(c in case(), ft in 0.0..0.95f64, fx in 0.0..0.95f64) {
        let fd = c.dom.fd;
        let (t, x) = (ft * HORIZON, fx * c.dom.length());
        let (dt, dx) = (0.05 * HORIZON, 0.05 * c.dom.length());
        let here = n(&c, t, x);
        let later = n(&c, t + dt, x);
        let further = n(&c, t, x + dx);
        // 0 ≤ flow ≤ C and 0 ≤ density ≤ ρj
        prop_assert!(later >= here - TOL);
        prop_assert!(later - here <= fd.capacity() * dt + TOL);
        prop_assert!(further <= here + TOL);
        prop_assert!(here - further <= fd.jam_density() * dx + TOL);
    }

    #[test]
    fn solution_never_exceeds_its_conditions(c in case(), ft in 0.0..1.0f64, fx in 0.0..1.0f64) {
        let t = ft * HORIZON;
        let x = fx * c.dom.length();
        prop_assert!(n(&c, 0.0, x) <= c.vc.initial.eval(x).unwrap() + TOL);
        if let Some(up) = &c.vc.upstream {
            prop_assert!(n(&c, t, 0.0) <= up.eval(t).unwrap() + TOL);
        }
        if let Some(down) = &c.vc.downstream {
            prop_assert!(n(&c, t, c.dom.length()) <= down.eval(t).unwrap() + TOL);
        }
    }

    #[test]
    fn extra_conditions_only_lower_counts(c in case(), ft in 0.0..1.0f64, fx in 0.0..1.0f64) {
        let (t, x) = (ft * HORIZON, fx * c.dom.length());
        let bare = LinkConditions::new(&c.dom, c.vc.initial.clone(), None, None).unwrap();
        let full = n(&c, t, x);
        prop_assert!(full <= evaluate_moskowitz(&c.dom, &bare, t, x).unwrap() + TOL);
    }

    #[test]
    fn shifting_conditions_moves_counts_by_at_most_the_shift(
        c in case(),
        eps in 0.0..5.0f64,
        which in 0usize..3,
        ft in 0.0..1.0f64,
        fx in 0.0..1.0f64,
    ) {
        let (t, x) = (ft * HORIZON, fx * c.dom.length());
        let base = n(&c, t, x);

        let mut one = c.clone();
        match which {
            0 => one.vc.initial = one.vc.initial.shifted(eps),
            1 => one.vc.upstream = one.vc.upstream.as_ref().map(|u| u.shifted(eps)),
            _ => one.vc.downstream = one.vc.downstream.as_ref().map(|d| d.shifted(eps)),
        }
        let moved = n(&one, t, x);
        prop_assert!(moved >= base - TOL && moved <= base + eps + TOL);

        let mut all = c.clone();
        all.vc.initial = all.vc.initial.shifted(eps);
        all.vc.upstream = all.vc.upstream.as_ref().map(|u| u.shifted(eps));
        all.vc.downstream = all.vc.downstream.as_ref().map(|d| d.shifted(eps));
        prop_assert!((n(&all, t, x) - base - eps).abs() <= TOL);
    }
}
