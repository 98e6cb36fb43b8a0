mod common;

use nvmdp::dp::{policy_evaluation, value_iteration};
use nvmdp::envs::random_nvmdp;
use nvmdp::qlearn::{Selector, TargetFunction, TensorSlice};
use nvmdp::{Policy, TimeTable};
use proptest::prelude::*;

fn selector() -> impl Strategy<Value = Selector> {
    prop_oneof![
        Just(Selector::MaxOfFirst),
        Just(Selector::Averaged),
        Just(Selector::Maxmin),
        Just(Selector::PtMxm),
        (0.01f64..=1.0, 0.0f64..=1.0).prop_map(|(lambda, eta)| Selector::WtAvg { lambda, eta }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn periodic_tables_repeat(period in 1usize..7, horizon in 1usize..40, t in 0usize..40) {
        let layers: Vec<Vec<f64>> = (0..period).map(|k| vec![k as f64]).collect();
        let table = TimeTable::periodic(layers, horizon);
        prop_assume!(t < horizon);
        prop_assert_eq!(table.layer(t)[0], (t % period) as f64);
    }

    #[test]
    fn selectors_return_the_constant_of_a_constant_slice(
        sel in selector(), na in 1usize..5, n in 1usize..7, l in 1usize..7, c in -1e3f64..1e3,
    ) {
        let data = vec![c; na * n * l];
        let slice = TensorSlice::new(&data, na, n, l).unwrap();
        for i in 0..n {
            prop_assert_eq!(sel.target(&slice, i), c);
        }
    }

    #[test]
    fn selectors_do_not_expand_distances(
        sel in selector(), na in 1usize..4, n in 1usize..5, l in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let len = na * n * l;
        let a: Vec<f64> = (0..len).map(|_| r.random_range(-50.0..50.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + r.random_range(-1.0..1.0)).collect();
        let dist = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let sa = TensorSlice::new(&a, na, n, l).unwrap();
        let sb = TensorSlice::new(&b, na, n, l).unwrap();
        for i in 0..n {
            let gap = (sel.target(&sa, i) - sel.target(&sb, i)).abs();
            prop_assert!(gap <= dist + 1e-12, "gap {} dist {}", gap, dist);
        }
    }

    #[test]
    fn random_models_are_well_formed(seed in any::<u64>(), ns in 1usize..5, na in 1usize..4, h in 1usize..6) {
        let mut r = common::rng(seed);
        let m = random_nvmdp::<f64, _>(&mut r, ns, na, h, 1.2).unwrap();
        for t in 0..h {
            for s in 0..ns {
                for a in 0..na {
                    let sum: f64 = m.transition_row(t, s, a).iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                    for s2 in 0..ns {
                        let g = m.discount(t, s, a, s2);
                        prop_assert!((0.0..=1.2).contains(&g));
                        if t + 1 == h {
                            prop_assert_eq!(g, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn values_respect_the_value_bound_and_vanish_at_the_horizon(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let m = random_nvmdp::<f64, _>(&mut r, 3, 2, 5, 1.2).unwrap();
        let opt = value_iteration(&m);
        let uni = policy_evaluation(&m, &Policy::uniform(5, 3, 2)).unwrap();
        let bound = m.value_bound() + 1e-9;
        for s in 0..3 {
            prop_assert_eq!(opt.v.get(5, s), 0.0);
            for t in 0..5 {
                prop_assert!(opt.v.get(t, s).abs() <= bound);
                prop_assert!(uni.v.get(t, s) <= opt.v.get(t, s) + 1e-9);
            }
        }
    }

    #[test]
    fn enumeration_agrees_with_backward_induction(seed in any::<u64>()) {
        let m = common::small_model(seed);
        let mut r = common::rng(seed ^ 1);
        let pi = common::random_policy(&mut r, &m);
        let v = policy_evaluation(&m, &pi).unwrap().v;
        for s in 0..m.num_states() {
            prop_assert!((v.get(0, s) - common::enumerate_value(&m, &pi, 0, s)).abs() < 1e-9);
        }
    }
}
