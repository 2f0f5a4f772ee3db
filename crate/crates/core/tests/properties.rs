mod support;

use std::collections::BTreeSet;

use flowunits::bundled;
use flowunits::graph::ConstraintExpr;
use flowunits::netsim::{oracle_run, simulate, Bandwidth, NetworkCondition};
use flowunits::planner::{partition_into_flowunits, plan, JobSpec, Strategy};
use flowunits::topology::satisfies;
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

#[test]
fn partition_matches_connected_components() {
    let mut rng = support::rng(0xF10);
    for _ in 0..200 {
        let g = support::random_dag(&mut rng);
        let units = partition_into_flowunits(&g);
        let got: BTreeSet<BTreeSet<usize>> = units.iter().map(|u| u.members.iter().copied().collect()).collect();
        assert_eq!(got, support::same_layer_components(&g), "{}", g.to_canonical_json());
        for u in &units {
            assert!(u.members.iter().all(|&m| g.operator(m).layer.as_str() == u.layer));
        }
    }
}

#[test]
fn satisfies_matches_truth_table() {
    let mut rng = support::rng(0xCAB);
    let (mut hits, mut misses) = (0, 0);
    for _ in 0..1000 {
        let (caps, c) = support::random_host_constraint(&mut rng);
        let want = support::truth_table_satisfies(&support::predicate_bits(&caps, &c));
        assert_eq!(satisfies(&caps, &c), want, "{caps:?} {c}");
        let reparsed = ConstraintExpr::parse(&c.to_string()).unwrap();
        assert_eq!(satisfies(&caps, &reparsed), want, "{c}");
        if want { hits += 1 } else { misses += 1 }
    }
    assert!(hits > 50 && misses > 50, "{hits} {misses}");
}

#[test]
fn coverage_is_disjoint_per_depth() {
    let mut rng = support::rng(0x7EE);
    for _ in 0..100 {
        let t = support::random_tree(&mut rng);
        assert!(support::coverage_is_partition(&t), "{}", t.to_json());
    }
}

#[test]
fn tree_paths_are_shortest_and_symmetric() {
    let mut rng = support::rng(0x9A7);
    for _ in 0..50 {
        let t = support::random_tree(&mut rng);
        for a in t.zones() {
            for b in t.zones() {
                let p = t.tree_path(&a.id, &b.id).unwrap();
                assert_eq!(p.first(), Some(&a.id));
                assert_eq!(p.last(), Some(&b.id));
                let mut back = t.tree_path(&b.id, &a.id).unwrap();
                back.reverse();
                assert_eq!(p, back);
                let distinct: BTreeSet<_> = p.iter().collect();
                assert_eq!(distinct.len(), p.len());
            }
        }
    }
}

fn condition() -> impl proptest::strategy::Strategy<Value = NetworkCondition> {
    let bw = prop_oneof![Just(Bandwidth::Unlimited), (1u32..2000).prop_map(|m| Bandwidth::Mbps(m as f64))];
    (bw, 0u32..200).prop_map(|(b, l)| NetworkCondition::new(b, l as f64))
}

fn locations() -> impl proptest::strategy::Strategy<Value = BTreeSet<String>> {
    proptest::sample::subsequence(vec!["L1", "L2", "L3", "L4"], 1..=4)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_matches_oracle(
        cond in condition(),
        locs in locations(),
        events in 0u64..600,
        seed in any::<u64>(),
        window in 1u64..20,
        baseline in any::<bool>(),
    ) {
        let t = bundled::topology("continuum").unwrap();
        let g = bundled::continuum_v1(window).unwrap();
        let strategy = if baseline { Strategy::Baseline } else { Strategy::FlowUnits };
        let job = JobSpec::new(g.clone(), locs, strategy).with_workload(events, seed);
        let p = plan(&job, &t).unwrap();
        let run = simulate(&p, &t, &cond, &job).unwrap();
        prop_assert_eq!(run.output, oracle_run(&g, &job));
    }

    #[test]
    fn flowunits_never_sends_more_bytes(cond in condition(), locs in locations(), seed in any::<u64>()) {
        let t = bundled::topology("continuum").unwrap();
        let g = bundled::continuum_v1(10).unwrap();
        let run = |s| {
            let job = JobSpec::new(g.clone(), locs.clone(), s).with_workload(300, seed);
            simulate(&plan(&job, &t).unwrap(), &t, &cond, &job).unwrap().report
        };
        let (fu, bl) = (run(Strategy::FlowUnits), run(Strategy::Baseline));
        for (link, s) in &fu.links {
            prop_assert!(s.bytes <= bl.links[link].bytes, "{}", link);
        }
    }

    #[test]
    fn plans_route_along_the_tree(locs in locations(), baseline in any::<bool>()) {
        let t = bundled::topology("acme").unwrap();
        let strategy = if baseline { Strategy::Baseline } else { Strategy::FlowUnits };
        let job = JobSpec::new(bundled::acme_v1(10).unwrap(), locs, strategy);
        let p = plan(&job, &t).unwrap();
        for c in &p.channels {
            let from = p.instance(c.from).unwrap();
            let to = p.instance(c.to).unwrap();
            prop_assert_eq!(&c.path, &t.tree_path(&from.zone, &to.zone).unwrap());
        }
    }
}
