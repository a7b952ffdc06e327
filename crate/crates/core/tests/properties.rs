use galois_csp::extensions::{columns3, is_saturated, saturate, SaturationCheck};
use galois_csp::harness::{generate_over, GenKind, GeneratorConfig};
use galois_csp::reductions::eliminate_unary;
use galois_csp::relation::{make_rd, r_b, Relation};
use galois_csp::solvers::{branch_generic, branch_rd, brute_force, count_models, SolverConfig};
use galois_csp::text::{parse_instance, parse_relation, write_instance, write_relation};
use galois_csp::Instance;
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

fn relation(k: usize, max_arity: usize, max_rows: usize) -> impl Strategy<Value = Relation> {
    (1..=max_arity).prop_flat_map(move |a| {
        btree_set(vec(0..k as u8, a), 0..=max_rows).prop_map(move |rows| Relation::new(k, a, rows).unwrap())
    })
}

fn three_row(k: usize) -> impl Strategy<Value = Relation> {
    relation(k, 6, 3).prop_filter("three rows", |r| r.len() == 3)
}

fn rd_instance(k: usize) -> impl Strategy<Value = Instance> {
    (k + 1..=k + 6, 1..=3usize, any::<u64>(), 0..3usize).prop_map(move |(n, m, seed, kind)| {
        let cfg = GeneratorConfig { k, n, m, degree_bound: None, seed };
        let kind = [GenKind::Uniform, GenKind::Planted, GenKind::Noisy][kind];
        generate_over(&cfg, &[("RD".to_string(), make_rd(k).unwrap())], kind).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relation_text_round_trips(r in relation(3, 5, 8)) {
        let (name, back) = parse_relation(&write_relation("S", &r)).unwrap();
        prop_assert_eq!(name, "S");
        prop_assert_eq!(back, r);
    }

    #[test]
    fn projection_keeps_membership(r in relation(3, 5, 8), keep in vec(0..5usize, 1..4)) {
        let keep: Vec<usize> = keep.into_iter().filter(|&i| i < r.arity()).collect();
        prop_assume!(!keep.is_empty());
        let p = r.project(&keep).unwrap();
        for t in r.tuples() {
            let s: Vec<u8> = keep.iter().map(|&i| t[i]).collect();
            prop_assert!(p.contains(&s));
        }
        prop_assert!(p.len() <= r.len());
    }

    #[test]
    fn redundancy_removal_is_undone_by_projection(r in relation(2, 6, 5)) {
        let (s, map) = r.remove_redundant();
        prop_assert!(!s.has_redundant_columns());
        prop_assert_eq!(s.len(), r.len());
        prop_assert_eq!(s.project(&map).unwrap(), r);
    }

    #[test]
    fn saturation_is_saturated_and_conservative(r in three_row(3)) {
        let (s, map) = saturate(&r).unwrap();
        prop_assert_eq!(is_saturated(&s).unwrap(), SaturationCheck::Saturated);
        prop_assert_eq!(&columns3(&s)[..r.arity()], &columns3(&r)[..]);
        prop_assert_eq!(s.arity(), r.arity() + map.entries.len());
        let (again, more) = saturate(&s).unwrap();
        prop_assert_eq!(again, s);
        prop_assert!(more.entries.is_empty());
    }

    #[test]
    fn instance_text_round_trips(inst in rd_instance(2)) {
        let back = parse_instance(&write_instance(&inst), None).unwrap();
        prop_assert_eq!(back.num_vars(), inst.num_vars());
        prop_assert_eq!(back.constraints().len(), inst.constraints().len());
        prop_assert_eq!(write_instance(&back), write_instance(&inst));
    }

    #[test]
    fn solvers_agree_with_the_oracle(inst in rd_instance(3)) {
        let cfg = SolverConfig::default();
        let oracle = brute_force(&inst, &cfg).unwrap();
        let generic = branch_generic(&inst, &cfg).unwrap();
        let rd = branch_rd(&inst, &cfg).unwrap();
        prop_assert_eq!(oracle.status, generic.status);
        prop_assert_eq!(oracle.status, rd.status);
        for model in [&oracle.model, &generic.model, &rd.model].into_iter().flatten() {
            prop_assert!(inst.is_model(model));
        }
        prop_assert_eq!(count_models(&inst, &cfg).unwrap() > 0, oracle.is_sat());
    }

    #[test]
    fn unary_elimination_keeps_satisfiability(inst in rd_instance(2), masks in vec(1u32..4, 0..4)) {
        let mut inst = inst;
        let n = inst.num_vars();
        for (i, mask) in masks.into_iter().enumerate() {
            let r = galois_csp::relation::unary_relation(2, mask).unwrap();
            let idx = inst.add_relation(galois_csp::relation::unary_name(mask), r).unwrap();
            inst.add_constraint(idx, vec![i % n]).unwrap();
        }
        let out = eliminate_unary(&inst).unwrap();
        let cfg = SolverConfig::default();
        prop_assert_eq!(brute_force(&inst, &cfg).unwrap().status, brute_force(&out.instance, &cfg).unwrap().status);
        prop_assert!(out.instance.num_vars() <= inst.num_vars());
    }
}

#[test]
fn rd_two_is_the_boolean_relation() {
    assert_eq!(make_rd(2).unwrap(), r_b());
}
