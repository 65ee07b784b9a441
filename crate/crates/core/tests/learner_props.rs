mod common;

use common::{canonical_state_count, random_complete_table, random_pomdp, rng};
use fsc_distill::belief::SolveOptions;
use fsc_distill::learner::{Closedness, Consistency, LearnOptions};
use fsc_distill::{
    cutoff_strategies, explore, learn_with, solve, BeliefTeacher, ExploreOptions, LearningTable,
    Objective, TableTeacher, Teacher,
};

#[test]
fn learned_controllers_replay_random_tables() {
    let mut r = rng(31);
    for _ in 0..200 {
        let p = random_pomdp(&mut r, 8);
        let table = random_complete_table(&mut r, &p, 5);
        let teacher = TableTeacher::new(&table, &p);
        let learned = learn_with(&teacher, &LearnOptions::default()).unwrap();
        assert_eq!(teacher.equivalence_query(&learned.fsc), None);
        for (seq, out) in table.rows() {
            assert!(learned.fsc.run(seq).unwrap().matches(out));
            assert!(learned.hypothesis.run(seq).unwrap().matches(out));
        }
        let canonical = canonical_state_count(&table, p.num_observations(), 5);
        assert!(learned.hypothesis.num_nodes() <= canonical);
        assert!(learned.fsc.num_nodes() <= learned.hypothesis.num_nodes());
    }
}

#[test]
fn table_stays_closed_consistent_and_classes_grow() {
    let mut r = rng(32);
    for _ in 0..50 {
        let p = random_pomdp(&mut r, 6);
        let table = random_complete_table(&mut r, &p, 4);
        let teacher = TableTeacher::new(&table, &p);
        let mut t = LearningTable::init(&teacher);
        let mut classes = t.num_classes();
        t.make_closed_and_consistent(&teacher);
        loop {
            assert_eq!(t.is_closed(), Closedness::Closed);
            assert_eq!(t.is_consistent(), Consistency::Consistent);
            assert!(t.num_classes() >= classes);
            classes = t.num_classes();
            let h = t.extract_fsc().unwrap();
            assert_eq!(h.num_nodes(), classes);
            let Some(c) = teacher.equivalence_query(&h) else { break };
            t.process_counterexample(&c, &teacher);
            assert!(t.num_classes() >= classes);
            t.make_closed_and_consistent(&teacher);
        }
        let upper = t.upper_rows();
        for r in upper {
            for prefix in r.prefixes() {
                assert!(upper.contains(&prefix));
            }
        }
        for c in t.columns() {
            for s in c.suffixes() {
                assert!(t.columns().contains(&s));
            }
        }
    }
}

#[test]
fn belief_teacher_accepts_learned_controllers() {
    let mut r = rng(33);
    for _ in 0..100 {
        let p = random_pomdp(&mut r, 7);
        for query in ["maxprob", "minreward"] {
            let obj = Objective::parse(query, &p).unwrap();
            let m = explore(&p, &obj, &ExploreOptions { max_beliefs: 60, ..Default::default() }).unwrap();
            let st = solve(&p, &m, &obj, &cutoff_strategies(&p), &SolveOptions::default()).unwrap();
            let teacher = BeliefTeacher::new(&p, &m, &st);
            let learned = learn_with(&teacher, &LearnOptions::default()).unwrap();
            assert_eq!(teacher.equivalence_query(&learned.fsc), None);
            assert_eq!(teacher.equivalence_query(&learned.hypothesis), None);
        }
    }
}
