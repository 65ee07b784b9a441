mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{
    all_sequences, canonical_state_count, concrete_mismatches, load, model_path, models_dir,
    random_complete_table, random_fsc, random_pomdp, rng, BUNDLED,
};
use fsc_distill::belief::SolveOptions;
use fsc_distill::learner::LearnOptions;
use fsc_distill::{
    apply_base, apply_h1, apply_h2, cutoff_strategies, explore, induce_mc, learn_with, minimize,
    resolve_dont_care, run, solve, value, BeliefTeacher, Choice, DontCarePolicy, ExploreOptions,
    Fsc, Heuristic, Mode, NodeKind, Objective, ObsSeq, OutputSymbol, RunConfig, StrategyTable,
    TableTeacher, Teacher,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn criterion_1_running_example() -> Outcome {
    let start = Instant::now();
    let p = load("running-example");
    let table = StrategyTable::from_csv(
        &std::fs::read_to_string(models_dir().join("running-example-table.csv")).unwrap(),
        &p,
    )
    .map_err(|e| e.to_string())?;
    let teacher = TableTeacher::new(&table, &p);
    let learned = learn_with(&teacher, &LearnOptions::default()).map_err(|e| e.to_string())?;
    check(teacher.equivalence_query(&learned.fsc).is_none(), "final equivalence query found a counterexample")?;
    check(learned.fsc.num_nodes() <= 2, format!("{} nodes", learned.fsc.num_nodes()))?;
    let o = |n: &str| p.observation_by_name(n).unwrap();
    let a = |n: &str| OutputSymbol::action(p.action_by_name(n).unwrap());
    for (seq, expected) in [
        (vec![o("i")], a("s")),
        (vec![o("i"), o("b")], a("r")),
        (vec![o("i"), o("y")], a("d")),
    ] {
        let got = learned.fsc.run(&ObsSeq::new(seq.clone())).unwrap();
        check(got == &expected, format!("wrong output on {seq:?}: {got:?}"))?;
    }
    let fsc = resolve_dont_care(&apply_h2(&learned.fsc), &p);
    let reach = Objective::parse("maxprob:g", &p).unwrap();
    let steps = Objective::parse("minreward:g", &p).unwrap();
    let mc = induce_mc(&p, &fsc, &reach.targets, DontCarePolicy::Reject).map_err(|e| e.to_string())?;
    let v = value(&mc, &reach).unwrap().value;
    let e = value(&mc, &steps).unwrap().value;
    // each cell needs its remaining moves, two tries per move on average
    let closed_form = 1.0 + 0.25 * (4.0 + 2.0 + 2.0 + 0.0);
    check((v - 1.0).abs() <= 1e-8, format!("MaxProb {v}"))?;
    check((e - closed_form).abs() <= 1e-6, format!("expected moves {e}"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("{} node(s), Pmax={v:.9}, E[moves]={e:.6}, {elapsed:.2?}", learned.fsc.num_nodes()))
}

fn criterion_2_learner_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut largest = 0;
    for k in 0..200 {
        let p = random_pomdp(&mut r, 8);
        let table = random_complete_table(&mut r, &p, 5);
        let teacher = TableTeacher::new(&table, &p);
        let learned = learn_with(&teacher, &LearnOptions::default()).map_err(|e| e.to_string())?;
        for (seq, out) in table.rows() {
            check(
                learned.fsc.run(seq).is_some_and(|o| o.matches(out)),
                format!("instance {k}: row {:?} not reproduced", seq.as_slice()),
            )?;
        }
        let canonical = canonical_state_count(&table, p.num_observations(), 5);
        check(
            learned.fsc.num_nodes() <= canonical,
            format!("instance {k}: {} nodes > canonical {canonical}", learned.fsc.num_nodes()),
        )?;
        largest = largest.max(learned.fsc.num_nodes());
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("200 instances, largest controller {largest} nodes, {elapsed:.2?}"))
}

fn criterion_3_base_preservation() -> Outcome {
    let start = Instant::now();
    let mut checked = Vec::new();
    for name in BUNDLED {
        let p = load(name);
        for query in ["maxprob", "minreward"] {
            let obj = Objective::parse(query, &p).unwrap();
            let m = explore(&p, &obj, &ExploreOptions { max_beliefs: 500, ..Default::default() })
                .map_err(|e| e.to_string())?;
            if m.num_cutoffs() > 0 {
                continue;
            }
            let cutoffs = cutoff_strategies(&p);
            let st = solve(&p, &m, &obj, &cutoffs, &SolveOptions::default()).map_err(|e| e.to_string())?;
            let teacher = BeliefTeacher::new(&p, &m, &st);
            let learned = learn_with(&teacher, &LearnOptions::default()).map_err(|e| e.to_string())?;
            let f = resolve_dont_care(&apply_base(&learned.fsc, &cutoffs).unwrap(), &p);
            let mc = induce_mc(&p, &f, &obj.targets, DontCarePolicy::Reject).map_err(|e| e.to_string())?;
            let v = value(&mc, &obj).unwrap().value;
            let same = (v.is_infinite() && st.value().is_infinite()) || (v - st.value()).abs() <= 1e-6;
            check(same, format!("{name} {query}: controller {v} vs belief {}", st.value()))?;
            checked.push(format!("{name}/{query}"));
        }
    }
    let elapsed = start.elapsed();
    check(!checked.is_empty(), "no bundled model explored fully")?;
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:.2?}", checked.join(", ")))
}

fn criterion_4_minimization_soundness() -> Outcome {
    let mut r = rng(4);
    for k in 0..150 {
        let nodes = r.gen_range(1..=10);
        let f = random_fsc(&mut r, nodes, 3, 3, 0.5);
        let m = minimize(&f);
        let bad = concrete_mismatches(&f, &m, 8);
        check(bad.is_empty(), format!("minimize instance {k} changed {:?}", bad.first()))?;
        let with_chi = f.map_outputs(|_, _, o| match o {
            OutputSymbol::DontCare if r.gen_bool(0.3) => OutputSymbol::DontKnow(0),
            _ => o.clone(),
        });
        let h = apply_h2(&with_chi);
        for seq in all_sequences(3, 8) {
            let before = with_chi.run(&seq).unwrap();
            if let OutputSymbol::Actions(_) = before {
                check(h.run(&seq).unwrap().matches(before), format!("H2 instance {k} changed {:?}", seq.as_slice()))?;
            }
        }
        for n in 0..h.num_nodes() {
            for z in 0..3 {
                match h.output(n, z) {
                    OutputSymbol::Actions(d) => check(d.as_dirac().is_some(), "H2 introduced randomization")?,
                    OutputSymbol::DontKnow(_) => return Err("H2 left a don't-know output".into()),
                    OutputSymbol::DontCare => {}
                }
            }
        }
    }
    Ok("150 random controllers replayed to depth 8".into())
}

fn criterion_5_h1_formula() -> Outcome {
    // observation 0: actions 0,0,1 plus a χ; observation 1: only χ outputs
    let act = OutputSymbol::action;
    let chi = OutputSymbol::DontKnow;
    let gamma = vec![
        vec![act(0), chi(0)],
        vec![act(0), chi(1)],
        vec![act(1), OutputSymbol::DontCare],
        vec![chi(2), chi(0)],
    ];
    let delta = vec![vec![1, 2], vec![2, 3], vec![3, 0], vec![0, 1]];
    let f = Fsc::new(2, gamma, delta, 0).unwrap();
    let h = apply_h1(&f);
    let expected = fsc_distill::Distribution::new([(0, 2.0 / 3.0), (1, 1.0 / 3.0)]).unwrap();
    check(h.output(3, 0) == &OutputSymbol::Actions(expected), format!("got {:?}", h.output(3, 0)))?;
    for n in [0, 1, 3] {
        check(h.output(n, 1) == f.output(n, 1), "χ with #(o)=0 was replaced")?;
    }

    // a randomized concrete output counts by probability mass
    let half = fsc_distill::Distribution::new([(0, 0.5), (2, 0.5)]).unwrap();
    let g = Fsc::new(
        1,
        vec![vec![OutputSymbol::Actions(half)], vec![act(2)], vec![chi(0)]],
        vec![vec![1], vec![2], vec![0]],
        0,
    )
    .unwrap();
    let expected = fsc_distill::Distribution::new([(0, 0.25), (2, 0.75)]).unwrap();
    check(apply_h1(&g).output(2, 0) == &OutputSymbol::Actions(expected), "mass-weighted counts")?;
    Ok("replaced χ equals #(o,a)/#(o); χ with #(o)=0 kept".into())
}

fn criterion_6_size_reduction() -> Outcome {
    let p = load("grid-avoid-4");
    let obj = Objective::parse("maxprob:goal", &p).unwrap();
    let m = explore(&p, &obj, &ExploreOptions::default()).map_err(|e| e.to_string())?;
    let st = solve(&p, &m, &obj, &cutoff_strategies(&p), &SolveOptions::default()).map_err(|e| e.to_string())?;
    let belief_mc = m.strategy_reachable(&st).len();
    let teacher = BeliefTeacher::new(&p, &m, &st);
    let learned = learn_with(&teacher, &LearnOptions::default()).map_err(|e| e.to_string())?;
    let nodes = learned.fsc.num_nodes();

    // the strategy: place, then right three times, then down forever
    let name = |b: usize| match st.choice(b) {
        Choice::Action(a) => p.action_name(a).to_string(),
        other => format!("{other:?}"),
    };
    let mut by_depth: Vec<std::collections::BTreeSet<String>> = vec![Default::default(); 8];
    for b in m.strategy_reachable(&st) {
        let node = m.node(b);
        if node.kind == NodeKind::Explored && node.depth < 8 {
            by_depth[node.depth].insert(name(b));
        }
    }
    let plan = ["place", "r", "r", "r", "d", "d", "d", "d"];
    for (d, want) in plan.iter().enumerate() {
        check(
            by_depth[d].iter().all(|a| a == want),
            format!("depth {d}: strategy plays {:?}", by_depth[d]),
        )?;
    }
    let ratio = belief_mc as f64 / nodes as f64;
    check(nodes == 5, format!("learned controller has {nodes} nodes"))?;
    check(ratio >= 2.0, format!("ratio {ratio:.2}"))?;
    Ok(format!("belief MC {belief_mc} states / controller {nodes} nodes = {ratio:.2}"))
}

fn config(model: &str, objective: &str, heuristic: Heuristic) -> RunConfig {
    RunConfig {
        model: model_path(model),
        objective: Some(objective.to_string()),
        mode: Mode::Belief,
        heuristic,
        max_beliefs: 500,
        ..Default::default()
    }
}

fn criterion_7_portfolio() -> Outcome {
    let mut runs = 0;
    for name in BUNDLED {
        for query in ["maxprob", "minprob", "maxreward", "minreward"] {
            let portfolio = run(&config(name, query, Heuristic::Portfolio)).map_err(|e| e.to_string())?;
            let kind = Objective::parse(query, &portfolio.pomdp).unwrap().kind;
            let singles: Vec<f64> = [Heuristic::Base, Heuristic::H1, Heuristic::H2]
                .into_iter()
                .map(|h| run(&config(name, query, h)).map(|o| o.report.value))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let best = singles
                .iter()
                .copied()
                .reduce(|a, b| if kind.better(b, a) { b } else { a })
                .unwrap();
            let v = portfolio.report.value;
            check(v == best, format!("{name} {query}: portfolio {v} vs best {best}"))?;
            check(!kind.better(singles[0], v), format!("{name} {query}: portfolio below base"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} model/objective pairs"))
}

fn criterion_8_determinism() -> Outcome {
    let mut compared = 0;
    for name in BUNDLED {
        let outputs: Vec<Vec<Vec<u8>>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let mut cfg = config(name, "maxprob", Heuristic::Portfolio);
                cfg.fsc_out = Some(dir.path().join("fsc.json"));
                cfg.dot_out = Some(dir.path().join("fsc.dot"));
                cfg.report_out = Some(dir.path().join("report.json"));
                cfg.episodes = 200;
                cfg.seed = 9;
                run(&cfg).map_err(|e| e.to_string())?;
                Ok(["fsc.json", "fsc.dot", "report.json"]
                    .iter()
                    .map(|f| std::fs::read(dir.path().join(f)).unwrap())
                    .collect())
            })
            .collect::<Result<_, String>>()?;
        for (k, file) in ["fsc.json", "fsc.dot", "report.json"].iter().enumerate() {
            check(outputs[0][k] == outputs[1][k], format!("{name}: {file} differs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} artifact pairs byte-identical"))
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("running example end-to-end", criterion_1_running_example),
        ("learner exactness", criterion_2_learner_exactness),
        ("base-mode value preservation", criterion_3_base_preservation),
        ("minimization soundness", criterion_4_minimization_soundness),
        ("H1 formula", criterion_5_h1_formula),
        ("size reduction", criterion_6_size_reduction),
        ("portfolio dominance", criterion_7_portfolio),
        ("determinism", criterion_8_determinism),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL {name}: {detail}", k + 1);
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
