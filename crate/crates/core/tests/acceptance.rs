//! Acceptance criteria 1-10. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use combinefl::combiner::{
    run_combination, synthetic_complementary_corpus, CvStrategy, FaultScores, RankModel,
    TimeLevelPreset,
};
use combinefl::harness::pipeline::{correlation_matrix, standalone};
use combinefl::harness::{
    build_report, emit_report, load_corpus, run_pipeline, score_corpus, Granularity,
    PipelineConfig, ReportFormat,
};
use combinefl::mbfl::{metallaxis_mutant_score, muse_mutant_score};
use combinefl::metrics::{e_inspect, r_squared, CorrelationInput, EInspect};
use combinefl::minilang::{parse, run, run_suite, TestCase, Value};
use combinefl::model::{rank_elements, rank_over_universe, ProgramElement, ScoredList};
use combinefl::predswitch::find_critical_predicates;
use combinefl::sbfl::{dstar, ochiai};
use combinefl::slicing::backward_slice;
use combinefl::technique::{Family, Technique};

type Outcome = Result<String, String>;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rational(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Mean 1-based position of the first faulty slot over every placement of
/// `t_f` faulty elements among `t` tied slots, offset by `p_start`.
fn enumerate_e_inspect(t: u32, t_f: u32, p_start: u64) -> BigRational {
    let (mut total, mut count) = (BigRational::from_integer(0.into()), 0u64);
    for mask in 0u32..(1 << t) {
        if mask.count_ones() == t_f {
            total += rational(p_start + u64::from(mask.trailing_zeros()));
            count += 1;
        }
    }
    total / rational(count)
}

fn criterion_1() -> Outcome {
    let mut cases = 0;
    for p_start in [1u64, 5] {
        for t in 1..=8u32 {
            for t_f in 1..=t {
                // p_start - 1 strictly better correct elements, then one tie-group of t.
                let mut entries: Vec<(ProgramElement, f64)> = (0..p_start - 1)
                    .map(|i| (ProgramElement::new("above.ml", i as u32 + 1, 0), 2.0 + i as f64))
                    .collect();
                let tied: Vec<ProgramElement> =
                    (0..t).map(|i| ProgramElement::new("tie.ml", i + 1, 0)).collect();
                entries.extend(tied.iter().map(|e| (e.clone(), 1.0)));
                let faulty: BTreeSet<ProgramElement> = tied.iter().take(t_f as usize).cloned().collect();
                let ranking = rank_elements(&ScoredList::new("x", entries).unwrap());
                let closed = e_inspect(&ranking, &faulty).map_err(|e| e.to_string())?;
                let brute = enumerate_e_inspect(t, t_f, p_start);
                check(closed.as_ratio() == &brute, || {
                    format!("t={t} t_f={t_f} P_start={p_start}: closed form {closed} vs enumeration {brute}")
                })?;
                if t_f == 1 {
                    let average = rational(p_start) + BigRational::new(BigInt::from(t - 1), BigInt::from(2));
                    check(brute == average, || format!("average rank reduction fails at t={t}"))?;
                }
                if t_f == t {
                    check(brute == rational(p_start), || format!("t_f = t reduction fails at t={t}"))?;
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (t, t_f, P_start) cases equal exactly, both reductions hold"))
}

fn criterion_2() -> Outcome {
    // Hand-evaluated: 2/sqrt(6), 3^2/(1+1), 2 - (4/8)*1, 1/sqrt(2*(1+3)).
    const OCHIAI: f64 = 0.816_496_580_927_726;
    const DSTAR: f64 = 4.5;
    const MUSE: f64 = 1.5;
    const METALLAXIS: f64 = 0.353_553_390_593_273_8;
    let got = [
        ("Ochiai(2,1,0,5)", ochiai(2, 1, 0, 5), OCHIAI),
        ("DStar(3,1,1)", dstar(3, 1, 1, 0, 2), DSTAR),
        ("MUSE(2,1,4,8)", muse_mutant_score(2, 1, 4, 8), MUSE),
        ("Metallaxis(1,3,2)", metallaxis_mutant_score(1, 3, 2), METALLAXIS),
    ];
    for (name, value, expected) in got {
        check((value - expected).abs() <= 1e-12, || format!("{name} = {value}, expected {expected}"))?;
    }
    Ok("4 micro-cases within 1e-12".into())
}

fn criterion_3() -> Outcome {
    // Listing line k sits on file line k + 1 below the `fn` header.
    let src = "fn collatz(x) {\n  var res;\n  if ((x % 2) == 0)\n    res = x / 2;\n  else\n    res = x * 3 + 1;\n  return res;\n}\n";
    let program = parse(src).map_err(|e| e.to_string())?;
    let trace = run(&program, &TestCase::new("x3", "collatz", vec![Value::Int(3)], Some(Value::Int(10))));
    let criterion = trace
        .events
        .iter()
        .rposition(|e| e.element.line == 7)
        .ok_or("line 6 never executed")?;
    let listing: BTreeSet<u32> = backward_slice(&trace, criterion)
        .members
        .iter()
        .map(|e| e.line - 1)
        .collect();
    check(listing.contains(&5), || format!("slice {listing:?} lacks line 5"))?;
    check(!listing.contains(&3), || format!("slice {listing:?} contains line 3"))?;
    Ok(format!("slice from line 6 with x=3 covers listing lines {listing:?}"))
}

fn criterion_4() -> Outcome {
    // Seeded bug on line 3: `<` should be `<=`.
    let src = "fn grade(score) {\n  var g = 0;\n  if (score < 50) {\n    g = 1;\n  }\n  var i = 0;\n  while (i < 3) {\n    i = i + 1;\n  }\n  return g;\n}\n";
    let program = parse(src).map_err(|e| e.to_string())?;
    let test = TestCase::new("at_boundary", "grade", vec![Value::Int(50)], Some(Value::Int(1)));
    let original = run(&program, &test);
    check(!original.passed(), || "seeded test unexpectedly passes".into())?;
    let found = find_critical_predicates(&program, &test);
    let expected: BTreeSet<ProgramElement> = [ProgramElement::new("program.ml", 3, 0)].into();
    check(found.elements == expected, || format!("critical set {:?}", found.elements))?;
    check(found.reexecutions == original.predicate_instances.len(), || {
        format!(
            "{} re-executions for {} predicate instances",
            found.reexecutions,
            original.predicate_instances.len()
        )
    })?;
    Ok(format!(
        "critical set = {{line 3}}, {} re-executions = {} dynamic instances",
        found.reexecutions,
        original.predicate_instances.len()
    ))
}

fn criterion_5() -> Outcome {
    let corpus = load_corpus(&corpus_dir()).map_err(|e| e.to_string())?;
    check(corpus.len() == 10, || format!("{} programs in corpus", corpus.len()))?;
    let (mut within, mut qualifying) = (0, 0);
    let mut misses = Vec::new();
    for fault in &corpus {
        let program = fault.program().map_err(|e| e.to_string())?;
        let suite = fault.suite.as_ref().ok_or("corpus fault without tests")?;
        check(suite.tests.len() >= 5, || format!("{}: {} tests", fault.id, suite.tests.len()))?;
        let elements = program.elements();
        let faulty = fault.ground_truth(&elements).map_err(|e| e.to_string())?;
        check(faulty.len() == 1, || format!("{}: {} faulty statements", fault.id, faulty.len()))?;
        let traces = run_suite(&program, suite);

        // Brute-force spectrum straight from per-test coverage.
        let mut counts: BTreeMap<&ProgramElement, (u32, u32)> = elements.iter().map(|e| (e, (0, 0))).collect();
        let mut total_failed = 0;
        for tr in &traces {
            if !tr.passed() {
                total_failed += 1;
            }
            for e in &tr.covered {
                let c = counts.get_mut(e).ok_or("coverage outside the program")?;
                if tr.passed() {
                    c.1 += 1;
                } else {
                    c.0 += 1;
                }
            }
        }
        check(total_failed > 0, || format!("{}: no failing test", fault.id))?;

        let scores = score_corpus(std::slice::from_ref(fault), &[], &[Family::Sbfl], None)
            .map_err(|e| e.to_string())?;
        let ochiai_list = &scores.faults[0].scores[Technique::Ochiai.id()];
        let (values, _) = standalone(&scores.faults, Technique::Ochiai.id()).map_err(|e| e.to_string())?;
        if values[0].within(3) {
            within += 1;
        } else {
            misses.push(format!("{}={}", fault.id, values[0].to_f64()));
        }

        // Qualifying: the bug has maximal e_f and, among those, minimal e_p.
        let bug = faulty.iter().next().unwrap();
        let (ef, ep) = counts[bug];
        let max_ef = counts.values().map(|c| c.0).max().unwrap();
        let min_ep = counts.values().filter(|c| c.0 == max_ef).map(|c| c.1).min().unwrap();
        if ef == max_ef && ep == min_ep {
            qualifying += 1;
            let ranking = rank_over_universe(ochiai_list, &scores.faults[0].universe);
            let top = &ranking.groups()[0].elements;
            check(top.contains(bug), || format!("{}: qualifying bug {bug} is not in the top tie-group", fault.id))?;
        }
    }
    check(within >= 8, || format!("only {within}/10 within E_inspect 3 (misses: {misses:?})"))?;
    Ok(format!(
        "{within}/10 with E_inspect <= 3 (misses {misses:?}); {qualifying} qualify under the brute-force spectrum and all rank top"
    ))
}

fn at1(values: &[EInspect]) -> usize {
    values.iter().filter(|v| v.within(1)).count()
}

fn criterion_6() -> Outcome {
    let techniques = vec!["synthetic_a".to_string(), "synthetic_b".to_string()];
    let mut good = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..20u64 {
        let faults = synthetic_complementary_corpus(40, 30, seed);
        let combined = run_combination(&techniques, &faults, CvStrategy::Kfold, 10, seed)
            .map_err(|e| e.to_string())?;
        let combined_at1 = combined.iter().filter(|o| o.e_inspect.within(1)).count();
        let mut best = 0;
        for t in &techniques {
            let (values, _) = standalone(&faults, t).map_err(|e| e.to_string())?;
            best = best.max(at1(&values));
        }
        let ratio = combined_at1 as f64 / best.max(1) as f64;
        worst = worst.min(ratio);
        if ratio >= 1.5 {
            good += 1;
        }
    }
    check(good >= 19, || format!("ratio >= 1.5 on {good}/20 seeds (worst {worst:.3})"))?;
    Ok(format!("combined@1 >= 1.5x best standalone on {good}/20 seeds (worst ratio {worst:.3})"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth = [1.0, 2.0, -1.0];
    let mut pairs = Vec::new();
    while pairs.len() < 200 {
        let a: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let margin: f64 = truth.iter().zip(a.iter().zip(&b)).map(|(w, (x, y))| w * (x - y)).sum();
        if margin >= 0.5 {
            pairs.push((a, b));
        } else if margin <= -0.5 {
            pairs.push((b, a));
        }
    }
    let names: Vec<String> = ["f1", "f2", "f3"].iter().map(|s| s.to_string()).collect();
    let model = RankModel::train(names.clone(), &pairs, 7);
    let violated = model.violations(&pairs);
    check(violated == 0, || format!("{violated} violated constraints after training"))?;

    let features = combinefl::combiner::FeatureMatrix {
        techniques: names,
        elements: (0..50).map(|i| ProgramElement::new("p.ml", i + 1, 0)).collect(),
        rows: (0..50).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect(),
    };
    let top = |m: &RankModel| -> Result<Vec<ProgramElement>, String> {
        let scored = m.predict(&features).map_err(|e| e.to_string())?;
        Ok(rank_elements(&scored).groups()[0].elements.clone())
    };
    let reference = top(&model)?;
    for c in [0.001, 0.5, 2.0, 3.0, 7.25, 1000.0] {
        let mut scaled = model.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= c);
        let got = top(&scaled)?;
        check(got == reference, || format!("argmax changed under scale {c}"))?;
    }
    Ok(format!("0/{} constraints violated; argmax stable under 6 positive scales", pairs.len()))
}

/// Least squares via the normal equations on raw sums; r² = 1 - SSE/SST.
fn least_squares_r2(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (sx, sy) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let sse: f64 = pairs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let sst: f64 = pairs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    1.0 - sse / sst
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..40).map(|_| rng.gen_range(1.0..60.0)).collect();
    let r2 = |pairs: Vec<(f64, f64)>| r_squared(&CorrelationInput::new(pairs)).map(|c| c.r2).map_err(|e| e.to_string());

    let same = r2(xs.iter().map(|&x| (x, x)).collect())?;
    check(same == 1.0, || format!("r2(X,X) = {same}"))?;
    let line = r2(xs.iter().map(|&x| (x, 2.0 * x + 1.0)).collect())?;
    check((line - 1.0).abs() <= 1e-12, || format!("r2 for y=2x+1 is {line}"))?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let pairs: Vec<(f64, f64)> = (0..30)
            .map(|_| {
                let x = rng.gen_range(1.0..90.0);
                (x, 0.3 * x + rng.gen_range(-20.0..20.0))
            })
            .map(|(x, y): (f64, f64)| (x, y.abs() + 1.0))
            .collect();
        let ours = r2(pairs.clone())?;
        worst = worst.max((ours - least_squares_r2(&pairs)).abs());
    }
    check(worst <= 1e-9, || format!("largest deviation from least squares {worst:e}"))?;

    let names: Vec<String> = (0..5).map(|i| format!("t{i}")).collect();
    let values: BTreeMap<String, Vec<f64>> = names
        .iter()
        .map(|n| (n.clone(), (0..25).map(|_| rng.gen_range(1.0..50.0)).collect()))
        .collect();
    let m = correlation_matrix(&names, &values);
    for i in 0..names.len() {
        for j in 0..names.len() {
            check(m.cells[i][j] == m.cells[j][i], || format!("cell ({i},{j}) differs from ({j},{i})"))?;
        }
    }
    Ok(format!("r2(X,X)=1, |r2(2x+1)-1|={:.1e}, max oracle deviation {worst:.1e}, matrix symmetric", (line - 1.0).abs()))
}

fn criterion_9() -> Outcome {
    for pair in TimeLevelPreset::ALL.windows(2) {
        let (lo, hi) = (pair[0].technique_ids(), pair[1].technique_ids());
        let lo_set: BTreeSet<_> = lo.iter().collect();
        let hi_set: BTreeSet<_> = hi.iter().collect();
        check(lo_set.is_subset(&hi_set) && lo_set.len() < hi_set.len(), || {
            format!("{} is not a strict subset of {}", pair[0], pair[1])
        })?;
    }

    let corpus = load_corpus(&corpus_dir()).map_err(|e| e.to_string())?;
    let full = score_corpus(&corpus, &[], &Family::ALL, Some(2)).map_err(|e| e.to_string())?;
    let config = PipelineConfig {
        seed: 9,
        ..PipelineConfig::default()
    };
    let report = build_report(&full.faults, &config).map_err(|e| e.to_string())?;
    let names: Vec<&str> = report.ablation.iter().map(|r| r.name.as_str()).collect();
    let expected: Vec<String> = Family::ALL.iter().map(|f| format!("-{}", f.name())).collect();
    check(names == expected, || format!("ablation rows {names:?}"))?;

    let baseline: BTreeMap<&str, _> = report.standalone.iter().map(|r| (r.name.as_str(), r)).collect();
    for family in Family::ALL {
        let rest: Vec<Family> = Family::ALL.iter().copied().filter(|f| *f != family).collect();
        let partial = score_corpus(&corpus, &[], &rest, Some(2)).map_err(|e| e.to_string())?;
        for (a, b) in full.faults.iter().zip(&partial.faults) {
            for (t, list) in &b.scores {
                check(a.scores.get(t) == Some(list), || format!("{t} on {} changed without {}", a.id, family.name()))?;
            }
            let dropped = family.techniques();
            check(dropped.iter().all(|t| !b.scores.contains_key(t.id())), || format!("{} still scored", family.name()))?;
        }
        let stripped: Vec<FaultScores> = full
            .faults
            .iter()
            .map(|f| {
                let mut f = f.clone();
                f.scores.retain(|t, _| t.parse::<Technique>().map(|t| t.family() != family).unwrap_or(true));
                f
            })
            .collect();
        for t in stripped[0].scores.keys() {
            let row = combinefl::harness::pipeline::standalone_row(&stripped, t).map_err(|e| e.to_string())?;
            check(baseline.get(t.as_str()) == Some(&&row), || format!("standalone {t} changed without {}", family.name()))?;
        }
    }
    Ok(format!("levels nest strictly; {} ablation rows; other families unchanged under each removal", names.len()))
}

fn criterion_10() -> Outcome {
    let mut outputs = Vec::new();
    for workers in [Some(1), Some(3)] {
        let config = PipelineConfig {
            preset: TimeLevelPreset::new(4).unwrap(),
            granularity: Granularity::Statement,
            seed: 10,
            workers,
            ..PipelineConfig::default()
        };
        let mut report = run_pipeline(&corpus_dir(), &[], &config).map_err(|e| e.to_string())?;
        report.mask_timing();
        let json = emit_report(&report, ReportFormat::Json).map_err(|e| e.to_string())?;
        let text = emit_report(&report, ReportFormat::Text).map_err(|e| e.to_string())?;
        outputs.push((json, text));
    }
    let again = {
        let config = PipelineConfig {
            seed: 10,
            workers: Some(1),
            ..PipelineConfig::default()
        };
        let mut report = run_pipeline(&corpus_dir(), &[], &config).map_err(|e| e.to_string())?;
        report.mask_timing();
        emit_report(&report, ReportFormat::Json).map_err(|e| e.to_string())?
    };
    check(outputs[0] == outputs[1], || "reports differ between worker counts".into())?;
    check(outputs[0].0 == again, || "reports differ between identical runs".into())?;
    Ok(format!("3 runs, {} JSON bytes identical", again.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("E_inspect closed form equals enumeration", criterion_1),
        ("formula micro-cases", criterion_2),
        ("Collatz dynamic slice", criterion_3),
        ("predicate switching soundness", criterion_4),
        ("seeded-bug corpus, Ochiai", criterion_5),
        ("combination beats best standalone", criterion_6),
        ("rank learning sanity", criterion_7),
        ("correlation", criterion_8),
        ("preset nesting and ablation isolation", criterion_9),
        ("pipeline determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS  criterion {:>2}  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {:>2}  {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
