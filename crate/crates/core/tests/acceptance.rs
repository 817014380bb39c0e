//! Acceptance run: one PASS/FAIL line per criterion, findings indented below.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};
use rmdf::cli::run_cli;
use rmdf::consistency::{compute_hyperperiod, compute_tick, repetition_vector};
use rmdf::liveness::{check_liveness, ModeSequence};
use rmdf::models;
use rmdf::sim::{Event, SimTrace};
use rmdf::timing::{max_wcets, timing_table, Horizon, TimingTable};
use rmdf::Rational;
use serde_json::Value;

use common::{dag_seed, props, r};

type Check = Result<Vec<String>, String>;
type Criterion = (&'static str, u64, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .display()
        .to_string()
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("rmdf").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err))
}

fn json_rational(v: &Value) -> Option<Rational> {
    let num = v.get("num")?.as_i64()?;
    let den = v.get("den")?.as_i64()?;
    Rational::new(num, den).ok()
}

fn tick_derivation() -> Check {
    let g = models::ingenuity();
    ensure!(compute_tick(&g) == Ok(r(1, 3)), "tick is {:?}", compute_tick(&g));
    let (code, out) = cli(&["analyze", &model("ingenuity.rmdf"), "--format", "json"]);
    ensure!(code == 0, "analyze exited {code}");
    let report: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    ensure!(report["schema_version"] == 1, "missing schema version");
    ensure!(json_rational(&report["tick"]) == Some(r(1, 3)), "json tick {}", report["tick"]);
    ensure!(report["tick"]["decimal"].is_string(), "tick lacks a decimal rendering");
    Ok(vec![format!("tick {} ms", r(1, 3))])
}

fn deadlock_reproduction() -> Check {
    let g = models::ingenuity().with_initial_tokens("c6", Rational::zero()).unwrap();
    let report = check_liveness(&g, &ModeSequence::AllModes).map_err(|e| e.to_string())?;
    let (scenario, d) = report.first_deadlock().ok_or("no deadlock found")?;
    ensure!(d.tick == 99, "tick {}", d.tick);
    ensure!(d.actor == "Navigation Filter" && d.job == 17, "{} job {}", d.actor, d.job);
    ensure!(d.channel.as_deref() == Some("c6"), "channel {:?}", d.channel);
    ensure!(d.deficit == Some(r(1, 50)), "deficit {:?}", d.deficit);
    let (code, out) = cli(&["analyze", &model("ingenuity.rmdf"), "--set-init", "c6=0"]);
    ensure!(code == 3, "analyze exited {code}");
    ensure!(
        out.contains("deadlock: tick 99, Navigation Filter job 17, channel c6"),
        "report lacks the deadlock line:\n{out}"
    );
    Ok(vec![format!(
        "{scenario}: tick 99 ({} ms), {} job {} blocked, deficit 1/50 on c6",
        d.time, d.blocked, d.blocked_job
    )])
}

fn liveness_consistency() -> Check {
    let g = models::ingenuity();
    let rv = repetition_vector(&g, None).map_err(|e| e.to_string())?;
    for m in ["search", "base"] {
        repetition_vector(&g, Some(m)).map_err(|e| format!("mode {m}: {e}"))?;
    }
    let report = check_liveness(&g, &ModeSequence::AllModes).map_err(|e| e.to_string())?;
    ensure!(report.is_live(), "deadlock {:?}", report.first_deadlock());
    let (code, _) = cli(&["analyze", &model("ingenuity.rmdf")]);
    ensure!(code == 0, "analyze exited {code}");
    Ok(vec![format!(
        "{} scenarios live over {} ticks; Camera {} jobs, IMU {} jobs per iteration",
        report.scenarios.len(),
        report.ticks,
        rv.get("Camera").unwrap(),
        rv.get("IMU").unwrap()
    )])
}

struct Rows<'a>(&'a TimingTable);

impl Rows<'_> {
    fn release(&self, a: &str, n: u64) -> Result<Rational, String> {
        Ok(self.0.get(a, n).ok_or(format!("no row {a} {n}"))?.release.clone())
    }

    fn deadline(&self, a: &str, n: u64) -> Result<Rational, String> {
        self.0
            .get(a, n)
            .and_then(|j| j.deadline.clone())
            .ok_or(format!("no deadline {a} {n}"))
    }

    fn window(&self, a: &str, n: u64) -> Result<Rational, String> {
        self.0
            .get(a, n)
            .and_then(|j| j.window.clone())
            .ok_or(format!("no window {a} {n}"))
    }

    fn expect(&self, what: &str, a: &str, n: u64, expected: Rational) -> Result<(), String> {
        let found = match what {
            "release" => self.release(a, n)?,
            "deadline" => self.deadline(a, n)?,
            _ => self.window(a, n)?,
        };
        ensure!(found == expected, "{a} job {n} {what}: {found}, expected {expected}");
        Ok(())
    }
}

fn two(n: u64) -> Rational {
    Rational::from(2 * (n - 1))
}

fn timing_rows() -> Check {
    let g = models::ingenuity();
    let table = timing_table(&g, &Horizon::Hyperperiod).map_err(|e| e.to_string())?;
    let t = Rows(&table);
    ensure!(table.hyperperiod == r(200, 1), "hyperperiod {}", table.hyperperiod);

    for n in 1..=100 {
        t.expect("release", "IMU", n, two(n))?;
        t.expect("deadline", "IMU", n, &r(9, 5) + &two(n))?;
        t.expect("deadline", "Navigation Filter", n, &r(12, 5) + &two(n))?;
        t.expect("deadline", "State Propagation", n, &r(13, 5) + &two(n))?;
        t.expect("release", "IMU-Correction", n, &r(3, 25) + &two(n))?;
        t.expect("deadline", "IMU-Correction", n, &r(2, 1) + &two(n))?;
        t.expect("release", "NC-IMU-Integration", n, &r(6, 25) + &two(n))?;
        t.expect("deadline", "NC-IMU-Integration", n, &r(11, 5) + &two(n))?;
        t.expect("release", "FC-IMU-Integration", n, &r(6, 25) + &two(n))?;
        t.expect("deadline", "FC-IMU-Integration", n, &r(12, 5) + &two(n))?;
        t.expect("window", "Waypoints", n, r(2, 1))?;
    }
    for n in 1..=10 {
        t.expect("window", "Altimeter", n, r(11, 5))?;
    }
    let cycles: [(&str, [Rational; 3]); 8] = [
        ("Camera", [r(6, 5), r(28, 15), r(8, 15)]),
        ("Feature Detection", [r(32, 25), r(146, 75), r(46, 75)]),
        ("Label Decider", [r(34, 25), r(152, 75), r(52, 75)]),
        ("Feature Tracking", [r(36, 25), r(158, 75), r(58, 75)]),
        ("Filtering Procedure", [r(38, 25), r(164, 75), r(64, 75)]),
        ("Pseudo Landmarks", [r(41, 25), r(173, 75), r(73, 75)]),
        ("Controlled Joiner", [r(7, 5), r(31, 15), r(11, 15)]),
        ("Feature Match", [r(8, 5), r(34, 15), r(14, 15)]),
    ];
    for (a, windows) in &cycles {
        for n in 1..=6u64 {
            t.expect("window", a, n, windows[((n - 1) % 3) as usize].clone())?;
        }
    }
    let vision_releases: [(&str, i64, i64); 8] = [
        ("Camera", 0, 1),
        ("Feature Detection", 9, 75),
        ("Label Decider", 18, 75),
        ("Controlled Splitter", 27, 75),
        ("Feature Tracking", 27, 75),
        ("Filtering Procedure", 36, 75),
        ("Pseudo Landmarks", 27, 75),
        ("Controlled Joiner", 9, 15),
    ];
    for (a, num, den) in vision_releases {
        for n in 1..=6u64 {
            let expected = &r(num, den) + &(&r(100, 3) * &Rational::from(n - 1));
            t.expect("release", a, n, expected)?;
        }
    }
    t.expect("release", "Feature Detection", 1, r(3, 25))?;
    t.expect("deadline", "Label Decider", 1, r(8, 5))?;
    t.expect("deadline", "Feature Match", 1, r(11, 5))?;
    t.expect("release", "Feature Match", 1, r(3, 5))?;
    for a in ["Filtering Procedure", "Pseudo Landmarks", "Controlled Joiner"] {
        for (n, d) in [(1, 2), (2, 36), (3, 68)] {
            t.expect("deadline", a, n, r(d, 1))?;
        }
    }
    t.expect("release", "Navigation Filter", 1, r(18, 25))?;
    t.expect("release", "Navigation Filter", 2, r(59, 25))?;
    t.expect("release", "Navigation Filter", 34, r(5054, 75))?;
    t.expect("release", "State Propagation", 1, r(21, 25))?;
    t.expect("release", "State Propagation", 34, r(5063, 75))?;

    let mut findings = Vec::new();
    for (a, jobs) in [
        ("Control Altitude", 25),
        ("Control Yaw 1", 25),
        ("Control Translation", 25),
        ("Control Yaw 2", 25),
        ("Motors", 100),
    ] {
        let longer = timing_table(&g, &Horizon::PerActor([(a.to_string(), 2 * jobs)].into())).map_err(|e| e.to_string())?;
        let l = Rows(&longer);
        for n in 1..=jobs {
            let shifted = &l.release(a, n)? + &r(200, 1);
            ensure!(l.release(a, n + jobs)? == shifted, "{a} release not periodic at job {n}");
        }
    }
    let control: [(&str, u64, Rational, Rational); 6] = [
        ("Control Altitude", 1, r(24, 25), r(14, 5)),
        ("Control Altitude", 2, r(43, 5), &r(14, 5) + &r(8, 1)),
        ("Control Yaw 1", 9, r(5072, 75), &r(24, 5) + &r(64, 1)),
        ("Control Translation", 13, r(2524, 25), &r(34, 5) + &r(96, 1)),
        ("Control Yaw 2", 21, r(12572, 75), &r(44, 5) + &r(160, 1)),
        ("Motors", 34, r(5081, 75), r(69, 1)),
    ];
    for (a, n, rel, dl) in control {
        let (fr, fd) = (t.release(a, n)?, t.deadline(a, n)?);
        if fr != rel || fd != dl {
            findings.push(format!("{a} job {n}: release {fr}, deadline {fd}; closed form gives {rel}, {dl}"));
        }
    }
    findings.push(format!(
        "State Propagation job 2 release {} = 12/25 + 2(n-1); the printed otherwise-case 62/25 + 2(n-1) gives 112/25",
        t.release("State Propagation", 2)?
    ));
    findings.push(format!(
        "Motors job 2 deadline {} = 3 + 2(n-1), next activation; the printed 1 + 2(n-1) equals the release",
        t.deadline("Motors", 2)?
    ));
    findings.push(format!(
        "Control Altitude and Control Translation windows {} and {}; the printed \"11/5 = 1.2 ms\" has 11/5 = 2.2",
        t.window("Control Altitude", 2)?,
        t.window("Control Altitude", 1)?
    ));
    let (cam, fd) = (t.window("Camera", 2)?, t.window("Feature Detection", 1)?);
    findings.push(format!(
        "Camera job 2 window {cam} = {} (printed 25/15 next to 1.87); Feature Detection job 1 window {fd} = {} (printed 1.96)",
        cam.to_decimal(2),
        fd.to_decimal(2)
    ));
    Ok(findings)
}

fn close(computed: f64, printed: f64) -> bool {
    (computed - printed).abs() <= 0.01 + 1e-9
}

fn feasibility_table() -> Check {
    let g = models::ingenuity();
    let report = max_wcets(&g).map_err(|e| e.to_string())?;
    let bound = |a: &str| -> Result<Rational, String> {
        report
            .entry(a)
            .and_then(|e| e.min_window.clone())
            .ok_or(format!("no bound for {a}"))
    };
    let printed = [
        ("Camera", 0.53),
        ("Feature Detection", 0.61),
        ("Label Decider", 0.70),
        ("Feature Tracking", 0.78),
        ("Filtering Procedure", 0.85),
        ("Pseudo Landmarks", 0.97),
        ("Feature Match", 0.93),
        ("Navigation Filter", 1.01),
        ("IMU-Correction", 1.88),
        ("NC-IMU-Integration", 1.96),
        ("FC-IMU-Integration", 2.16),
        ("IMU", 1.8),
        ("Altimeter", 2.2),
        ("State Propagation", 1.09),
        ("Waypoints", 2.0),
    ];
    for (a, ms) in printed {
        let b = bound(a)?.to_f64();
        ensure!(close(b, ms), "{a}: {b:.4} vs {ms}");
    }
    let exact = [
        ("Camera", r(8, 15)),
        ("Feature Detection", r(46, 75)),
        ("Label Decider", r(52, 75)),
        ("Feature Tracking", r(58, 75)),
        ("Filtering Procedure", r(64, 75)),
        ("Pseudo Landmarks", r(73, 75)),
        ("Feature Match", r(14, 15)),
        ("Navigation Filter", r(76, 75)),
        ("IMU-Correction", r(47, 25)),
        ("NC-IMU-Integration", r(49, 25)),
        ("FC-IMU-Integration", r(54, 25)),
        ("IMU", r(9, 5)),
        ("Altimeter", r(11, 5)),
        ("State Propagation", r(82, 75)),
        ("Waypoints", r(2, 1)),
        ("Controlled Splitter", r(43, 75)),
        ("Controlled Joiner", r(11, 15)),
    ];
    for (a, v) in &exact {
        ensure!(bound(a)? == *v, "{a}: {} vs {v}", bound(a)?);
    }
    ensure!(report.pass, "bundled WCETs should fit");
    let mut findings = Vec::new();
    for (a, ms) in [
        ("Control Altitude", 1.2),
        ("Control Yaw 1", 1.17),
        ("Control Translation", 1.2),
        ("Control Yaw 2", 1.17),
        ("Motors", 1.25),
    ] {
        let b = bound(a)?;
        if !close(b.to_f64(), ms) {
            findings.push(format!("{a}: computed {b} ({}) vs printed {ms}", b.to_decimal(2)));
        }
    }
    let (code, _) = cli(&["feasibility", &model("ingenuity.rmdf"), "--set-wcet", "Camera=3/5"]);
    ensure!(code == 4, "a 3/5 ms camera should fail feasibility, exit {code}");
    Ok(findings)
}

fn discards(trace: &SimTrace) -> Vec<(u64, u64)> {
    trace
        .discards()
        .filter_map(|e| match e {
            Event::TokenDiscard {
                got, last_accepted, ..
            } => Some((*got, *last_accepted)),
            _ => None,
        })
        .collect()
}

fn anomaly_replay() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let naive = dir.path().join("naive.json");
    let lexi = dir.path().join("rmdf.json");
    let spec = model("ingenuity.rmdf");
    let scn = model("flight6.scn");
    let (code, out) = cli(&["simulate", &spec, "--scenario", &scn, "--trace", naive.to_str().unwrap()]);
    ensure!(code == 5, "naive joiner run exited {code}: {out}");
    let trace = SimTrace::from_json(&std::fs::read_to_string(&naive).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(discards(&trace) == vec![(2, 3)], "discards {:?}", discards(&trace));
    ensure!(
        trace.arrivals("Feature Match", "cj_fm") == vec![1, 3, 2, 4],
        "arrivals {:?}",
        trace.arrivals("Feature Match", "cj_fm")
    );
    trace.check_conservation()?;

    let (code, out) = cli(&[
        "simulate",
        &spec,
        "--scenario",
        &scn,
        "--joiner",
        "rmdf",
        "--trace",
        lexi.to_str().unwrap(),
    ]);
    ensure!(code == 0, "lexicographic joiner run exited {code}: {out}");
    let trace = SimTrace::from_json(&std::fs::read_to_string(&lexi).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(trace.discard_count() == 0, "unexpected discards");
    ensure!(trace.arrivals("Feature Match", "cj_fm") == vec![1, 2, 3, 4], "frames out of order");
    Ok(vec!["naive: Feature Match sees tags 1, 3, 2, 4 and discards 2; lexicographic: 1, 2, 3, 4".into()])
}

fn show<T: std::fmt::Debug>(e: proptest::test_runner::TestError<T>) -> String {
    format!("{e}")
}

fn property_suites() -> Check {
    let mut notes = Vec::new();
    let mut run = |name: &str, f: &dyn Fn(&mut TestRunner) -> Result<(), String>| -> Result<(), String> {
        let start = Instant::now();
        let mut runner = TestRunner::new(Config {
            cases: 64,
            failure_persistence: None,
            ..Config::default()
        });
        f(&mut runner).map_err(|e| format!("{name}: {e}"))?;
        let took = start.elapsed();
        ensure!(took < Duration::from_secs(30), "{name} took {took:?}");
        notes.push(format!("{name}: 64 cases in {:.2} s", took.as_secs_f64()));
        Ok(())
    };
    run("hyperperiod restoration", &|t| {
        t.run(&dag_seed(8), |s| props::restoration(&s)).map_err(show)
    })?;
    run("token conservation", &|t| {
        t.run(&(dag_seed(8), props::sim_setup()), |(s, setup)| {
            let g = s.graph(true);
            props::trace_invariants(&g, &setup.config(&g))
        })
        .map_err(show)
    })?;
    run("round-trip", &|t| t.run(&common::any_graph(), |g| props::round_trip(&g)).map_err(show))?;
    run("timing periodicity", &|t| {
        t.run(&dag_seed(8), |s| props::periodicity(&s)).map_err(show)
    })?;
    run("repetition vector oracle", &|t| {
        t.run(&(dag_seed(8), proptest::option::of(0usize..12)), |(s, p)| props::repetition_oracle(&s, p))
            .map_err(show)
    })?;
    let g = models::ingenuity();
    let h = compute_hyperperiod(&g).map_err(|e| e.to_string())?;
    ensure!(h.length == r(200, 1), "Ingenuity hyperperiod {}", h.length);
    Ok(notes)
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("tick derivation", 1, tick_derivation),
        ("deadlock reproduction", 5, deadlock_reproduction),
        ("liveness and consistency", 5, liveness_consistency),
        ("timing table", 10, timing_rows),
        ("feasibility table", 10, feasibility_table),
        ("anomaly replay", 5, anomaly_replay),
        ("property suites", 150, property_suites),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed().as_secs_f64();
        let result = match result {
            Ok(_) if took > *budget as f64 => Err(format!("took {took:.2} s, budget {budget} s")),
            other => other,
        };
        match result {
            Ok(notes) => {
                println!("criterion {}: PASS  {name} ({took:.2} s)", i + 1);
                for n in notes {
                    println!("    {n}");
                }
            }
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({took:.2} s): {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
