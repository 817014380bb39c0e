//! Property bodies, shared by the proptest suites and the acceptance run.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rmdf::consistency::{compute_hyperperiod, repetition_vector, AnalysisError};
use rmdf::liveness::{check_liveness, ModeSequence};
use rmdf::sim::{simulate, Event, ExecTimePolicy, JoinerPolicy, Scheduler, SimConfig, SimTrace};
use rmdf::timing::{timing_table, Horizon};
use rmdf::{parse_model, serialize_model, Graph, Rational};

use super::{normalize, null_space, DagSeed};

pub fn restoration(seed: &DagSeed) -> Result<(), TestCaseError> {
    let g = seed.graph(true);
    let report = check_liveness(&g, &ModeSequence::AllModes).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(report.is_live(), "{:?}", report.first_deadlock());
    for s in &report.scenarios {
        for c in &g.channels {
            prop_assert_eq!(s.final_state.level(&c.id), Some(&c.initial_tokens), "channel {}", &c.id);
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimSetup {
    pub single_core: bool,
    pub bcet: bool,
    pub naive: bool,
    pub horizon: i64,
    pub script: Vec<bool>,
}

pub fn sim_setup() -> impl Strategy<Value = SimSetup> {
    (
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        1i64..=300,
        prop::collection::vec(any::<bool>(), 1..=4),
    )
        .prop_map(|(single_core, bcet, naive, horizon, script)| SimSetup {
            single_core,
            bcet,
            naive,
            horizon,
            script,
        })
}

impl SimSetup {
    pub fn config(&self, g: &Graph) -> SimConfig {
        let mut cfg = SimConfig::new(Rational::from(self.horizon as u64));
        if self.single_core {
            cfg.scheduler = Scheduler::SingleCore {
                priorities: g.actors.iter().enumerate().map(|(i, a)| (a.id.clone(), i as u32)).collect(),
            };
        }
        cfg.exec_time = if self.bcet { ExecTimePolicy::Bcet } else { ExecTimePolicy::Wcet };
        if self.naive {
            cfg.joiner_policy = JoinerPolicy::NaiveFirstArrival;
        }
        for a in g.actors.iter().filter(|a| a.kind == rmdf::ActorKind::ModeDecider) {
            let modes: Vec<String> = self
                .script
                .iter()
                .map(|b| g.modes.modes[usize::from(*b) % g.modes.modes.len()].name.clone())
                .collect();
            cfg.mode_script.insert(a.id.clone(), modes);
        }
        cfg
    }
}

fn executing_intervals(trace: &SimTrace) -> Vec<(Rational, Rational)> {
    let mut open: BTreeMap<&str, Rational> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        match e {
            Event::JobStart { actor, time, .. } | Event::JobResume { actor, time, .. } => {
                open.insert(actor, time.clone());
            }
            Event::JobPreempt { actor, time, .. } | Event::JobEnd { actor, time, .. } => {
                if let Some(s) = open.remove(actor.as_str()) {
                    out.push((s, time.clone()));
                }
            }
            _ => {}
        }
    }
    out.extend(open.into_values().map(|s| (s, trace.horizon.clone())));
    out
}

pub fn trace_invariants(g: &Graph, cfg: &SimConfig) -> Result<(), TestCaseError> {
    let trace = simulate(g, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    trace.check_conservation().map_err(TestCaseError::fail)?;
    prop_assert!(trace.events.windows(2).all(|w| w[0].time() <= w[1].time()), "events out of order");
    prop_assert!(trace.events.iter().all(|e| *e.time() <= cfg.horizon));
    if matches!(cfg.scheduler, Scheduler::SingleCore { .. }) {
        let mut spans: Vec<_> = executing_intervals(&trace).into_iter().filter(|(s, e)| e > s).collect();
        spans.sort();
        prop_assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0), "overlapping execution on one core");
    }
    let again = simulate(g, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(again.to_json(), trace.to_json());
    Ok(())
}

pub fn round_trip(g: &Graph) -> Result<(), TestCaseError> {
    let text = serialize_model(g);
    let parsed = parse_model(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
    prop_assert_eq!(&parsed, g, "{}", text);
    prop_assert_eq!(serialize_model(&parsed), text);
    Ok(())
}

pub fn periodicity(seed: &DagSeed) -> Result<(), TestCaseError> {
    let g = seed.graph(false);
    let hyper = compute_hyperperiod(&g).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let per_actor: BTreeMap<String, u64> = hyper.jobs.iter().map(|(a, n)| (a.to_string(), 2 * n)).collect();
    let table = timing_table(&g, &Horizon::PerActor(per_actor)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (a, jobs) in hyper.jobs.iter() {
        for n in 1..=jobs {
            let first = &table.get(a, n).unwrap().release;
            let next = &table.get(a, n + jobs).unwrap().release;
            prop_assert_eq!(next, &(first + &hyper.length), "{} job {}", a, n);
        }
    }
    Ok(())
}

/// `perturb` doubles one production rate, which breaks balance whenever
/// that channel closes an undirected cycle.
pub fn repetition_oracle(seed: &DagSeed, perturb: Option<usize>) -> Result<(), TestCaseError> {
    let mut g = seed.graph(false);
    if let Some(k) = perturb {
        let k = k % g.channels.len();
        let doubled = g.channels[k].prod_rate.constant().unwrap() * &Rational::from(2u64);
        g.channels[k].prod_rate = doubled.into();
    }
    let basis = null_space(&g);
    match repetition_vector(&g, None) {
        Ok(rv) => {
            prop_assert_eq!(basis.len(), 1);
            let expected = normalize(&basis[0]);
            let found: Vec<u64> = rv.iter().map(|(_, n)| n).collect();
            prop_assert_eq!(found, expected);
        }
        Err(AnalysisError::Inconsistent(_)) => prop_assert!(basis.is_empty(), "oracle found {:?}", basis),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    }
    Ok(())
}
