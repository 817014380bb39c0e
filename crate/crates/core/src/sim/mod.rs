//! Discrete-event execution with whole, sequence-tagged tokens.

mod engine;
mod gantt;
mod scenario;
mod trace;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Actor, GraphError};
use crate::rational::Rational;

pub use engine::simulate;
pub use gantt::{export_gantt, GanttFormat, Interval, Row};
pub use scenario::{parse_scenario, Scenario};
pub use trace::{Event, SimTrace, TraceActor, TruncatedJob};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Scheduler {
    UnlimitedCores,
    /// Lower rank runs first.
    SingleCore { priorities: BTreeMap<String, u32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JoinerPolicy {
    /// Take branches in the order the routing rule dictates: the mode of the
    /// next control token, or the slot order of a plain joiner.
    RmdfLexicographic,
    /// Forward whichever token arrived first.
    NaiveFirstArrival,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "durations")]
pub enum ExecTimePolicy {
    Bcet,
    Wcet,
    /// Actors missing from the map run for their WCET.
    Fixed(BTreeMap<String, Rational>),
}

impl ExecTimePolicy {
    pub fn duration(&self, actor: &Actor) -> Rational {
        match self {
            ExecTimePolicy::Bcet => actor.bcet.clone(),
            ExecTimePolicy::Wcet => actor.wcet.clone(),
            ExecTimePolicy::Fixed(map) => map.get(&actor.id).unwrap_or(&actor.wcet).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub actor: String,
    pub job: u64,
    pub duration: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheduler: Scheduler,
    pub joiner_policy: JoinerPolicy,
    pub index_check: BTreeSet<String>,
    pub exec_time: ExecTimePolicy,
    pub overrides: Vec<Override>,
    pub horizon: Rational,
    /// Modes chosen by successive jobs of each decider, applied cyclically.
    pub mode_script: BTreeMap<String, Vec<String>>,
}

impl SimConfig {
    pub fn new(horizon: Rational) -> Self {
        SimConfig {
            scheduler: Scheduler::UnlimitedCores,
            joiner_policy: JoinerPolicy::RmdfLexicographic,
            index_check: BTreeSet::new(),
            exec_time: ExecTimePolicy::Wcet,
            overrides: Vec::new(),
            horizon,
            mode_script: BTreeMap::new(),
        }
    }

    pub fn duration(&self, actor: &Actor, job: u64) -> Rational {
        self.overrides
            .iter()
            .rev()
            .find(|o| o.actor == actor.id && o.job == job)
            .map(|o| o.duration.clone())
            .unwrap_or_else(|| self.exec_time.duration(actor))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("horizon must be positive, got {0}")]
    Horizon(Rational),
    #[error("no priority for `{0}` under the single-core scheduler")]
    MissingPriority(String),
    #[error("`{0}` is not an actor of the graph")]
    UnknownActor(String),
    #[error("mode script for `{decider}` names unknown mode `{mode}`")]
    UnknownMode { decider: String, mode: String },
    #[error("more than {0} zero-duration jobs at time {1}")]
    ZeroTimeLoop(u64, Rational),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn run(joiner: JoinerPolicy, overrun: bool) -> SimTrace {
        let mut s = models::flight6();
        s.config.joiner_policy = joiner;
        if !overrun {
            s.config.overrides.clear();
        }
        let g = s.graph_for(&models::ingenuity()).unwrap();
        simulate(&g, &s.config).unwrap()
    }

    #[test]
    fn naive_joiner_inverts_frames_two_and_three() {
        let trace = run(JoinerPolicy::NaiveFirstArrival, true);
        let discards: Vec<_> = trace.discards().collect();
        assert_eq!(discards.len(), 1, "{}", trace.to_text());
        match discards[0] {
            Event::TokenDiscard {
                actor,
                got,
                last_accepted,
                ..
            } => {
                assert_eq!(actor, "Feature Match");
                assert_eq!((*got, *last_accepted), (2, 3));
            }
            _ => unreachable!(),
        }
        assert_eq!(trace.arrivals("Feature Match", "cj_fm"), vec![1, 3, 2, 4]);
        trace.check_conservation().unwrap();
    }

    #[test]
    fn lexicographic_joiner_keeps_order() {
        let trace = run(JoinerPolicy::RmdfLexicographic, true);
        assert_eq!(trace.discard_count(), 0);
        assert_eq!(trace.arrivals("Feature Match", "cj_fm"), vec![1, 2, 3, 4]);
    }

    #[test]
    fn nominal_run_keeps_order() {
        let trace = run(JoinerPolicy::NaiveFirstArrival, false);
        assert_eq!(trace.discard_count(), 0);
        assert_eq!(trace.arrivals("Feature Match", "cj_fm"), vec![1, 2, 3, 4]);
    }

    #[test]
    fn gantt_has_seven_rows_and_one_hatched_box() {
        let trace = run(JoinerPolicy::NaiveFirstArrival, true);
        let rows = Row::from_trace(&trace);
        let names: Vec<_> = rows.iter().map(|r| r.actor.as_str()).collect();
        assert_eq!(
            names,
            [
                "Camera",
                "Feature Detection",
                "Label Decider",
                "Pseudo Landmarks",
                "Feature Tracking",
                "Filtering Procedure",
                "Feature Match"
            ]
        );
        let svg = export_gantt(&trace, GanttFormat::Svg);
        assert_eq!(svg.matches(r#"class="row""#).count(), 7);
        assert_eq!(svg.matches(r#"class="job discarded""#).count(), 1);
    }

    #[test]
    fn trace_json_round_trips() {
        let trace = run(JoinerPolicy::NaiveFirstArrival, true);
        assert_eq!(SimTrace::from_json(&trace.to_json()).unwrap(), trace);
    }
}
