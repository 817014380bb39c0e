use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum Event {
    JobRelease {
        time: Rational,
        actor: String,
        job: u64,
    },
    JobStart {
        time: Rational,
        actor: String,
        job: u64,
    },
    JobPreempt {
        time: Rational,
        actor: String,
        job: u64,
    },
    JobResume {
        time: Rational,
        actor: String,
        job: u64,
    },
    JobEnd {
        time: Rational,
        actor: String,
        job: u64,
    },
    TokenEmit {
        time: Rational,
        actor: Option<String>,
        job: u64,
        channel: String,
        token: u64,
        tag: u64,
    },
    TokenConsume {
        time: Rational,
        actor: String,
        job: u64,
        channel: String,
        token: u64,
        tag: u64,
    },
    TokenDiscard {
        time: Rational,
        actor: String,
        job: u64,
        channel: String,
        token: u64,
        expected: u64,
        got: u64,
        last_accepted: u64,
    },
    ModeChosen {
        time: Rational,
        decider: String,
        job: u64,
        mode: String,
    },
}

impl Event {
    pub fn time(&self) -> &Rational {
        match self {
            Event::JobRelease { time, .. }
            | Event::JobStart { time, .. }
            | Event::JobPreempt { time, .. }
            | Event::JobResume { time, .. }
            | Event::JobEnd { time, .. }
            | Event::TokenEmit { time, .. }
            | Event::TokenConsume { time, .. }
            | Event::TokenDiscard { time, .. }
            | Event::ModeChosen { time, .. } => time,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Event::JobRelease { .. } => "JobRelease",
            Event::JobStart { .. } => "JobStart",
            Event::JobPreempt { .. } => "JobPreempt",
            Event::JobResume { .. } => "JobResume",
            Event::JobEnd { .. } => "JobEnd",
            Event::TokenEmit { .. } => "TokenEmit",
            Event::TokenConsume { .. } => "TokenConsume",
            Event::TokenDiscard { .. } => "TokenDiscard",
            Event::ModeChosen { .. } => "ModeChosen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceActor {
    pub id: String,
    pub priority: Option<u32>,
    /// Whether any of its jobs may take time; zero-time actors get no Gantt row.
    pub executes: bool,
}

/// A job still released or running when the horizon was reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedJob {
    pub actor: String,
    pub job: u64,
    pub remaining: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub schema_version: u32,
    pub horizon: Rational,
    pub actors: Vec<TraceActor>,
    pub events: Vec<Event>,
    pub truncated: Vec<TruncatedJob>,
    /// Token ids left in each channel at the horizon.
    pub buffered: BTreeMap<String, Vec<u64>>,
}

fn quote(s: &str) -> String {
    format!("{s:?}")
}

impl SimTrace {
    pub fn discards(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::TokenDiscard { .. }))
    }

    pub fn discard_count(&self) -> usize {
        self.discards().count()
    }

    /// Tags of the data tokens `actor` accepted or discarded, in order.
    pub fn arrivals(&self, actor: &str, channel: &str) -> Vec<u64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::TokenConsume {
                    actor: a,
                    channel: c,
                    tag,
                    ..
                }
                | Event::TokenDiscard {
                    actor: a,
                    channel: c,
                    got: tag,
                    ..
                } if a == actor && c == channel => Some(*tag),
                _ => None,
            })
            .collect()
    }

    /// Every emitted token is consumed or discarded once, or still buffered.
    pub fn check_conservation(&self) -> Result<(), String> {
        let mut fate: HashMap<u64, u32> = HashMap::new();
        let mut emitted = Vec::new();
        for e in &self.events {
            match e {
                Event::TokenEmit { token, .. } => {
                    if fate.insert(*token, 0).is_some() {
                        return Err(format!("token {token} emitted twice"));
                    }
                    emitted.push(*token);
                }
                Event::TokenConsume { token, .. } | Event::TokenDiscard { token, .. } => {
                    let n = fate
                        .get_mut(token)
                        .ok_or_else(|| format!("token {token} used before emission"))?;
                    *n += 1;
                }
                _ => {}
            }
        }
        for ids in self.buffered.values() {
            for t in ids {
                *fate
                    .get_mut(t)
                    .ok_or_else(|| format!("buffered token {t} never emitted"))? += 1;
            }
        }
        match emitted.iter().find(|t| fate[t] != 1) {
            Some(t) => Err(format!("token {t} accounted for {} times", fate[t])),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One line per event.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let t = e.time();
            let _ = write!(out, "{t} ({}) {}", t.to_decimal(3), e.name());
            let _ = match e {
                Event::JobRelease { actor, job, .. }
                | Event::JobStart { actor, job, .. }
                | Event::JobPreempt { actor, job, .. }
                | Event::JobResume { actor, job, .. }
                | Event::JobEnd { actor, job, .. } => {
                    write!(out, " actor={} job={job}", quote(actor))
                }
                Event::TokenEmit {
                    actor,
                    job,
                    channel,
                    token,
                    tag,
                    ..
                } => match actor {
                    Some(a) => write!(
                        out,
                        " channel={channel} token={token} tag={tag} actor={} job={job}",
                        quote(a)
                    ),
                    None => write!(out, " channel={channel} token={token} tag={tag} initial"),
                },
                Event::TokenConsume {
                    actor,
                    job,
                    channel,
                    token,
                    tag,
                    ..
                } => write!(
                    out,
                    " actor={} job={job} channel={channel} token={token} tag={tag}",
                    quote(actor)
                ),
                Event::TokenDiscard {
                    actor,
                    job,
                    channel,
                    token,
                    expected,
                    got,
                    last_accepted,
                    ..
                } => write!(
                    out,
                    " actor={} job={job} channel={channel} token={token} expected={expected} got={got} last_accepted={last_accepted}",
                    quote(actor)
                ),
                Event::ModeChosen {
                    decider, job, mode, ..
                } => write!(out, " decider={} job={job} mode={}", quote(decider), quote(mode)),
            };
            out.push('\n');
        }
        for j in &self.truncated {
            let _ = writeln!(
                out,
                "{} truncated actor={} job={} remaining={}",
                self.horizon,
                quote(&j.actor),
                j.job,
                j.remaining
            );
        }
        out
    }
}
