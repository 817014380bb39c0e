//! Per-job release, deadline and execution window, and the WCET
//! feasibility test built on them.
//!
//! Releases propagate forward from the activations of timed actors using
//! BCETs: a job is released once its activation instant has passed (timed
//! actors), its previous job has finished, and every producer job it needs
//! has finished. Deadlines propagate backward using WCETs: a job must end
//! before the next activation (timed actors), before its next job has to
//! start, and before the first consumer job that needs its data has to
//! start. Parametric rates are taken with every branch active.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::consistency::{compute_hyperperiod, AnalysisError, InfeasibleJob};
use crate::flows::{port_flows, Flows};
use crate::graph::{Graph, GraphIndex, Valuation};
use crate::rational::Rational;

const V: Valuation<'static> = Valuation::AllBranches;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JobTiming {
    pub actor: String,
    pub job: u64,
    pub release: Rational,
    /// `None` when no timed actor bounds the job from below.
    pub deadline: Option<Rational>,
    pub window: Option<Rational>,
}

/// How many jobs of each actor to report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Horizon {
    /// The same count for every actor.
    Jobs(u64),
    PerActor(BTreeMap<String, u64>),
    /// Each actor's job count over one hyperperiod.
    Hyperperiod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimingTable {
    /// In ms.
    pub hyperperiod: Rational,
    pub rows: Vec<JobTiming>,
}

impl TimingTable {
    pub fn get(&self, actor: &str, job: u64) -> Option<&JobTiming> {
        self.rows.iter().find(|r| r.actor == actor && r.job == job)
    }

    pub fn actor_rows<'a>(&'a self, actor: &'a str) -> impl Iterator<Item = &'a JobTiming> + 'a {
        self.rows.iter().filter(move |r| r.actor == actor)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("actor,job,release,release_ms,deadline,deadline_ms,window,window_ms\n");
        for r in &self.rows {
            let exact = |v: &Option<Rational>| v.as_ref().map_or("inf".to_string(), |v| v.to_string());
            let dec = |v: &Option<Rational>| v.as_ref().map_or("inf".to_string(), |v| v.to_decimal(2));
            let actor = if r.actor.contains([',', '"']) {
                format!("\"{}\"", r.actor.replace('"', "\"\""))
            } else {
                r.actor.clone()
            };
            let _ = writeln!(
                out,
                "{actor},{},{},{},{},{},{},{}",
                r.job,
                r.release,
                r.release.to_decimal(2),
                exact(&r.deadline),
                dec(&r.deadline),
                exact(&r.window),
                dec(&r.window)
            );
        }
        out
    }

    pub fn to_human(&self) -> String {
        let width = self.rows.iter().map(|r| r.actor.len()).max().unwrap_or(5).max(5);
        let mut out = format!("hyperperiod {} ms\n", self.hyperperiod);
        let _ = writeln!(out, "{:width$}  {:>5}  {:>22}  {:>22}  {:>18}", "actor", "job", "release", "deadline", "window");
        for r in &self.rows {
            let cell = |v: &Option<Rational>| match v {
                Some(v) => format!("{v} ({})", v.to_decimal(2)),
                None => "inf".into(),
            };
            let _ = writeln!(
                out,
                "{:width$}  {:>5}  {:>22}  {:>22}  {:>18}",
                r.actor,
                r.job,
                cell(&Some(r.release.clone())),
                cell(&r.deadline),
                cell(&r.window)
            );
        }
        out
    }
}

struct Propagation<'g> {
    g: &'g Graph,
    idx: GraphIndex,
    flows: Flows,
    /// Jobs per actor for which deadlines are computed.
    horizon: Vec<u64>,
    release: HashMap<(usize, u64), Rational>,
    deadline: HashMap<(usize, u64), Option<Rational>>,
}

fn activation(g: &Graph, a: usize, job: u64) -> Option<(Rational, Rational)> {
    let actor = &g.actors[a];
    let period = actor.period()?;
    let phase = actor.kind.phase()?.clone();
    let at = &phase + &(&period * &Rational::from(job - 1));
    Some((at, period))
}

impl<'g> Propagation<'g> {
    fn new(g: &'g Graph, hyperperiods: u64, jobs: &[u64]) -> Result<Self, AnalysisError> {
        let idx = GraphIndex::new(g)?;
        let timed: Vec<usize> = (0..g.actors.len()).filter(|&a| g.actors[a].kind.is_timed()).collect();
        let anchored = idx.reachable_from(timed);
        if let Some(a) = anchored.iter().position(|&r| !r) {
            return Err(AnalysisError::Unanchored(g.actors[a].id.clone()));
        }
        let flows = port_flows(g, &idx);
        Ok(Propagation {
            g,
            idx,
            flows,
            horizon: jobs.iter().map(|n| n * hyperperiods).collect(),
            release: HashMap::new(),
            deadline: HashMap::new(),
        })
    }

    /// Producer jobs that must finish before `job` of `a` starts.
    fn release_deps(&self, a: usize, job: u64) -> Result<Vec<(usize, u64)>, AnalysisError> {
        let mut deps = Vec::new();
        if job > 1 {
            deps.push((a, job - 1));
        }
        for &c in &self.idx.inputs[a] {
            let demand = self.flows.cons[c].cumulative(job, V);
            let missing = &demand - &self.g.channels[c].initial_tokens;
            let p = self.idx.producer[c];
            match self.flows.prod[c].jobs_to_reach(&missing, V) {
                Some(0) => {}
                Some(k) => deps.push((p, k)),
                None => {
                    return Err(AnalysisError::CyclicDependency {
                        actor: self.g.actors[a].id.clone(),
                        job,
                    })
                }
            }
        }
        Ok(deps)
    }

    fn release(&mut self, a: usize, job: u64) -> Result<Rational, AnalysisError> {
        if let Some(r) = self.release.get(&(a, job)) {
            return Ok(r.clone());
        }
        let mut stack = vec![(a, job, false)];
        let mut on_path: HashSet<(usize, u64)> = HashSet::new();
        while let Some((x, n, expanded)) = stack.pop() {
            if self.release.contains_key(&(x, n)) {
                continue;
            }
            let deps = self.release_deps(x, n)?;
            if !expanded {
                on_path.insert((x, n));
                stack.push((x, n, true));
                for &d in &deps {
                    if on_path.contains(&d) || (d.0 == x && d.1 >= n) {
                        return Err(AnalysisError::CyclicDependency {
                            actor: self.g.actors[d.0].id.clone(),
                            job: d.1,
                        });
                    }
                    if !self.release.contains_key(&d) {
                        stack.push((d.0, d.1, false));
                    }
                }
                continue;
            }
            let mut r = activation(self.g, x, n).map_or_else(Rational::zero, |(at, _)| at);
            for (p, k) in deps {
                let finish = &self.release[&(p, k)] + &self.g.actors[p].bcet;
                r = r.max(finish);
            }
            self.release.insert((x, n), r);
            on_path.remove(&(x, n));
        }
        Ok(self.release[&(a, job)].clone())
    }

    /// Consumer jobs whose start bounds the end of `job` of `a`.
    fn deadline_deps(&self, a: usize, job: u64) -> Vec<(usize, u64)> {
        let mut deps = Vec::new();
        if job < self.horizon[a] {
            deps.push((a, job + 1));
        }
        for &c in &self.idx.outputs[a] {
            let before = &self.g.channels[c].initial_tokens + &self.flows.prod[c].cumulative(job - 1, V);
            if self.flows.prod[c].amount(job, V).is_zero() {
                continue;
            }
            let q = self.idx.consumer[c];
            if let Some(m) = self.flows.cons[c].jobs_to_exceed(&before, V) {
                if m <= self.horizon[q] && !(q == a && m <= job) {
                    deps.push((q, m));
                }
            }
        }
        deps
    }

    fn deadline(&mut self, a: usize, job: u64) -> Result<Option<Rational>, AnalysisError> {
        if let Some(d) = self.deadline.get(&(a, job)) {
            return Ok(d.clone());
        }
        let mut stack = vec![(a, job, false)];
        let mut on_path: HashSet<(usize, u64)> = HashSet::new();
        while let Some((x, n, expanded)) = stack.pop() {
            if self.deadline.contains_key(&(x, n)) {
                continue;
            }
            let deps = self.deadline_deps(x, n);
            if !expanded {
                on_path.insert((x, n));
                stack.push((x, n, true));
                for &d in &deps {
                    if on_path.contains(&d) {
                        return Err(AnalysisError::CyclicDependency {
                            actor: self.g.actors[d.0].id.clone(),
                            job: d.1,
                        });
                    }
                    if !self.deadline.contains_key(&d) {
                        stack.push((d.0, d.1, false));
                    }
                }
                continue;
            }
            let mut best = activation(self.g, x, n).map(|(at, period)| &at + &period);
            for (q, m) in deps {
                if let Some(d) = &self.deadline[&(q, m)] {
                    let bound = d - &self.g.actors[q].wcet;
                    best = Some(match best {
                        Some(b) => b.min(bound),
                        None => bound,
                    });
                }
            }
            self.deadline.insert((x, n), best);
            on_path.remove(&(x, n));
        }
        Ok(self.deadline[&(a, job)].clone())
    }

    fn job(&mut self, a: usize, job: u64) -> Result<JobTiming, AnalysisError> {
        let release = self.release(a, job)?;
        let deadline = self.deadline(a, job)?;
        let window = deadline.as_ref().map(|d| d - &release);
        if let (Some(w), Some(d)) = (&window, &deadline) {
            if w.is_negative() {
                return Err(AnalysisError::Infeasible(Box::new(InfeasibleJob {
                    actor: self.g.actors[a].id.clone(),
                    job,
                    release,
                    deadline: d.clone(),
                })));
            }
        }
        Ok(JobTiming {
            actor: self.g.actors[a].id.clone(),
            job,
            release,
            deadline,
            window,
        })
    }
}

/// Requested job counts and hyperperiod pattern lengths.
fn plan(g: &Graph, horizon: &Horizon) -> Result<(Rational, Vec<u64>, Vec<u64>), AnalysisError> {
    let hyper = compute_hyperperiod(g)?;
    let pattern: Vec<u64> = g
        .actors
        .iter()
        .map(|a| hyper.jobs.get(&a.id).unwrap_or(0))
        .collect();
    let requested: Vec<u64> = match horizon {
        Horizon::Jobs(n) => vec![*n; g.actors.len()],
        Horizon::Hyperperiod => pattern.clone(),
        Horizon::PerActor(map) => {
            for name in map.keys() {
                if g.actor(name).is_none() {
                    return Err(crate::graph::GraphError::UnknownActor(name.clone()).into());
                }
            }
            g.actors
                .iter()
                .map(|a| map.get(&a.id).copied().unwrap_or(0))
                .collect()
        }
    };
    Ok((hyper.length, pattern, requested))
}

fn hyperperiods_needed(pattern: &[u64], requested: &[u64]) -> u64 {
    let cover = pattern
        .iter()
        .zip(requested)
        .filter(|(p, _)| **p > 0)
        .map(|(p, r)| r.div_ceil(*p))
        .max()
        .unwrap_or(1);
    cover + 2
}

/// Timing of the `job`-th job (1-based) of `actor`.
pub fn job_timing(g: &Graph, actor: &str, job: u64) -> Result<JobTiming, AnalysisError> {
    let a = GraphIndex::new(g)?.actor(actor)?;
    let (_, pattern, mut requested) = plan(g, &Horizon::Jobs(0))?;
    requested[a] = job.max(1);
    let mut p = Propagation::new(g, hyperperiods_needed(&pattern, &requested), &pattern)?;
    p.job(a, job.max(1))
}

/// All job timings over the horizon, actors in declaration order.
pub fn timing_table(g: &Graph, horizon: &Horizon) -> Result<TimingTable, AnalysisError> {
    let (length, pattern, requested) = plan(g, horizon)?;
    let mut p = Propagation::new(g, hyperperiods_needed(&pattern, &requested), &pattern)?;
    let mut rows = Vec::new();
    for (a, n) in requested.iter().enumerate() {
        for job in 1..=*n {
            rows.push(p.job(a, job)?);
        }
    }
    Ok(TimingTable {
        hyperperiod: length,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityEntry {
    pub actor: String,
    /// Smallest window over one hyperperiod: the largest admissible WCET.
    pub min_window: Option<Rational>,
    /// First job reaching `min_window`.
    pub critical_job: Option<u64>,
    pub wcet: Rational,
    pub pass: bool,
}

/// Necessary condition only: passing does not prove the graph schedulable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub entries: Vec<FeasibilityEntry>,
    pub pass: bool,
}

impl FeasibilityReport {
    pub fn entry(&self, actor: &str) -> Option<&FeasibilityEntry> {
        self.entries.iter().find(|e| e.actor == actor)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FeasibilityEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

/// Per actor, the minimum execution window over its hyperperiod pattern.
pub fn max_wcets(g: &Graph) -> Result<FeasibilityReport, AnalysisError> {
    let table = timing_table(g, &Horizon::Hyperperiod)?;
    let entries: Vec<FeasibilityEntry> = g
        .actors
        .iter()
        .map(|a| {
            let mut min: Option<(Rational, u64)> = None;
            for row in table.actor_rows(&a.id) {
                if let Some(w) = &row.window {
                    if min.as_ref().is_none_or(|(m, _)| w < m) {
                        min = Some((w.clone(), row.job));
                    }
                }
            }
            let pass = min.as_ref().is_none_or(|(m, _)| a.wcet <= *m);
            FeasibilityEntry {
                actor: a.id.clone(),
                critical_job: min.as_ref().map(|(_, j)| *j),
                min_window: min.map(|(m, _)| m),
                wcet: a.wcet.clone(),
                pass,
            }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    Ok(FeasibilityReport { entries, pass })
}

/// Every actor's declared WCET must fit in its smallest execution window.
pub fn check_feasibility(g: &Graph) -> Result<FeasibilityReport, AnalysisError> {
    max_wcets(g)
}
