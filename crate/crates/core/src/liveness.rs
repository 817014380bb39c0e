//! Liveness by symbolic execution over one hyperperiod, tick by tick, with
//! exact fractional token levels.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::consistency::{balance, compute_hyperperiod, compute_tick, AnalysisError};
use crate::flows::{port_flows, Flows};
use crate::graph::{Graph, GraphIndex, Mode, Valuation};
use crate::rational::Rational;

/// Which mode each control token carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeSequence {
    /// Every constant mode, then all modes alternating.
    AllModes,
    /// Applied cyclically to successive decider jobs.
    Sequence(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolicState {
    pub tick: u64,
    pub levels: Vec<(String, Rational)>,
    pub completed: Vec<(String, u64)>,
}

impl SymbolicState {
    pub fn level(&self, channel: &str) -> Option<&Rational> {
        self.levels.iter().find(|(c, _)| c == channel).map(|(_, l)| l)
    }

    pub fn completed(&self, actor: &str) -> Option<u64> {
        self.completed.iter().find(|(a, _)| a == actor).map(|(_, n)| *n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deadlock {
    pub tick: u64,
    /// `tick * tick length`, in ms.
    pub time: Rational,
    /// The actor whose mandatory firing could not happen.
    pub blocked: String,
    pub blocked_job: u64,
    /// Where the missing data is, after walking back through untimed producers.
    pub actor: String,
    pub job: u64,
    pub channel: Option<String>,
    /// Extra initial tokens on `channel` that would let `actor` fire.
    pub deficit: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioOutcome {
    pub label: String,
    pub deadlock: Option<Deadlock>,
    pub final_state: SymbolicState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LivenessReport {
    /// `None` for graphs without timed actors, which run a single tick.
    pub tick: Option<Rational>,
    pub ticks: u64,
    pub scenarios: Vec<ScenarioOutcome>,
}

impl LivenessReport {
    pub fn is_live(&self) -> bool {
        self.scenarios.iter().all(|s| s.deadlock.is_none())
    }

    pub fn first_deadlock(&self) -> Option<(&str, &Deadlock)> {
        self.scenarios
            .iter()
            .find_map(|s| s.deadlock.as_ref().map(|d| (s.label.as_str(), d)))
    }
}

struct Timing {
    tick: Option<Rational>,
    ticks: u64,
    /// Activation tick of job 1 and spacing, for timed actors.
    anchor: Vec<Option<(u64, u64)>>,
}

fn timing(g: &Graph) -> Result<Timing, AnalysisError> {
    if g.timed_actors().next().is_none() {
        return Ok(Timing {
            tick: None,
            ticks: 1,
            anchor: vec![None; g.actors.len()],
        });
    }
    let tick = compute_tick(g)?;
    let hyper = compute_hyperperiod(g)?;
    let in_ticks = |x: &Rational| (x / &tick).to_u64().ok_or(AnalysisError::Overflow);
    let ticks = in_ticks(&hyper.length)?;
    let anchor = g
        .actors
        .iter()
        .map(|a| match (a.period(), a.kind.phase()) {
            (Some(p), Some(ph)) => Ok(Some((in_ticks(ph)?, in_ticks(&p)?))),
            _ => Ok(None),
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(Timing {
        tick: Some(tick),
        ticks,
        anchor,
    })
}

/// Job counts over `ticks` for one valuation: each component is scaled so its
/// timed actors fire once per activation in the hyperperiod.
fn caps(g: &Graph, v: Valuation<'_>, t: &Timing) -> Result<Vec<u64>, AnalysisError> {
    let b = balance(g, v)?;
    let mut scale = vec![1u64; b.components];
    for (a, anchor) in t.anchor.iter().enumerate() {
        if let Some((phase, period)) = anchor {
            let jobs = (t.ticks - phase).div_ceil(*period);
            if let Some(s) = jobs.checked_div(b.counts[a]) {
                scale[b.component[a]] = s;
            }
        }
    }
    b.counts
        .iter()
        .zip(&b.component)
        .map(|(n, c)| n.checked_mul(scale[*c]).ok_or(AnalysisError::Overflow))
        .collect()
}

fn topological_order(g: &Graph, idx: &GraphIndex) -> Vec<usize> {
    let n = g.actors.len();
    let mut indeg = vec![0usize; n];
    for (ci, _) in g.channels.iter().enumerate() {
        if idx.producer[ci] != idx.consumer[ci] {
            indeg[idx.consumer[ci]] += 1;
        }
    }
    let mut placed = vec![false; n];
    let mut ready: BTreeSet<(&str, usize)> = (0..n)
        .filter(|&a| indeg[a] == 0)
        .map(|a| (g.actors[a].id.as_str(), a))
        .collect();
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = match ready.pop_first() {
            Some((_, a)) => a,
            None => (0..n)
                .filter(|&a| !placed[a])
                .min_by(|&x, &y| g.actors[x].id.cmp(&g.actors[y].id))
                .expect("unplaced actor remains"),
        };
        if placed[next] {
            continue;
        }
        placed[next] = true;
        order.push(next);
        for &ci in &idx.outputs[next] {
            let q = idx.consumer[ci];
            if q != next && !placed[q] {
                indeg[q] -= 1;
                if indeg[q] == 0 {
                    ready.insert((g.actors[q].id.as_str(), q));
                }
            }
        }
    }
    order
}

/// Actor, job, starving channel with its deficit, and whether the job was partly fed.
type Step = (usize, u64, Option<(usize, Rational)>, bool);

struct Run<'g> {
    g: &'g Graph,
    idx: &'g GraphIndex,
    flows: &'g Flows,
    timing: &'g Timing,
    order: &'g [usize],
    sequence: Option<Vec<&'g Mode>>,
    caps: Vec<u64>,
    levels: Vec<Rational>,
    done: Vec<u64>,
}

impl<'g> Run<'g> {
    fn new(
        g: &'g Graph,
        idx: &'g GraphIndex,
        flows: &'g Flows,
        timing: &'g Timing,
        order: &'g [usize],
        sequence: Option<Vec<&'g Mode>>,
        caps: Vec<u64>,
    ) -> Self {
        Run {
            g,
            idx,
            flows,
            timing,
            order,
            sequence,
            caps,
            levels: g.channels.iter().map(|c| c.initial_tokens.clone()).collect(),
            done: vec![0; g.actors.len()],
        }
    }

    fn valuation(&self, job: u64) -> Valuation<'g> {
        match &self.sequence {
            None => Valuation::AllBranches,
            Some(seq) => Valuation::Mode(seq[((job - 1) % seq.len() as u64) as usize]),
        }
    }

    fn blocking_input(&self, a: usize, job: u64) -> Option<(usize, Rational)> {
        let v = self.valuation(job);
        self.idx.inputs[a].iter().find_map(|&c| {
            let need = self.flows.cons[c].amount(job, v);
            (self.levels[c] < need).then(|| (c, &need - &self.levels[c]))
        })
    }

    fn enabled(&self, a: usize) -> bool {
        let job = self.done[a] + 1;
        job <= self.caps[a] && self.blocking_input(a, job).is_none()
    }

    fn due(&self, a: usize, tick: u64) -> bool {
        match self.timing.anchor[a] {
            Some((phase, period)) => {
                tick >= phase && (tick - phase).is_multiple_of(period) && (tick - phase) / period == self.done[a]
            }
            None => false,
        }
    }

    fn fire(&mut self, a: usize) {
        let job = self.done[a] + 1;
        let v = self.valuation(job);
        for &c in &self.idx.inputs[a] {
            let amt = self.flows.cons[c].amount(job, v);
            self.levels[c] -= &amt;
        }
        for &c in &self.idx.outputs[a] {
            let amt = self.flows.prod[c].amount(job, v);
            self.levels[c] += &amt;
        }
        self.done[a] = job;
    }

    fn settle(&mut self, tick: u64) {
        loop {
            let mut progress = false;
            for i in 0..self.order.len() {
                let a = self.order[i];
                if self.timing.anchor[a].is_some() {
                    if self.due(a, tick) && self.enabled(a) {
                        self.fire(a);
                        progress = true;
                    }
                } else {
                    while self.enabled(a) {
                        self.fire(a);
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    /// Walks back from a blocked job through untimed producers and reports
    /// the deepest actor that already has part of its input.
    fn diagnose(&self, start: usize, tick: u64) -> Deadlock {
        let mut visited = vec![false; self.g.actors.len()];
        let mut steps: Vec<Step> = Vec::new();
        let mut a = start;
        loop {
            visited[a] = true;
            let job = self.done[a] + 1;
            let block = self.blocking_input(a, job);
            let v = self.valuation(job);
            let partial = self.idx.inputs[a].iter().any(|&c| {
                self.idx.producer[c] != a && {
                    let need = self.flows.cons[c].amount(job, v);
                    need.is_positive() && self.levels[c] >= need
                }
            });
            let next = block.as_ref().map(|(c, _)| self.idx.producer[*c]);
            steps.push((a, job, block, partial));
            match next {
                Some(p) if !visited[p] && self.timing.anchor[p].is_none() => a = p,
                _ => break,
            }
        }
        let pick = steps
            .iter()
            .rev()
            .find(|s| s.3 && s.2.is_some())
            .or_else(|| steps.iter().rev().find(|s| s.2.is_some()))
            .unwrap_or(&steps[0]);
        let (actor, job, block, _) = pick;
        Deadlock {
            tick,
            time: match &self.timing.tick {
                Some(t) => t * &Rational::from(tick),
                None => Rational::zero(),
            },
            blocked: self.g.actors[start].id.clone(),
            blocked_job: self.done[start] + 1,
            actor: self.g.actors[*actor].id.clone(),
            job: *job,
            channel: block.as_ref().map(|(c, _)| self.g.channels[*c].id.clone()),
            deficit: block.as_ref().map(|(_, d)| d.clone()),
        }
    }

    fn execute(mut self, label: String, check_completion: bool) -> ScenarioOutcome {
        let mut deadlock = None;
        let mut last = 0;
        'ticks: for tick in 0..self.timing.ticks {
            last = tick;
            self.settle(tick);
            for i in 0..self.order.len() {
                let a = self.order[i];
                if self.due(a, tick) {
                    deadlock = Some(self.diagnose(a, tick));
                    break 'ticks;
                }
            }
        }
        if deadlock.is_none() && check_completion {
            if let Some(&a) = self.order.iter().find(|&&a| self.done[a] < self.caps[a]) {
                deadlock = Some(self.diagnose(a, last));
            }
        }
        ScenarioOutcome {
            label,
            deadlock,
            final_state: SymbolicState {
                tick: last,
                levels: self
                    .g
                    .channels
                    .iter()
                    .zip(self.levels)
                    .map(|(c, l)| (c.id.clone(), l))
                    .collect(),
                completed: self
                    .g
                    .actors
                    .iter()
                    .zip(self.done)
                    .map(|(a, n)| (a.id.clone(), n))
                    .collect(),
            },
        }
    }
}

/// Runs the symbolic execution for one hyperperiod under each requested
/// mode scenario.
///
/// Timed actors must fire at their activation ticks; untimed actors fire as
/// soon as their inputs allow, up to their job count for the hyperperiod.
/// A job fires when every input holds at least its consumption amount, so
/// fractional levels count.
pub fn check_liveness<'a>(g: &'a Graph, modes: &ModeSequence) -> Result<LivenessReport, AnalysisError> {
    let idx = GraphIndex::new(g)?;
    let flows = port_flows(g, &idx);
    let timing = timing(g)?;
    let order = topological_order(g, &idx);
    let all_branch_caps = caps(g, Valuation::AllBranches, &timing)?;

    let run = |sequence: Option<Vec<&'a Mode>>, caps: Vec<u64>| Run::new(g, &idx, &flows, &timing, &order, sequence, caps);

    let mut scenarios = Vec::new();
    let parametric = g.has_parametric_rates();
    let names: Vec<String> = match modes {
        ModeSequence::AllModes => g.modes.modes.iter().map(|m| m.name.clone()).collect(),
        ModeSequence::Sequence(s) => s.clone(),
    };
    let resolved: Vec<&Mode> = names.iter().map(|n| g.mode(n)).collect::<Result<_, _>>()?;

    if !parametric || resolved.is_empty() {
        if parametric {
            return Err(AnalysisError::ModeRequired);
        }
        scenarios.push(run(None, all_branch_caps).execute("all branches".into(), true));
    } else {
        match modes {
            ModeSequence::AllModes => {
                for m in &resolved {
                    let caps = caps(g, Valuation::Mode(m), &timing)?;
                    scenarios.push(run(Some(vec![*m]), caps).execute(format!("mode {}", m.name), true));
                }
                if resolved.len() > 1 {
                    scenarios.push(
                        run(Some(resolved.clone()), all_branch_caps).execute("alternating modes".into(), false),
                    );
                }
            }
            ModeSequence::Sequence(_) => {
                let label = format!("sequence {}", names.join(" "));
                if resolved.len() == 1 {
                    let caps = caps(g, Valuation::Mode(resolved[0]), &timing)?;
                    scenarios.push(run(Some(resolved), caps).execute(label, true));
                } else {
                    scenarios.push(run(Some(resolved), all_branch_caps).execute(label, false));
                }
            }
        }
    }
    Ok(LivenessReport {
        tick: timing.tick,
        ticks: timing.ticks,
        scenarios,
    })
}
