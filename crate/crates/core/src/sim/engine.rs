use std::collections::{BTreeMap, VecDeque};

use num_traits::ToPrimitive;

use super::trace::{Event, SimTrace, TraceActor, TruncatedJob};
use super::{JoinerPolicy, Scheduler, SimConfig, SimError};
use crate::flows::{port_flows, Flows, PortFlow};
use crate::graph::{area_owner, ActorKind, ChannelClass, Graph, GraphIndex, Mode, Valuation};
use crate::rational::Rational;

const ZERO_TIME_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone)]
struct Token {
    id: u64,
    tag: u64,
    mode: Option<String>,
    iter: Option<u64>,
    arrived: Rational,
}

#[derive(Debug, Clone)]
struct Job {
    seq: u64,
    label: u64,
    remaining: Rational,
    started: bool,
    discarded: bool,
    tag: u64,
    iter: Option<u64>,
    mode: Option<String>,
}

struct Engine<'g> {
    g: &'g Graph,
    idx: GraphIndex,
    flows: Flows,
    cfg: &'g SimConfig,
    owner: Vec<Option<usize>>,
    priority: Vec<u32>,
    script: Vec<Vec<&'g Mode>>,
    activation: Vec<Option<(Rational, Rational)>>,
    init_frac: Vec<Rational>,
    buffers: Vec<VecDeque<Token>>,
    popped: Vec<u64>,
    released: Vec<u64>,
    last_tag: Vec<u64>,
    last_accepted: Vec<Option<u64>>,
    current: Vec<Option<Job>>,
    running: Option<usize>,
    next_token: u64,
    now: Rational,
    events: Vec<Event>,
}

fn times(r: &Rational, n: u64) -> Rational {
    r * &Rational::from(n)
}

fn whole(r: &Rational) -> u64 {
    r.floor().to_u64().unwrap_or(0)
}

impl<'g> Engine<'g> {
    fn new(g: &'g Graph, cfg: &'g SimConfig) -> Result<Self, SimError> {
        if !cfg.horizon.is_positive() {
            return Err(SimError::Horizon(cfg.horizon.clone()));
        }
        let idx = GraphIndex::new(g)?;
        let known = |id: &String| {
            idx.actor(id)
                .map(|_| ())
                .map_err(|_| SimError::UnknownActor(id.clone()))
        };
        cfg.index_check.iter().try_for_each(known)?;
        cfg.overrides.iter().try_for_each(|o| known(&o.actor))?;
        cfg.mode_script.keys().try_for_each(known)?;

        let priority = match &cfg.scheduler {
            Scheduler::UnlimitedCores => vec![0; g.actors.len()],
            Scheduler::SingleCore { priorities } => {
                priorities.keys().try_for_each(known)?;
                g.actors
                    .iter()
                    .map(|a| match priorities.get(&a.id) {
                        Some(p) => Ok(*p),
                        None if executes(cfg, a) => Err(SimError::MissingPriority(a.id.clone())),
                        None => Ok(u32::MAX),
                    })
                    .collect::<Result<_, _>>()?
            }
        };

        let mut script = Vec::with_capacity(g.actors.len());
        for a in &g.actors {
            let names: Vec<&str> = match cfg.mode_script.get(&a.id) {
                Some(s) => s.iter().map(String::as_str).collect(),
                None => g.modes.modes.first().map(|m| m.name.as_str()).into_iter().collect(),
            };
            let modes = names
                .iter()
                .map(|n| {
                    g.modes.get(n).ok_or_else(|| SimError::UnknownMode {
                        decider: a.id.clone(),
                        mode: n.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            script.push(if a.kind == ActorKind::ModeDecider { modes } else { Vec::new() });
        }

        let flows = port_flows(g, &idx);
        let owner = area_owner(g, &idx);
        let n = g.actors.len();
        Ok(Engine {
            g,
            flows,
            cfg,
            owner,
            priority,
            script,
            activation: g
                .actors
                .iter()
                .map(|a| Some((a.kind.phase()?.clone(), a.period()?)))
                .collect(),
            init_frac: g.channels.iter().map(|c| c.initial_tokens.fract()).collect(),
            buffers: vec![VecDeque::new(); g.channels.len()],
            popped: vec![0; g.channels.len()],
            released: vec![0; n],
            last_tag: vec![0; n],
            last_accepted: vec![None; g.channels.len()],
            current: vec![None; n],
            running: None,
            next_token: 1,
            now: Rational::zero(),
            events: Vec::new(),
            idx,
        })
    }

    fn is_data(&self, c: usize) -> bool {
        self.g.channels[c].class == ChannelClass::Data
    }

    fn emit(&mut self, c: usize, actor: Option<usize>, job: u64, tag: u64, mode: Option<String>, iter: Option<u64>) {
        let id = self.next_token;
        self.next_token += 1;
        self.events.push(Event::TokenEmit {
            time: self.now.clone(),
            actor: actor.map(|a| self.g.actors[a].id.clone()),
            job,
            channel: self.g.channels[c].id.clone(),
            token: id,
            tag,
        });
        self.buffers[c].push_back(Token {
            id,
            tag,
            mode,
            iter,
            arrived: self.now.clone(),
        });
    }

    fn activation_of(&self, a: usize, job: u64) -> Option<Rational> {
        self.activation[a]
            .as_ref()
            .map(|(phase, period)| phase + &times(period, job - 1))
    }

    fn param_value(&self, p: &str, mode: Option<&str>) -> Rational {
        mode.and_then(|m| self.g.modes.get(m))
            .and_then(|m| m.assignment.get(p))
            .map(|v| Rational::from(u64::from(*v)))
            .unwrap_or_else(Rational::zero)
    }

    /// The data input whose head token arrived first.
    fn earliest_branch(&self, a: usize) -> Option<usize> {
        self.idx.inputs[a]
            .iter()
            .copied()
            .filter(|&c| self.is_data(c))
            .filter_map(|c| self.buffers[c].front().map(|t| (c, t)))
            .min_by(|(_, x), (_, y)| x.arrived.cmp(&y.arrived).then(x.id.cmp(&y.id)))
            .map(|(c, _)| c)
    }

    /// Tokens to take from each input for the next job, if it can be released now.
    fn plan(&self, a: usize) -> Option<Vec<(usize, usize)>> {
        let actor = &self.g.actors[a];
        let job = self.released[a] + 1;
        if let Some(at) = self.activation_of(a, job) {
            if at > self.now {
                return None;
            }
        } else if self.idx.inputs[a].is_empty() {
            return None;
        }
        let naive = self.cfg.joiner_policy == JoinerPolicy::NaiveFirstArrival;
        let control = self.idx.inputs[a].iter().copied().find(|&c| !self.is_data(c));
        match actor.kind {
            ActorKind::ControlledJoiner | ActorKind::Joiner if naive => {
                let branch = self.earliest_branch(a)?;
                let mut take = vec![(branch, 1)];
                if let Some(c) = control.filter(|&c| !self.buffers[c].is_empty()) {
                    take.push((c, 1));
                }
                Some(take)
            }
            ActorKind::ControlledJoiner => {
                let ctl = control?;
                let mode = self.buffers[ctl].front()?.mode.clone();
                let mut take = vec![(ctl, 1)];
                for &c in &self.idx.inputs[a] {
                    if let PortFlow::Param(p) = &self.flows.cons[c] {
                        let n = whole(&self.param_value(p, mode.as_deref()));
                        if n > 0 {
                            if self.buffers[c].len() < n as usize {
                                return None;
                            }
                            take.push((c, n as usize));
                        }
                    }
                }
                Some(take)
            }
            _ => {
                let mut take = Vec::new();
                for &c in &self.idx.inputs[a] {
                    let demand = self.flows.cons[c].cumulative(job, Valuation::AllBranches);
                    let total = (&demand - &self.init_frac[c]).ceil().to_u64().unwrap_or(0);
                    let need = total.saturating_sub(self.popped[c]) as usize;
                    if self.buffers[c].len() < need {
                        return None;
                    }
                    if need > 0 {
                        take.push((c, need));
                    }
                }
                Some(take)
            }
        }
    }

    fn release(&mut self, a: usize, take: Vec<(usize, usize)>) {
        self.released[a] += 1;
        let seq = self.released[a];
        let mut consumed = Vec::new();
        for (c, n) in take {
            for _ in 0..n {
                let t = self.buffers[c].pop_front().expect("planned token present");
                self.popped[c] += 1;
                consumed.push((c, t));
            }
        }
        let label = match self.owner[a] {
            Some(_) => consumed.iter().filter_map(|(_, t)| t.iter).max().unwrap_or(seq),
            None => seq,
        };
        let actor = &self.g.actors[a];
        let id = actor.id.clone();
        self.events.push(Event::JobRelease {
            time: self.now.clone(),
            actor: id.clone(),
            job: label,
        });

        let checked = self.cfg.index_check.contains(&id);
        let mut discarded = false;
        for (c, t) in &consumed {
            let ordered = !checked || !self.is_data(*c) || self.g.channels[*c].is_self_loop();
            match self.last_accepted[*c] {
                Some(last) if !ordered && t.tag <= last => {
                    discarded = true;
                    self.events.push(Event::TokenDiscard {
                        time: self.now.clone(),
                        actor: id.clone(),
                        job: label,
                        channel: self.g.channels[*c].id.clone(),
                        token: t.id,
                        expected: last + 1,
                        got: t.tag,
                        last_accepted: last,
                    });
                    continue;
                }
                _ if !ordered => self.last_accepted[*c] = Some(t.tag),
                _ => {}
            }
            self.events.push(Event::TokenConsume {
                time: self.now.clone(),
                actor: id.clone(),
                job: label,
                channel: self.g.channels[*c].id.clone(),
                token: t.id,
                tag: t.tag,
            });
        }

        let fed = self.idx.inputs[a]
            .iter()
            .any(|&c| self.is_data(c) && !self.g.channels[c].is_self_loop());
        let tag = if fed {
            consumed
                .iter()
                .filter(|(c, _)| self.is_data(*c) && !self.g.channels[*c].is_self_loop())
                .map(|(_, t)| t.tag)
                .max()
                .unwrap_or(self.last_tag[a])
        } else {
            seq
        };
        self.last_tag[a] = tag;
        let iter = match actor.kind {
            ActorKind::ControlledSplitter => Some(seq),
            _ => consumed.iter().filter_map(|(_, t)| t.iter).max(),
        };
        let mode = if actor.kind == ActorKind::ModeDecider {
            let script = &self.script[a];
            let chosen = (!script.is_empty()).then(|| script[((seq - 1) % script.len() as u64) as usize].name.clone());
            if let Some(m) = &chosen {
                self.events.push(Event::ModeChosen {
                    time: self.now.clone(),
                    decider: id.clone(),
                    job: label,
                    mode: m.clone(),
                });
            }
            chosen
        } else {
            consumed
                .iter()
                .find(|(c, _)| !self.is_data(*c))
                .and_then(|(_, t)| t.mode.clone())
        };

        let job = Job {
            seq,
            label,
            remaining: self.cfg.duration(actor, label),
            started: false,
            discarded,
            tag,
            iter,
            mode,
        };
        if job.remaining.is_zero() {
            self.events.push(Event::JobStart {
                time: self.now.clone(),
                actor: id,
                job: label,
            });
            self.finish(a, job);
        } else {
            self.current[a] = Some(job);
        }
    }

    fn finish(&mut self, a: usize, job: Job) {
        self.events.push(Event::JobEnd {
            time: self.now.clone(),
            actor: self.g.actors[a].id.clone(),
            job: job.label,
        });
        if job.discarded {
            return;
        }
        let n = job.seq;
        for i in 0..self.idx.outputs[a].len() {
            let c = self.idx.outputs[a][i];
            let count = match &self.flows.prod[c] {
                PortFlow::Uniform(r) => whole(&times(r, n)) - whole(&times(r, n - 1)),
                f @ PortFlow::Slot { .. } => whole(&f.amount(n, Valuation::AllBranches)),
                PortFlow::Param(p) => whole(&self.param_value(p, job.mode.as_deref())),
            };
            for _ in 0..count {
                self.emit(c, Some(a), job.label, job.tag, job.mode.clone(), job.iter);
            }
        }
    }

    /// Releases every job that can start at the current instant.
    fn settle(&mut self) -> Result<(), SimError> {
        let mut count = 0u64;
        loop {
            let mut progress = false;
            for a in 0..self.g.actors.len() {
                while self.current[a].is_none() {
                    let Some(take) = self.plan(a) else { break };
                    self.release(a, take);
                    progress = true;
                    count += 1;
                    if count > ZERO_TIME_LIMIT {
                        return Err(SimError::ZeroTimeLoop(ZERO_TIME_LIMIT, self.now.clone()));
                    }
                }
            }
            if !progress {
                return Ok(());
            }
        }
    }

    fn set_started(&mut self, a: usize) {
        let job = self.current[a].as_mut().expect("job to start");
        let event = if job.started { Event::JobResume {
            time: self.now.clone(),
            actor: self.g.actors[a].id.clone(),
            job: job.label,
        } } else { Event::JobStart {
            time: self.now.clone(),
            actor: self.g.actors[a].id.clone(),
            job: job.label,
        } };
        job.started = true;
        self.events.push(event);
    }

    /// Picks the executing jobs and returns them.
    fn dispatch(&mut self) -> Vec<usize> {
        match self.cfg.scheduler {
            Scheduler::UnlimitedCores => {
                let active: Vec<usize> = (0..self.g.actors.len()).filter(|&a| self.current[a].is_some()).collect();
                for &a in &active {
                    if !self.current[a].as_ref().unwrap().started {
                        self.set_started(a);
                    }
                }
                active
            }
            Scheduler::SingleCore { .. } => {
                let best = (0..self.g.actors.len())
                    .filter(|&a| self.current[a].is_some())
                    .min_by_key(|&a| (self.priority[a], a));
                if best != self.running {
                    if let Some(r) = self.running.filter(|&r| self.current[r].is_some()) {
                        self.events.push(Event::JobPreempt {
                            time: self.now.clone(),
                            actor: self.g.actors[r].id.clone(),
                            job: self.current[r].as_ref().unwrap().label,
                        });
                    }
                    if let Some(b) = best {
                        self.set_started(b);
                    }
                    self.running = best;
                }
                best.into_iter().collect()
            }
        }
    }

    fn next_instant(&self, active: &[usize]) -> Option<Rational> {
        let completions = active
            .iter()
            .map(|&a| &self.now + &self.current[a].as_ref().unwrap().remaining);
        let activations = (0..self.g.actors.len())
            .filter(|&a| self.current[a].is_none())
            .filter_map(|a| self.activation_of(a, self.released[a] + 1))
            .filter(|t| *t > self.now);
        completions.chain(activations).min()
    }

    fn run(mut self) -> Result<SimTrace, SimError> {
        for c in 0..self.g.channels.len() {
            for _ in 0..whole(&self.g.channels[c].initial_tokens) {
                self.emit(c, None, 0, 0, None, None);
            }
        }
        loop {
            self.settle()?;
            let active = self.dispatch();
            let next = match self.next_instant(&active) {
                Some(t) if t <= self.cfg.horizon => t,
                _ => break,
            };
            let dt = &next - &self.now;
            self.now = next;
            for &a in &active {
                let job = self.current[a].as_mut().unwrap();
                job.remaining -= &dt;
                if job.remaining.is_zero() {
                    let job = self.current[a].take().unwrap();
                    if self.running == Some(a) {
                        self.running = None;
                    }
                    self.finish(a, job);
                }
            }
        }
        Ok(self.into_trace())
    }

    fn into_trace(self) -> SimTrace {
        let priorities = match &self.cfg.scheduler {
            Scheduler::SingleCore { priorities } => Some(priorities),
            Scheduler::UnlimitedCores => None,
        };
        SimTrace {
            schema_version: crate::report::SCHEMA_VERSION,
            horizon: self.cfg.horizon.clone(),
            actors: self
                .g
                .actors
                .iter()
                .map(|a| TraceActor {
                    id: a.id.clone(),
                    priority: priorities.and_then(|p| p.get(&a.id).copied()),
                    executes: executes(self.cfg, a),
                })
                .collect(),
            truncated: self
                .current
                .iter()
                .enumerate()
                .filter_map(|(a, j)| {
                    j.as_ref().map(|j| TruncatedJob {
                        actor: self.g.actors[a].id.clone(),
                        job: j.label,
                        remaining: j.remaining.clone(),
                    })
                })
                .collect(),
            buffered: self
                .g
                .channels
                .iter()
                .zip(&self.buffers)
                .map(|(c, b)| (c.id.clone(), b.iter().map(|t| t.id).collect()))
                .collect::<BTreeMap<_, _>>(),
            events: self.events,
        }
    }
}

fn executes(cfg: &SimConfig, a: &crate::graph::Actor) -> bool {
    cfg.exec_time.duration(a).is_positive()
        || cfg
            .overrides
            .iter()
            .any(|o| o.actor == a.id && o.duration.is_positive())
}

/// Runs `g` from time 0 up to the configured horizon.
///
/// Timed actors release job `n` at their `n`-th activation once inputs allow;
/// other actors release as soon as their inputs hold enough whole tokens.
/// Tokens are taken at release and produced at completion. Jobs of one actor
/// never overlap.
pub fn simulate(g: &Graph, cfg: &SimConfig) -> Result<SimTrace, SimError> {
    Engine::new(g, cfg)?.run()
}
