//! The RMDF graph model: actors, channels, modes and control areas.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::rational::Rational;

/// Default best-case execution time of a computing actor, 0.12 ms.
pub fn default_bcet() -> Rational {
    Rational::new(3, 25).expect("constant")
}

/// Default worst-case execution time of a computing actor, 0.2 ms.
pub fn default_wcet() -> Rational {
    Rational::new(1, 5).expect("constant")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActorKind {
    Usual,
    /// Frequency in Hz, phase in ms.
    Timed {
        frequency: Rational,
        phase: Rational,
    },
    Duplicater,
    Splitter,
    Joiner,
    ControlledSplitter,
    ControlledJoiner,
    ModeDecider,
}

impl ActorKind {
    /// Routing actors move tokens around and take no time.
    pub fn is_routing(&self) -> bool {
        matches!(
            self,
            ActorKind::Duplicater
                | ActorKind::Splitter
                | ActorKind::Joiner
                | ActorKind::ControlledSplitter
                | ActorKind::ControlledJoiner
        )
    }

    pub fn is_timed(&self) -> bool {
        matches!(self, ActorKind::Timed { .. })
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            ActorKind::Usual => "usual",
            ActorKind::Timed { .. } => "timed",
            ActorKind::Duplicater => "duplicater",
            ActorKind::Splitter => "splitter",
            ActorKind::Joiner => "joiner",
            ActorKind::ControlledSplitter => "controlled-splitter",
            ActorKind::ControlledJoiner => "controlled-joiner",
            ActorKind::ModeDecider => "mode-decider",
        }
    }

    /// Period in ms (`1000 / frequency`) of a timed actor.
    pub fn period(&self) -> Option<Rational> {
        match self {
            ActorKind::Timed { frequency, .. } if frequency.is_positive() => {
                Some(&Rational::integer(1000) / frequency)
            }
            _ => None,
        }
    }

    pub fn phase(&self) -> Option<&Rational> {
        match self {
            ActorKind::Timed { phase, .. } => Some(phase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Actor {
    pub id: String,
    pub kind: ActorKind,
    pub bcet: Rational,
    pub wcet: Rational,
}

impl Actor {
    /// An actor with the default execution times for its kind.
    pub fn new(id: impl Into<String>, kind: ActorKind) -> Self {
        let (bcet, wcet) = if kind.is_routing() {
            (Rational::zero(), Rational::zero())
        } else {
            (default_bcet(), default_wcet())
        };
        Actor {
            id: id.into(),
            kind,
            bcet,
            wcet,
        }
    }

    pub fn usual(id: impl Into<String>) -> Self {
        Actor::new(id, ActorKind::Usual)
    }

    pub fn timed(id: impl Into<String>, frequency: Rational, phase: Rational) -> Self {
        Actor::new(id, ActorKind::Timed { frequency, phase })
    }

    pub fn with_times(mut self, bcet: Rational, wcet: Rational) -> Self {
        self.bcet = bcet;
        self.wcet = wcet;
        self
    }

    pub fn period(&self) -> Option<Rational> {
        self.kind.period()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rate {
    Constant(Rational),
    Parametric(String),
}

impl Rate {
    pub fn constant(&self) -> Option<&Rational> {
        match self {
            Rate::Constant(v) => Some(v),
            Rate::Parametric(_) => None,
        }
    }

    pub fn parameter(&self) -> Option<&str> {
        match self {
            Rate::Parametric(p) => Some(p),
            Rate::Constant(_) => None,
        }
    }

    /// Value under a valuation; `None` for a parameter the mode does not bind.
    pub fn resolve(&self, valuation: Valuation<'_>) -> Option<Rational> {
        match (self, valuation) {
            (Rate::Constant(v), _) => Some(v.clone()),
            (Rate::Parametric(_), Valuation::AllBranches) => Some(Rational::one()),
            (Rate::Parametric(p), Valuation::Mode(mode)) => {
                mode.assignment.get(p).map(|&v| Rational::integer(v as i64))
            }
        }
    }
}

impl From<Rational> for Rate {
    fn from(v: Rational) -> Self {
        Rate::Constant(v)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Constant(v) => write!(f, "{v}"),
            Rate::Parametric(p) => f.write_str(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChannelClass {
    Data,
    Control,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub id: String,
    pub producer: String,
    pub consumer: String,
    pub prod_rate: Rate,
    pub cons_rate: Rate,
    pub initial_tokens: Rational,
    pub class: ChannelClass,
}

impl Channel {
    pub fn data(
        id: impl Into<String>,
        producer: impl Into<String>,
        consumer: impl Into<String>,
        prod_rate: impl Into<Rate>,
        cons_rate: impl Into<Rate>,
    ) -> Self {
        Channel {
            id: id.into(),
            producer: producer.into(),
            consumer: consumer.into(),
            prod_rate: prod_rate.into(),
            cons_rate: cons_rate.into(),
            initial_tokens: Rational::zero(),
            class: ChannelClass::Data,
        }
    }

    /// A control channel with unit rates.
    pub fn control(
        id: impl Into<String>,
        producer: impl Into<String>,
        consumer: impl Into<String>,
    ) -> Self {
        Channel {
            class: ChannelClass::Control,
            ..Channel::data(id, producer, consumer, Rational::one(), Rational::one())
        }
    }

    pub fn with_init(mut self, tokens: Rational) -> Self {
        self.initial_tokens = tokens;
        self
    }

    pub fn is_self_loop(&self) -> bool {
        self.producer == self.consumer
    }
}

/// One valuation of the parametric rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mode {
    pub name: String,
    pub assignment: BTreeMap<String, u8>,
}

impl Mode {
    pub fn new<I, S>(name: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = (S, u8)>,
        S: Into<String>,
    {
        Mode {
            name: name.into(),
            assignment: values.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModeTable {
    pub modes: Vec<Mode>,
}

impl ModeTable {
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Mode> {
        self.modes.iter().find(|m| m.name == name)
    }
}

/// How parametric rates are resolved for an analysis.
#[derive(Debug, Clone, Copy)]
pub enum Valuation<'a> {
    /// Every branch active on every iteration: the envelope used by timing.
    AllBranches,
    Mode(&'a Mode),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    pub actors: Vec<Actor>,
    pub channels: Vec<Channel>,
    pub modes: ModeTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown actor `{0}`")]
    UnknownActor(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("actor `{0}` is not a mode decider")]
    NotADecider(String),
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn add_actor(&mut self, actor: Actor) -> &mut Self {
        self.actors.push(actor);
        self
    }

    pub fn add_channel(&mut self, channel: Channel) -> &mut Self {
        self.channels.push(channel);
        self
    }

    pub fn add_mode(&mut self, mode: Mode) -> &mut Self {
        self.modes.modes.push(mode);
        self
    }

    pub fn actor(&self, id: &str) -> Option<&Actor> {
        self.actors.iter().find(|a| a.id == id)
    }

    pub fn actor_mut(&mut self, id: &str) -> Option<&mut Actor> {
        self.actors.iter_mut().find(|a| a.id == id)
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn channel_mut(&mut self, id: &str) -> Option<&mut Channel> {
        self.channels.iter_mut().find(|c| c.id == id)
    }

    pub fn mode(&self, name: &str) -> Result<&Mode, GraphError> {
        self.modes
            .get(name)
            .ok_or_else(|| GraphError::UnknownMode(name.to_string()))
    }

    pub fn has_parametric_rates(&self) -> bool {
        self.channels.iter().any(|c| {
            matches!(c.prod_rate, Rate::Parametric(_)) || matches!(c.cons_rate, Rate::Parametric(_))
        })
    }

    pub fn timed_actors(&self) -> impl Iterator<Item = &Actor> {
        self.actors.iter().filter(|a| a.kind.is_timed())
    }

    /// Copy of the graph with the initial tokens of one channel replaced.
    pub fn with_initial_tokens(&self, channel: &str, tokens: Rational) -> Result<Graph, GraphError> {
        let mut g = self.clone();
        g.channel_mut(channel)
            .ok_or_else(|| GraphError::UnknownChannel(channel.to_string()))?
            .initial_tokens = tokens;
        Ok(g)
    }

    /// The subgraph induced by `keep`: channels with an endpoint outside are dropped.
    pub fn restrict<'a, I>(&self, keep: I) -> Result<Graph, GraphError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let keep: BTreeSet<&str> = keep.into_iter().collect();
        for id in &keep {
            if self.actor(id).is_none() {
                return Err(GraphError::UnknownActor(id.to_string()));
            }
        }
        Ok(Graph {
            actors: self
                .actors
                .iter()
                .filter(|a| keep.contains(a.id.as_str()))
                .cloned()
                .collect(),
            channels: self
                .channels
                .iter()
                .filter(|c| keep.contains(c.producer.as_str()) && keep.contains(c.consumer.as_str()))
                .cloned()
                .collect(),
            modes: self.modes.clone(),
        })
    }
}

/// Dense adjacency over a graph whose channel endpoints all resolve.
#[derive(Debug, Clone)]
pub(crate) struct GraphIndex {
    pub(crate) by_id: HashMap<String, usize>,
    pub(crate) inputs: Vec<Vec<usize>>,
    pub(crate) outputs: Vec<Vec<usize>>,
    pub(crate) producer: Vec<usize>,
    pub(crate) consumer: Vec<usize>,
}

impl GraphIndex {
    pub(crate) fn new(g: &Graph) -> Result<Self, GraphError> {
        let by_id: HashMap<String, usize> = g
            .actors
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        let n = g.actors.len();
        let mut inputs = vec![Vec::new(); n];
        let mut outputs = vec![Vec::new(); n];
        let mut producer = Vec::with_capacity(g.channels.len());
        let mut consumer = Vec::with_capacity(g.channels.len());
        for (ci, c) in g.channels.iter().enumerate() {
            let p = *by_id
                .get(&c.producer)
                .ok_or_else(|| GraphError::UnknownActor(c.producer.clone()))?;
            let q = *by_id
                .get(&c.consumer)
                .ok_or_else(|| GraphError::UnknownActor(c.consumer.clone()))?;
            outputs[p].push(ci);
            inputs[q].push(ci);
            producer.push(p);
            consumer.push(q);
        }
        Ok(GraphIndex {
            by_id,
            inputs,
            outputs,
            producer,
            consumer,
        })
    }

    pub(crate) fn actor(&self, id: &str) -> Result<usize, GraphError> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownActor(id.to_string()))
    }

    /// Actors reachable from `roots` along channels (roots included).
    pub(crate) fn reachable_from(&self, roots: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut seen = vec![false; self.inputs.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for r in roots {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
        while let Some(a) = queue.pop_front() {
            for &c in &self.outputs[a] {
                let q = self.consumer[c];
                if !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        seen
    }
}

/// Controlled routing actors a decider governs, found by following control
/// channels through duplicaters.
fn governed_routing(g: &Graph, idx: &GraphIndex, decider: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut splitters = BTreeSet::new();
    let mut joiners = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![decider];
    while let Some(a) = stack.pop() {
        if !seen.insert(a) {
            continue;
        }
        for &c in &idx.outputs[a] {
            if g.channels[c].class != ChannelClass::Control {
                continue;
            }
            let q = idx.consumer[c];
            match g.actors[q].kind {
                ActorKind::ControlledSplitter => {
                    splitters.insert(q);
                }
                ActorKind::ControlledJoiner => {
                    joiners.insert(q);
                }
                ActorKind::Duplicater => stack.push(q),
                _ => {}
            }
        }
    }
    (splitters, joiners)
}

fn area_members(g: &Graph, idx: &GraphIndex, splitters: &BTreeSet<usize>, joiners: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut area = BTreeSet::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in splitters {
        for &c in &idx.outputs[s] {
            if g.channels[c].class == ChannelClass::Data {
                queue.push_back(idx.consumer[c]);
            }
        }
    }
    while let Some(a) = queue.pop_front() {
        if joiners.contains(&a) || splitters.contains(&a) || !area.insert(a) {
            continue;
        }
        for &c in &idx.outputs[a] {
            if g.channels[c].class == ChannelClass::Data {
                queue.push_back(idx.consumer[c]);
            }
        }
    }
    area
}

/// The actors conditioned by a mode decider: everything on the paths between
/// the controlled splitters and controlled joiners it governs, exclusive of
/// those routing actors.
pub fn control_area(g: &Graph, decider: &str) -> Result<BTreeSet<String>, GraphError> {
    let idx = GraphIndex::new(g)?;
    let d = idx.actor(decider)?;
    if g.actors[d].kind != ActorKind::ModeDecider {
        return Err(GraphError::NotADecider(decider.to_string()));
    }
    let (splitters, joiners) = governed_routing(g, &idx, d);
    Ok(area_members(g, &idx, &splitters, &joiners)
        .into_iter()
        .map(|a| g.actors[a].id.clone())
        .collect())
}

/// For every actor in some control area, the index of its governing decider.
pub(crate) fn area_owner(g: &Graph, idx: &GraphIndex) -> Vec<Option<usize>> {
    let mut owner = vec![None; g.actors.len()];
    for (d, a) in g.actors.iter().enumerate() {
        if a.kind != ActorKind::ModeDecider {
            continue;
        }
        let (splitters, joiners) = governed_routing(g, idx, d);
        for m in area_members(g, idx, &splitters, &joiners) {
            owner[m] = Some(d);
        }
    }
    owner
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    DuplicateActor,
    DuplicateChannel,
    UnknownActor,
    InvalidExecutionTime,
    RoutingExecutionTime,
    InvalidTiming,
    NonPositiveRate,
    NegativeInitialTokens,
    UnboundParameter,
    ParameterValue,
    MisplacedParameter,
    UngatedBranch,
    UncontrolledRoutingActor,
    NotOneHot,
    ControlChannelSource,
    ControlChannelTarget,
    ControlChannelRate,
    DeciderWithoutControl,
    RoutingArity,
    RoutingConservation,
    BranchEscapesArea,
    UnclosedArea,
}

impl ViolationKind {
    pub fn label(&self) -> &'static str {
        match self {
            ViolationKind::DuplicateActor => "duplicate actor id",
            ViolationKind::DuplicateChannel => "duplicate channel id",
            ViolationKind::UnknownActor => "unknown actor reference",
            ViolationKind::InvalidExecutionTime => "invalid execution time",
            ViolationKind::RoutingExecutionTime => "routing actor with nonzero execution time",
            ViolationKind::InvalidTiming => "invalid frequency or phase",
            ViolationKind::NonPositiveRate => "non-positive constant rate",
            ViolationKind::NegativeInitialTokens => "negative initial tokens",
            ViolationKind::UnboundParameter => "unbound mode parameter",
            ViolationKind::ParameterValue => "parameter value outside {0, 1}",
            ViolationKind::MisplacedParameter => "parametric rate outside a controlled routing port",
            ViolationKind::UngatedBranch => "controlled routing port without a parametric rate",
            ViolationKind::UncontrolledRoutingActor => "uncontrolled routing actor",
            ViolationKind::NotOneHot => "mode does not select exactly one branch",
            ViolationKind::ControlChannelSource => "control channel not fed by a mode decider",
            ViolationKind::ControlChannelTarget => "control channel ends outside a controlled routing actor",
            ViolationKind::ControlChannelRate => "control channel rate is not 1",
            ViolationKind::DeciderWithoutControl => "mode decider without control output",
            ViolationKind::RoutingArity => "routing actor has the wrong number of ports",
            ViolationKind::RoutingConservation => "routing actor does not conserve tokens",
            ViolationKind::BranchEscapesArea => "branch escapes its control area",
            ViolationKind::UnclosedArea => "control area has no controlled joiner",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.subject)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    /// Sorted, without duplicates.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

struct Collector(BTreeSet<Violation>);

impl Collector {
    fn push(&mut self, kind: ViolationKind, subject: impl Into<String>, detail: impl Into<String>) {
        self.0.insert(Violation {
            kind,
            subject: subject.into(),
            detail: detail.into(),
        });
    }
}

/// Checks every structural rule and reports all violations found.
///
/// The control-area rules enforced are: one-hot mode valuations on each
/// controlled splitter/joiner, parametric rates only on their branch ports,
/// control tokens flowing from a decider through duplicaters only, and no
/// branch actor exchanging data with actors outside its area other than the
/// governing splitter and joiner.
pub fn validate_graph(g: &Graph) -> ValidationReport {
    let mut out = Collector(BTreeSet::new());

    let mut seen = BTreeSet::new();
    for a in &g.actors {
        if !seen.insert(a.id.as_str()) {
            out.push(ViolationKind::DuplicateActor, &a.id, "");
        }
    }
    let mut seen = BTreeSet::new();
    for c in &g.channels {
        if !seen.insert(c.id.as_str()) {
            out.push(ViolationKind::DuplicateChannel, &c.id, "");
        }
    }

    for a in &g.actors {
        if a.bcet.is_negative() || a.wcet < a.bcet {
            out.push(
                ViolationKind::InvalidExecutionTime,
                &a.id,
                format!("bcet {} wcet {}", a.bcet, a.wcet),
            );
        }
        if a.kind.is_routing() && (!a.bcet.is_zero() || !a.wcet.is_zero()) {
            out.push(ViolationKind::RoutingExecutionTime, &a.id, "");
        }
        if let ActorKind::Timed { frequency, phase } = &a.kind {
            if !frequency.is_positive() {
                out.push(ViolationKind::InvalidTiming, &a.id, format!("frequency {frequency} Hz"));
            } else {
                let period = a.period().expect("positive frequency");
                if phase.is_negative() || *phase >= period {
                    out.push(
                        ViolationKind::InvalidTiming,
                        &a.id,
                        format!("phase {phase} ms not in [0, {period})"),
                    );
                }
            }
        }
    }

    let params: BTreeSet<&str> = g
        .channels
        .iter()
        .flat_map(|c| [c.prod_rate.parameter(), c.cons_rate.parameter()])
        .flatten()
        .collect();
    for p in &params {
        if g.modes.is_empty() {
            out.push(ViolationKind::UnboundParameter, *p, "no modes declared");
        }
        for m in &g.modes.modes {
            if !m.assignment.contains_key(*p) {
                out.push(ViolationKind::UnboundParameter, *p, format!("mode {}", m.name));
            }
        }
    }
    for m in &g.modes.modes {
        for (p, v) in &m.assignment {
            if *v > 1 {
                out.push(ViolationKind::ParameterValue, p.as_str(), format!("mode {} sets {v}", m.name));
            }
        }
    }

    for c in &g.channels {
        for rate in [&c.prod_rate, &c.cons_rate] {
            if let Rate::Constant(v) = rate {
                if !v.is_positive() {
                    out.push(ViolationKind::NonPositiveRate, &c.id, format!("rate {v}"));
                }
            }
        }
        if c.initial_tokens.is_negative() {
            out.push(ViolationKind::NegativeInitialTokens, &c.id, "");
        }
        for end in [&c.producer, &c.consumer] {
            if g.actor(end).is_none() {
                out.push(ViolationKind::UnknownActor, end.as_str(), format!("channel {}", c.id));
            }
        }
    }

    // Everything below needs resolvable endpoints.
    let Ok(idx) = GraphIndex::new(g) else {
        return ValidationReport {
            violations: out.0.into_iter().collect(),
        };
    };

    for (ci, c) in g.channels.iter().enumerate() {
        let p = &g.actors[idx.producer[ci]];
        let q = &g.actors[idx.consumer[ci]];
        if c.prod_rate.parameter().is_some() && p.kind != ActorKind::ControlledSplitter {
            out.push(ViolationKind::MisplacedParameter, &c.id, "production side");
        }
        if c.cons_rate.parameter().is_some() && q.kind != ActorKind::ControlledJoiner {
            out.push(ViolationKind::MisplacedParameter, &c.id, "consumption side");
        }
        if c.class == ChannelClass::Control {
            let one = Rational::one();
            if c.prod_rate.constant() != Some(&one) || c.cons_rate.constant() != Some(&one) {
                out.push(ViolationKind::ControlChannelRate, &c.id, "");
            }
            let source_ok = match p.kind {
                ActorKind::ModeDecider => true,
                ActorKind::Duplicater => idx.inputs[idx.producer[ci]]
                    .iter()
                    .all(|&i| g.channels[i].class == ChannelClass::Control),
                _ => false,
            };
            if !source_ok {
                out.push(ViolationKind::ControlChannelSource, &c.id, p.id.as_str());
            }
            if !matches!(
                q.kind,
                ActorKind::ControlledSplitter | ActorKind::ControlledJoiner | ActorKind::Duplicater
            ) {
                out.push(ViolationKind::ControlChannelTarget, &c.id, q.id.as_str());
            }
        }
    }

    for (ai, a) in g.actors.iter().enumerate() {
        let data_in: Vec<usize> = idx.inputs[ai]
            .iter()
            .copied()
            .filter(|&c| g.channels[c].class == ChannelClass::Data)
            .collect();
        let control_in = idx.inputs[ai].len() - data_in.len();
        let data_out: Vec<usize> = idx.outputs[ai]
            .iter()
            .copied()
            .filter(|&c| g.channels[c].class == ChannelClass::Data)
            .collect();
        let control_out = idx.outputs[ai].len() - data_out.len();
        match a.kind {
            ActorKind::ModeDecider => {
                if control_out == 0 {
                    out.push(ViolationKind::DeciderWithoutControl, &a.id, "");
                }
            }
            ActorKind::Duplicater => {
                if idx.inputs[ai].len() != 1 {
                    out.push(ViolationKind::RoutingArity, &a.id, "duplicater needs one input");
                }
            }
            ActorKind::Splitter | ActorKind::Joiner => {
                let splitter = a.kind == ActorKind::Splitter;
                let (single, many) = if splitter {
                    (&data_in, &data_out)
                } else {
                    (&data_out, &data_in)
                };
                if single.len() != 1 || many.is_empty() || control_in + control_out > 0 {
                    out.push(ViolationKind::RoutingArity, &a.id, "");
                    continue;
                }
                let unit = |c: usize| {
                    let ch = &g.channels[c];
                    let r = if splitter { &ch.cons_rate } else { &ch.prod_rate };
                    r.constant() == Some(&Rational::one())
                };
                let share = |c: usize| {
                    let ch = &g.channels[c];
                    let r = if splitter { &ch.prod_rate } else { &ch.cons_rate };
                    r.constant().cloned()
                };
                let shares: Option<Rational> = many.iter().map(|&c| share(c)).sum();
                if !unit(single[0]) || shares != Some(Rational::one()) {
                    out.push(
                        ViolationKind::RoutingConservation,
                        &a.id,
                        "one token in, one token out per job",
                    );
                }
            }
            ActorKind::ControlledSplitter | ActorKind::ControlledJoiner => {
                let splitter = a.kind == ActorKind::ControlledSplitter;
                if control_in == 0 {
                    out.push(ViolationKind::UncontrolledRoutingActor, &a.id, "");
                }
                if control_in > 1 {
                    out.push(ViolationKind::RoutingArity, &a.id, "more than one control input");
                }
                let branches = if splitter { &data_out } else { &data_in };
                let trunk = if splitter { &data_in } else { &data_out };
                if trunk.len() != 1 || branches.is_empty() {
                    out.push(ViolationKind::RoutingArity, &a.id, "");
                }
                let branch_params: Vec<Option<&str>> = branches
                    .iter()
                    .map(|&c| {
                        let ch = &g.channels[c];
                        if splitter {
                            ch.prod_rate.parameter()
                        } else {
                            ch.cons_rate.parameter()
                        }
                    })
                    .collect();
                for (&c, p) in branches.iter().zip(&branch_params) {
                    if p.is_none() {
                        out.push(ViolationKind::UngatedBranch, &g.channels[c].id, a.id.as_str());
                    }
                }
                for m in &g.modes.modes {
                    let active = branch_params
                        .iter()
                        .flatten()
                        .filter(|p| m.assignment.get(**p) == Some(&1))
                        .count();
                    if active != 1 {
                        out.push(
                            ViolationKind::NotOneHot,
                            &a.id,
                            format!("mode {} activates {active} branches", m.name),
                        );
                    }
                }
            }
            ActorKind::Usual | ActorKind::Timed { .. } => {}
        }
    }

    for (d, a) in g.actors.iter().enumerate() {
        if a.kind != ActorKind::ModeDecider {
            continue;
        }
        let (splitters, joiners) = governed_routing(g, &idx, d);
        if !splitters.is_empty() && joiners.is_empty() {
            out.push(ViolationKind::UnclosedArea, &a.id, "");
        }
        let area = area_members(g, &idx, &splitters, &joiners);
        for &m in &area {
            for &c in &idx.inputs[m] {
                let p = idx.producer[c];
                if p != m && !area.contains(&p) && !splitters.contains(&p) {
                    out.push(
                        ViolationKind::BranchEscapesArea,
                        &g.actors[m].id,
                        format!("input {} from outside", g.channels[c].id),
                    );
                }
            }
            for &c in &idx.outputs[m] {
                let q = idx.consumer[c];
                if q != m && !area.contains(&q) && !joiners.contains(&q) {
                    out.push(
                        ViolationKind::BranchEscapesArea,
                        &g.actors[m].id,
                        format!("output {} leaves the area", g.channels[c].id),
                    );
                }
            }
        }
    }

    ValidationReport {
        violations: out.0.into_iter().collect(),
    }
}
