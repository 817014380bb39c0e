//! Topology matrix, repetition vector, tick and hyperperiod.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, GraphError, GraphIndex, Valuation};
use crate::rational::{rat_gcd_set, rat_lcm_set, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph has parametric rates; a mode is required")]
    ModeRequired,
    #[error("graph has no timed actor")]
    NoTimedActor,
    #[error("graph is inconsistent: {0}")]
    Inconsistent(Box<InconsistencyReport>),
    #[error("actor `{0}` has no timed ancestor to anchor its releases")]
    Unanchored(String),
    #[error("dependency cycle without enough initial tokens through `{actor}` job {job}")]
    CyclicDependency { actor: String, job: u64 },
    #[error(
        "infeasible: `{}` job {} has deadline {} before release {}",
        .0.actor, .0.job, .0.deadline, .0.release
    )]
    Infeasible(Box<InfeasibleJob>),
    #[error("job count overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfeasibleJob {
    pub actor: String,
    pub job: u64,
    pub release: Rational,
    pub deadline: Rational,
}

/// Signed rate matrix: one row per channel, one column per actor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyMatrix {
    pub actors: Vec<String>,
    pub channels: Vec<String>,
    pub entries: Vec<Vec<Rational>>,
    /// Rows of self-loop channels; they hold `prod - cons` on a single column.
    pub self_loops: Vec<bool>,
}

impl TopologyMatrix {
    pub fn entry(&self, channel: &str, actor: &str) -> Option<&Rational> {
        let i = self.channels.iter().position(|c| c == channel)?;
        let j = self.actors.iter().position(|a| a == actor)?;
        Some(&self.entries[i][j])
    }

    /// Nonzero entries of one row.
    pub fn row(&self, channel: &str) -> Vec<(&str, &Rational)> {
        let Some(i) = self.channels.iter().position(|c| c == channel) else {
            return Vec::new();
        };
        self.actors
            .iter()
            .zip(&self.entries[i])
            .filter(|(_, v)| !v.is_zero())
            .map(|(a, v)| (a.as_str(), v))
            .collect()
    }
}

fn valuation<'a>(g: &'a Graph, mode: Option<&str>) -> Result<Valuation<'a>, AnalysisError> {
    match mode {
        Some(m) => Ok(Valuation::Mode(g.mode(m)?)),
        None => Ok(Valuation::AllBranches),
    }
}

fn rates(g: &Graph, v: Valuation<'_>) -> Result<Vec<(Rational, Rational)>, AnalysisError> {
    g.channels
        .iter()
        .map(|c| {
            let p = c.prod_rate.resolve(v);
            let q = c.cons_rate.resolve(v);
            match (p, q) {
                (Some(p), Some(q)) => Ok((p, q)),
                _ => Err(AnalysisError::ModeRequired),
            }
        })
        .collect()
}

/// Builds the topology matrix. A graph with parametric rates needs a mode.
pub fn topology_matrix(g: &Graph, mode: Option<&str>) -> Result<TopologyMatrix, AnalysisError> {
    if mode.is_none() && g.has_parametric_rates() {
        return Err(AnalysisError::ModeRequired);
    }
    let idx = GraphIndex::new(g)?;
    let v = valuation(g, mode)?;
    let rates = rates(g, v)?;
    let n = g.actors.len();
    let mut entries = Vec::with_capacity(g.channels.len());
    let mut self_loops = Vec::with_capacity(g.channels.len());
    for (ci, (p, q)) in rates.iter().enumerate() {
        let mut row = vec![Rational::zero(); n];
        row[idx.producer[ci]] += p;
        row[idx.consumer[ci]] -= q;
        entries.push(row);
        self_loops.push(idx.producer[ci] == idx.consumer[ci]);
    }
    Ok(TopologyMatrix {
        actors: g.actors.iter().map(|a| a.id.clone()).collect(),
        channels: g.channels.iter().map(|c| c.id.clone()).collect(),
        entries,
        self_loops,
    })
}

/// Per-actor job counts of one graph iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepetitionVector {
    /// In actor declaration order.
    pub counts: Vec<(String, u64)>,
}

impl RepetitionVector {
    pub fn get(&self, actor: &str) -> Option<u64> {
        self.counts.iter().find(|(a, _)| a == actor).map(|(_, n)| *n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(a, n)| (a.as_str(), *n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inconsistency {
    /// Two paths between the same actors imply different job ratios; the
    /// ratios are consumer jobs per producer job.
    RatioConflict {
        channel: String,
        producer: String,
        consumer: String,
        expected: Rational,
        found: Rational,
    },
    SelfLoopImbalance { channel: String, actor: String },
    /// Timed actors of one component do not agree on the iteration length.
    FrequencyMismatch {
        first: String,
        first_span: Rational,
        second: String,
        second_span: Rational,
    },
    /// A timed actor forced to zero jobs by a zero rate.
    TimedActorIdle { actor: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InconsistencyReport {
    pub issue: Inconsistency,
    /// Actors on the undirected cycle closing the conflict, when there is one.
    pub cycle: Vec<String>,
}

impl fmt::Display for InconsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.issue {
            Inconsistency::RatioConflict {
                channel,
                producer,
                consumer,
                expected,
                found,
            } => write!(
                f,
                "channel {channel} ({producer} -> {consumer}) needs job ratio {expected} but the rest of the graph gives {found}"
            )?,
            Inconsistency::SelfLoopImbalance { channel, actor } => {
                write!(f, "self-loop {channel} on {actor} produces and consumes different amounts")?
            }
            Inconsistency::FrequencyMismatch {
                first,
                first_span,
                second,
                second_span,
            } => write!(
                f,
                "frequency mismatch: one iteration lasts {first_span} ms for {first} but {second_span} ms for {second}"
            )?,
            Inconsistency::TimedActorIdle { actor } => {
                write!(f, "timed actor {actor} would never fire")?
            }
        }
        if !self.cycle.is_empty() {
            write!(f, " [cycle: {}]", self.cycle.join(" - "))?;
        }
        Ok(())
    }
}

fn inconsistent(issue: Inconsistency, cycle: Vec<String>) -> AnalysisError {
    AnalysisError::Inconsistent(Box::new(InconsistencyReport { issue, cycle }))
}

/// Minimal vector plus the connected components it was scaled over.
pub(crate) struct Balance {
    pub(crate) counts: Vec<u64>,
    /// Component id per actor.
    pub(crate) component: Vec<usize>,
    pub(crate) components: usize,
}

pub(crate) fn balance(g: &Graph, v: Valuation<'_>) -> Result<Balance, AnalysisError> {
    let idx = GraphIndex::new(g)?;
    let rates = rates(g, v)?;
    let n = g.actors.len();

    let mut zero = vec![false; n];
    loop {
        let mut changed = false;
        for (ci, (p, q)) in rates.iter().enumerate() {
            let (a, b) = (idx.producer[ci], idx.consumer[ci]);
            if a == b {
                continue;
            }
            let a_zero = zero[a] || p.is_zero();
            let b_zero = zero[b] || q.is_zero();
            if a_zero && !q.is_zero() && !zero[b] {
                zero[b] = true;
                changed = true;
            }
            if b_zero && !p.is_zero() && !zero[a] {
                zero[a] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for ci in 0..g.channels.len() {
        let (a, b) = (idx.producer[ci], idx.consumer[ci]);
        if a != b && !zero[a] && !zero[b] {
            adj[a].push(ci);
            adj[b].push(ci);
        }
    }

    let mut ratio: Vec<Option<Rational>> = vec![None; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut component = vec![usize::MAX; n];
    let mut counts = vec![0u64; n];
    let mut components = 0;
    for root in 0..n {
        if component[root] != usize::MAX {
            continue;
        }
        let comp = components;
        components += 1;
        let mut members = vec![root];
        component[root] = comp;
        if !zero[root] {
            ratio[root] = Some(Rational::one());
        }
        // Zero-forced actors stay alone with a count of 0.
        let mut queue = VecDeque::from([root]);
        while let Some(a) = queue.pop_front() {
            for &ci in &adj[a] {
                let (p, q) = (idx.producer[ci], idx.consumer[ci]);
                let other = if p == a { q } else { p };
                if component[other] == usize::MAX {
                    component[other] = comp;
                    members.push(other);
                    queue.push_back(other);
                    parent[other] = Some(a);
                }
                let (pr, cr) = &rates[ci];
                let ra = ratio[a].clone().expect("nonzero component members have a ratio");
                // r_p * prod = r_q * cons
                let implied = if p == a { &(&ra * pr) / cr } else { &(&ra * cr) / pr };
                match &ratio[other] {
                    None => ratio[other] = Some(implied),
                    Some(existing) if *existing != implied => {
                        let found = if p == a { existing / &ra } else { &ra / existing };
                        return Err(inconsistent(
                            Inconsistency::RatioConflict {
                                channel: g.channels[ci].id.clone(),
                                producer: g.actors[p].id.clone(),
                                consumer: g.actors[q].id.clone(),
                                expected: pr / cr,
                                found,
                            },
                            tree_cycle(g, &parent, a, other),
                        ));
                    }
                    Some(_) => {}
                }
            }
        }

        let mut lcm = BigInt::one();
        let mut gcd = BigInt::zero();
        for &m in &members {
            if let Some(r) = &ratio[m] {
                lcm = lcm.lcm(r.denom());
            }
        }
        for &m in &members {
            if let Some(r) = &ratio[m] {
                gcd = gcd.gcd(&(r.numer() * (&lcm / r.denom())));
            }
        }
        for &m in &members {
            if let Some(r) = &ratio[m] {
                let scaled = r.numer() * (&lcm / r.denom()) / &gcd;
                counts[m] = scaled.to_u64().ok_or(AnalysisError::Overflow)?;
            }
        }
    }

    for (ci, (p, q)) in rates.iter().enumerate() {
        let a = idx.producer[ci];
        if a == idx.consumer[ci] && counts[a] > 0 && p != q {
            return Err(inconsistent(
                Inconsistency::SelfLoopImbalance {
                    channel: g.channels[ci].id.clone(),
                    actor: g.actors[a].id.clone(),
                },
                vec![g.actors[a].id.clone()],
            ));
        }
    }

    let mut span: Vec<Option<(usize, Rational)>> = vec![None; components];
    for (a, actor) in g.actors.iter().enumerate() {
        let Some(period) = actor.period() else { continue };
        if counts[a] == 0 {
            return Err(inconsistent(
                Inconsistency::TimedActorIdle {
                    actor: actor.id.clone(),
                },
                Vec::new(),
            ));
        }
        let s = &period * &Rational::from(counts[a]);
        match &span[component[a]] {
            None => span[component[a]] = Some((a, s)),
            Some((first, fs)) if *fs != s => {
                return Err(inconsistent(
                    Inconsistency::FrequencyMismatch {
                        first: g.actors[*first].id.clone(),
                        first_span: fs.clone(),
                        second: actor.id.clone(),
                        second_span: s,
                    },
                    Vec::new(),
                ));
            }
            Some(_) => {}
        }
    }

    Ok(Balance {
        counts,
        component,
        components,
    })
}

fn tree_cycle(g: &Graph, parent: &[Option<usize>], a: usize, b: usize) -> Vec<String> {
    let path = |mut x: usize| {
        let mut p = vec![x];
        while let Some(up) = parent[x] {
            p.push(up);
            x = up;
        }
        p
    };
    let pa = path(a);
    let pb = path(b);
    let mut cycle: Vec<usize> = Vec::new();
    for &x in &pa {
        cycle.push(x);
        if let Some(pos) = pb.iter().position(|&y| y == x) {
            cycle.extend(pb[..pos].iter().rev());
            break;
        }
    }
    cycle.into_iter().map(|i| g.actors[i].id.clone()).collect()
}

/// Smallest positive integer vector balancing every channel, scaled per
/// connected component. With parametric rates and no mode, every branch is
/// taken as active. Actors of a branch inactive in the given mode get 0.
pub fn repetition_vector(g: &Graph, mode: Option<&str>) -> Result<RepetitionVector, AnalysisError> {
    let v = valuation(g, mode)?;
    let b = balance(g, v)?;
    Ok(RepetitionVector {
        counts: g
            .actors
            .iter()
            .zip(b.counts)
            .map(|(a, n)| (a.id.clone(), n))
            .collect(),
    })
}

/// Rational gcd of all periods and nonzero phases, in ms.
pub fn compute_tick(g: &Graph) -> Result<Rational, AnalysisError> {
    let mut values = Vec::new();
    for a in g.timed_actors() {
        if let Some(p) = a.period() {
            values.push(p);
        }
        if let Some(ph) = a.kind.phase() {
            if ph.is_positive() {
                values.push(ph.clone());
            }
        }
    }
    if values.is_empty() {
        return Err(AnalysisError::NoTimedActor);
    }
    rat_gcd_set(values.iter()).map_err(|_| AnalysisError::NoTimedActor)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentPattern {
    pub actors: Vec<String>,
    /// Length of one minimal iteration, if the component holds a timed actor.
    pub iteration: Option<Rational>,
    /// Minimal iterations that fit in the hyperperiod.
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hyperperiod {
    /// In ms.
    pub length: Rational,
    pub jobs: RepetitionVector,
    pub components: Vec<ComponentPattern>,
}

/// Smallest span after which every component has completed a whole number
/// of iterations. Parametric rates are taken with every branch active.
pub fn compute_hyperperiod(g: &Graph) -> Result<Hyperperiod, AnalysisError> {
    if g.timed_actors().next().is_none() {
        return Err(AnalysisError::NoTimedActor);
    }
    let b = balance(g, Valuation::AllBranches)?;
    let mut iteration: Vec<Option<Rational>> = vec![None; b.components];
    for (a, actor) in g.actors.iter().enumerate() {
        if let Some(p) = actor.period() {
            iteration[b.component[a]] = Some(&p * &Rational::from(b.counts[a]));
        }
    }
    let length = rat_lcm_set(iteration.iter().flatten()).map_err(|_| AnalysisError::NoTimedActor)?;
    let multiplier: Vec<u64> = iteration
        .iter()
        .map(|it| match it {
            Some(span) => (&length / span).to_u64().ok_or(AnalysisError::Overflow),
            None => Ok(1),
        })
        .collect::<Result<_, _>>()?;
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut counts = Vec::with_capacity(g.actors.len());
    for (a, actor) in g.actors.iter().enumerate() {
        let c = b.component[a];
        members.entry(c).or_default().push(actor.id.clone());
        let n = b.counts[a]
            .checked_mul(multiplier[c])
            .ok_or(AnalysisError::Overflow)?;
        counts.push((actor.id.clone(), n));
    }
    Ok(Hyperperiod {
        length,
        jobs: RepetitionVector { counts },
        components: members
            .into_iter()
            .map(|(c, actors)| ComponentPattern {
                actors,
                iteration: iteration[c].clone(),
                iterations: multiplier[c],
            })
            .collect(),
    })
}
