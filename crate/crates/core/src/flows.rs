//! Per-port token flows: how many tokens the k-th job of an actor moves on
//! one channel end.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::graph::{ActorKind, ChannelClass, Graph, GraphIndex, Rate, Valuation};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PortFlow {
    /// The same rational amount every job.
    Uniform(Rational),
    /// One whole token on jobs `offset+1 ..= offset+weight` of every cycle.
    Slot { weight: u64, offset: u64, cycle: u64 },
    /// A branch port gated by a mode parameter.
    Param(String),
}

impl PortFlow {
    fn param_value(p: &str, v: Valuation<'_>) -> Rational {
        Rate::Parametric(p.to_string())
            .resolve(v)
            .unwrap_or_else(Rational::zero)
    }

    /// Total moved by jobs `1..=jobs` under a constant valuation.
    pub(crate) fn cumulative(&self, jobs: u64, v: Valuation<'_>) -> Rational {
        match self {
            PortFlow::Uniform(r) => r * &Rational::from(jobs),
            PortFlow::Slot {
                weight,
                offset,
                cycle,
            } => {
                let full = jobs / cycle;
                let rest = (jobs % cycle).saturating_sub(*offset).min(*weight);
                Rational::from(full * weight + rest)
            }
            PortFlow::Param(p) => &Self::param_value(p, v) * &Rational::from(jobs),
        }
    }

    /// Amount moved by job `job` (1-based).
    pub(crate) fn amount(&self, job: u64, v: Valuation<'_>) -> Rational {
        match self {
            PortFlow::Uniform(r) => r.clone(),
            PortFlow::Slot {
                weight,
                offset,
                cycle,
            } => {
                let pos = (job - 1) % cycle;
                if pos >= *offset && pos < offset + weight {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
            PortFlow::Param(p) => Self::param_value(p, v),
        }
    }

    /// Smallest `k` with `cumulative(k) >= target`; `None` if never reached.
    pub(crate) fn jobs_to_reach(&self, target: &Rational, v: Valuation<'_>) -> Option<u64> {
        if !target.is_positive() {
            return Some(0);
        }
        let per_job = match self {
            PortFlow::Uniform(r) => r.clone(),
            PortFlow::Param(p) => Self::param_value(p, v),
            PortFlow::Slot {
                weight,
                offset,
                cycle,
            } => {
                if *weight == 0 {
                    return None;
                }
                let t = target.ceil().to_u64()?;
                let q = (t - 1) / weight;
                let r = (t - 1) % weight;
                return q.checked_mul(*cycle)?.checked_add(offset + r + 1);
            }
        };
        if !per_job.is_positive() {
            return None;
        }
        (target / &per_job).ceil().to_u64()
    }

    /// Smallest `k` with `cumulative(k) > level`; `None` if never.
    pub(crate) fn jobs_to_exceed(&self, level: &Rational, v: Valuation<'_>) -> Option<u64> {
        if level.is_negative() {
            return Some(1);
        }
        match self {
            PortFlow::Slot { .. } => {
                let next = Rational::from_big_integer(level.floor() + BigInt::one());
                self.jobs_to_reach(&next, v)
            }
            PortFlow::Uniform(_) | PortFlow::Param(_) => {
                let per_job = match self {
                    PortFlow::Uniform(r) => r.clone(),
                    PortFlow::Param(p) => Self::param_value(p, v),
                    PortFlow::Slot { .. } => unreachable!(),
                };
                if !per_job.is_positive() {
                    return None;
                }
                ((level / &per_job).floor() + BigInt::one()).to_u64()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Flows {
    pub(crate) prod: Vec<PortFlow>,
    pub(crate) cons: Vec<PortFlow>,
}

fn rate_flow(rate: &Rate) -> PortFlow {
    match rate {
        Rate::Constant(r) => PortFlow::Uniform(r.clone()),
        Rate::Parametric(p) => PortFlow::Param(p.clone()),
    }
}

/// Slot flows for the fan side of a plain splitter or joiner: each job
/// routes one token, channels served in lexicographic order of their ids
/// with a share proportional to their rate.
fn slots(g: &Graph, fan: &[usize], rate_of: impl Fn(usize) -> Option<Rational>) -> Option<Vec<(usize, PortFlow)>> {
    let mut ports: Vec<(usize, Rational)> = fan
        .iter()
        .map(|&c| rate_of(c).map(|r| (c, r)))
        .collect::<Option<_>>()?;
    if ports.iter().map(|(_, r)| r).sum::<Rational>() != Rational::one() {
        return None;
    }
    ports.sort_by(|a, b| g.channels[a.0].id.cmp(&g.channels[b.0].id));
    let lcm = ports
        .iter()
        .fold(BigInt::one(), |acc, (_, r)| acc.lcm(r.denom()));
    let scale = Rational::from_big_integer(lcm);
    let weights: Vec<u64> = ports
        .iter()
        .map(|(_, r)| (r * &scale).to_u64())
        .collect::<Option<_>>()?;
    let cycle: u64 = weights.iter().sum();
    if cycle.is_zero() {
        return None;
    }
    let mut offset = 0;
    let mut out = Vec::new();
    for ((c, _), w) in ports.iter().zip(weights) {
        out.push((
            *c,
            PortFlow::Slot {
                weight: w,
                offset,
                cycle,
            },
        ));
        offset += w;
    }
    Some(out)
}

pub(crate) fn port_flows(g: &Graph, idx: &GraphIndex) -> Flows {
    let mut prod: Vec<PortFlow> = g.channels.iter().map(|c| rate_flow(&c.prod_rate)).collect();
    let mut cons: Vec<PortFlow> = g.channels.iter().map(|c| rate_flow(&c.cons_rate)).collect();
    for (a, actor) in g.actors.iter().enumerate() {
        let data = |list: &[usize]| -> Vec<usize> {
            list.iter()
                .copied()
                .filter(|&c| g.channels[c].class == ChannelClass::Data)
                .collect()
        };
        match actor.kind {
            ActorKind::Splitter => {
                let fan = data(&idx.outputs[a]);
                if let Some(s) = slots(g, &fan, |c| g.channels[c].prod_rate.constant().cloned()) {
                    for (c, f) in s {
                        prod[c] = f;
                    }
                }
            }
            ActorKind::Joiner => {
                let fan = data(&idx.inputs[a]);
                if let Some(s) = slots(g, &fan, |c| g.channels[c].cons_rate.constant().cloned()) {
                    for (c, f) in s {
                        cons[c] = f;
                    }
                }
            }
            _ => {}
        }
    }
    Flows { prod, cons }
}
