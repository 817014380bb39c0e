//! Generators and oracles shared by the property suites.
#![allow(dead_code)]

pub mod props;

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::Index;
use rmdf::{Actor, ActorKind, Channel, ChannelClass, Graph, Mode, Rate, Rational};

pub fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d).unwrap()
}

/// Raw material for a connected, consistent graph with one timed source.
#[derive(Debug, Clone)]
pub struct DagSeed {
    pub q: Vec<u64>,
    pub parents: Vec<Index>,
    pub extra: Vec<(Index, Index)>,
    pub scales: Vec<(u64, u64)>,
    pub frequency: u64,
    pub times: Vec<(u64, u64)>,
    pub self_loops: Vec<bool>,
}

pub fn dag_seed(max_actors: usize) -> impl Strategy<Value = DagSeed> {
    (2..=max_actors).prop_flat_map(|n| {
        (
            prop::collection::vec(1u64..=4, n),
            prop::collection::vec(any::<Index>(), n - 1),
            prop::collection::vec((any::<Index>(), any::<Index>()), 0..=3),
            prop::collection::vec((1u64..=3, 1u64..=3), 12),
            prop::sample::select(vec![1u64, 2, 4, 5, 10, 20]),
            prop::collection::vec((0u64..=5, 0u64..=5), n),
            prop::collection::vec(prop::bool::weighted(0.2), n),
        )
            .prop_map(|(q, parents, extra, scales, frequency, times, self_loops)| DagSeed {
                q,
                parents,
                extra,
                scales,
                frequency,
                times,
                self_loops,
            })
    })
}

impl DagSeed {
    /// At most 12 channels: a spanning tree from actor 0, a few forward
    /// edges, then self-loops while room remains.
    pub fn graph(&self, with_self_loops: bool) -> Graph {
        let n = self.q.len();
        let mut g = Graph::new();
        for (i, (b, extra)) in self.times.iter().enumerate() {
            let (bcet, wcet) = (r(*b as i64, 10), r((*b + *extra) as i64, 10));
            let actor = if i == 0 {
                Actor::timed("a0", Rational::from(self.frequency), Rational::zero())
            } else {
                Actor::usual(format!("a{i}"))
            };
            g.add_actor(actor.with_times(bcet, wcet));
        }
        let mut edges: Vec<(usize, usize)> = (1..n).map(|c| (self.parents[c - 1].index(c), c)).collect();
        for (x, y) in &self.extra {
            let (a, b) = (x.index(n), y.index(n));
            if a != b {
                edges.push((a.min(b), a.max(b)));
            }
        }
        let mut k = 0;
        for (p, c) in edges {
            let (m, d) = self.scales[k % self.scales.len()];
            let prod = &Rational::from(self.q[c] * m) / &Rational::from(d);
            let cons = &Rational::from(self.q[p] * m) / &Rational::from(d);
            g.add_channel(Channel::data(format!("e{k}"), format!("a{p}"), format!("a{c}"), prod, cons));
            k += 1;
        }
        if with_self_loops {
            for (a, on) in self.self_loops.iter().enumerate() {
                if *on && k < 12 {
                    let rate = r(self.scales[a].0 as i64, self.scales[a].1 as i64);
                    g.add_channel(
                        Channel::data(format!("s{k}"), format!("a{a}"), format!("a{a}"), rate.clone(), rate.clone())
                            .with_init(rate),
                    );
                    k += 1;
                }
            }
        }
        g
    }
}

fn rational() -> impl Strategy<Value = Rational> {
    (1i64..=60, 1i64..=12).prop_map(|(n, d)| r(n, d))
}

fn name() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_ #:=\"\\\\\\[\\]>-]{1,9}"
}

fn kind() -> impl Strategy<Value = ActorKind> {
    prop_oneof![
        Just(ActorKind::Usual),
        (rational(), 0i64..=5).prop_map(|(frequency, p)| ActorKind::Timed {
            frequency,
            phase: r(p, 3)
        }),
        Just(ActorKind::Duplicater),
        Just(ActorKind::Splitter),
        Just(ActorKind::Joiner),
        Just(ActorKind::ControlledSplitter),
        Just(ActorKind::ControlledJoiner),
        Just(ActorKind::ModeDecider),
    ]
}

fn rate() -> impl Strategy<Value = Rate> {
    prop_oneof![
        3 => rational().prop_map(Rate::Constant),
        1 => prop::sample::select(vec!["m1", "m2", "m3"]).prop_map(|p| Rate::Parametric(p.to_string())),
    ]
}

/// Any syntactically representable graph, valid or not.
pub fn any_graph() -> impl Strategy<Value = Graph> {
    (
        prop::collection::btree_set(name(), 1..=8),
        prop::collection::vec((kind(), rational(), rational()), 8),
        prop::collection::vec(
            (any::<Index>(), any::<Index>(), rate(), rate(), 0i64..=4, any::<bool>()),
            0..=12,
        ),
        prop::collection::btree_map("[a-z][a-z0-9]{0,5}", prop::collection::vec(0u8..=1, 3), 0..=3),
    )
        .prop_map(|(names, actors, channels, modes)| {
            let names: Vec<String> = names.into_iter().collect();
            let mut g = Graph::new();
            for (id, (kind, a, b)) in names.iter().zip(actors) {
                let mut actor = Actor::new(id.clone(), kind);
                actor.bcet = a.clone().min(b.clone());
                actor.wcet = a.max(b);
                g.add_actor(actor);
            }
            let mut uses_params = false;
            for (k, (p, c, prod, cons, init, control)) in channels.into_iter().enumerate() {
                uses_params |= prod.parameter().is_some() || cons.parameter().is_some();
                g.add_channel(Channel {
                    id: format!("ch {k}"),
                    producer: names[p.index(names.len())].clone(),
                    consumer: names[c.index(names.len())].clone(),
                    prod_rate: prod,
                    cons_rate: cons,
                    initial_tokens: r(init, 4),
                    class: if control {
                        ChannelClass::Control
                    } else {
                        ChannelClass::Data
                    },
                });
            }
            let mut modes: BTreeMap<String, Vec<u8>> = modes;
            if uses_params && modes.is_empty() {
                modes.insert("only".into(), vec![1, 0, 0]);
            }
            for (m, values) in modes {
                g.add_mode(Mode::new(m, ["m1", "m2", "m3"].into_iter().zip(values)));
            }
            g
        })
}

/// Null space of the topology matrix by Gauss-Jordan elimination.
pub fn null_space(g: &Graph) -> Vec<Vec<Rational>> {
    let n = g.actors.len();
    let col = |id: &str| g.actors.iter().position(|a| a.id == id).unwrap();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for c in g.channels.iter().filter(|c| c.producer != c.consumer) {
        let mut row = vec![Rational::zero(); n];
        row[col(&c.producer)] += c.prod_rate.constant().unwrap();
        row[col(&c.consumer)] -= c.cons_rate.constant().unwrap();
        rows.push(row);
    }
    let mut pivots = Vec::new();
    let mut top = 0;
    for j in 0..n {
        let Some(p) = (top..rows.len()).find(|&i| !rows[i][j].is_zero()) else {
            continue;
        };
        rows.swap(top, p);
        let lead = rows[top][j].clone();
        for x in rows[top].iter_mut() {
            *x = &*x / &lead;
        }
        for i in 0..rows.len() {
            if i != top && !rows[i][j].is_zero() {
                let f = rows[i][j].clone();
                let pivot = rows[top].clone();
                for (x, p) in rows[i].iter_mut().zip(&pivot) {
                    *x -= &(&f * p);
                }
            }
        }
        pivots.push(j);
        top += 1;
    }
    (0..n)
        .filter(|j| !pivots.contains(j))
        .map(|free| {
            let mut v = vec![Rational::zero(); n];
            v[free] = Rational::one();
            for (i, &pj) in pivots.iter().enumerate() {
                v[pj] = -rows[i][free].clone();
            }
            v
        })
        .collect()
}

/// Scales a positive rational vector to the smallest integer vector.
pub fn normalize(v: &[Rational]) -> Vec<u64> {
    use num_integer::Integer;
    let lcm = v.iter().fold(num_bigint::BigInt::from(1), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<num_bigint::BigInt> = v
        .iter()
        .map(|x| x.numer() * (&lcm / x.denom()))
        .collect();
    let gcd = ints.iter().fold(num_bigint::BigInt::from(0), |acc, x| acc.gcd(x));
    ints.iter()
        .map(|x| u64::try_from(x / &gcd).expect("fits"))
        .collect()
}
