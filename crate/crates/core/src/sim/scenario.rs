//! The `.scn` scenario format.
//!
//! ```text
//! rmdf-scenario 1
//! [settings]
//! scheduler single-core
//! joiner naive
//! exec-time wcet
//! horizon 130
//! [priorities]
//! Camera 0
//! [index-check]
//! "Feature Match"
//! [overrides]
//! "Filtering Procedure" 2 34
//! [modes]
//! "Label Decider": base search
//! [subgraph]
//! Camera
//! ```

use std::collections::BTreeMap;

use super::{ExecTimePolicy, JoinerPolicy, Override, Scheduler, SimConfig};
use crate::graph::{Graph, GraphError};
use crate::model_text::{err, parse_rational, syntax, tokenize, ParseError, ParseErrorKind, Token};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub config: SimConfig,
    /// Actors to keep; the simulation runs on the induced subgraph.
    pub subgraph: Option<Vec<String>>,
}

impl Scenario {
    pub fn graph_for(&self, g: &Graph) -> Result<Graph, GraphError> {
        match &self.subgraph {
            Some(keep) => g.restrict(keep.iter().map(String::as_str)),
            None => Ok(g.clone()),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Settings,
    Priorities,
    Durations,
    IndexCheck,
    Overrides,
    Modes,
    Subgraph,
}

fn exactly(toks: &[Token], n: usize, line: usize) -> Result<&[Token], ParseError> {
    if toks.len() != n {
        let col = toks.get(n).or(toks.last()).map_or(1, |t| t.col);
        return Err(syntax(line, col, format!("expected {n} fields, found {}", toks.len())));
    }
    Ok(toks)
}

fn integer(tok: &Token, line: usize) -> Result<u64, ParseError> {
    tok.text
        .parse()
        .map_err(|_| syntax(line, tok.col, format!("expected a non-negative integer, found `{}`", tok.text)))
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut cfg = SimConfig::new(Rational::zero());
    let mut horizon = None;
    let mut priorities: Option<BTreeMap<String, u32>> = None;
    let mut single_core = false;
    let mut fixed = false;
    let mut durations = BTreeMap::new();
    let mut subgraph: Option<Vec<String>> = None;
    let mut section = Section::None;
    let mut seen_content = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = tokenize(raw, line)?;
        let Some(first) = toks.first() else { continue };
        if !first.quoted && first.text.starts_with('[') {
            section = match first.text.as_str() {
                "[settings]" => Section::Settings,
                "[priorities]" => Section::Priorities,
                "[durations]" => Section::Durations,
                "[index-check]" => Section::IndexCheck,
                "[overrides]" => Section::Overrides,
                "[modes]" => Section::Modes,
                "[subgraph]" => {
                    subgraph.get_or_insert_with(Vec::new);
                    Section::Subgraph
                }
                other => return Err(syntax(line, first.col, format!("unknown section `{other}`"))),
            };
            exactly(&toks, 1, line)?;
            seen_content = true;
            continue;
        }
        if first.is("rmdf-scenario") {
            let t = exactly(&toks, 2, line)?;
            if seen_content {
                return Err(syntax(line, first.col, "version header must come first"));
            }
            if t[1].text != "1" {
                return Err(err(line, t[1].col, ParseErrorKind::UnsupportedVersion(t[1].text.clone())));
            }
            seen_content = true;
            continue;
        }
        seen_content = true;
        match section {
            Section::None => return Err(syntax(line, first.col, "declaration outside any section")),
            Section::Settings => {
                let t = exactly(&toks, 2, line)?;
                let value = &t[1];
                match first.text.as_str() {
                    "scheduler" => {
                        single_core = match value.text.as_str() {
                            "single-core" => true,
                            "unlimited-cores" => false,
                            v => return Err(syntax(line, value.col, format!("unknown scheduler `{v}`"))),
                        }
                    }
                    "joiner" => {
                        cfg.joiner_policy = match value.text.as_str() {
                            "naive" | "naive-first-arrival" => JoinerPolicy::NaiveFirstArrival,
                            "rmdf" | "rmdf-lexicographic" => JoinerPolicy::RmdfLexicographic,
                            v => return Err(syntax(line, value.col, format!("unknown joiner policy `{v}`"))),
                        }
                    }
                    "exec-time" => {
                        fixed = false;
                        cfg.exec_time = match value.text.as_str() {
                            "bcet" => ExecTimePolicy::Bcet,
                            "wcet" => ExecTimePolicy::Wcet,
                            "fixed" => {
                                fixed = true;
                                ExecTimePolicy::Wcet
                            }
                            v => return Err(syntax(line, value.col, format!("unknown execution-time policy `{v}`"))),
                        }
                    }
                    "horizon" => horizon = Some(parse_rational(value, Some("ms"), line)?),
                    k => return Err(syntax(line, first.col, format!("unknown setting `{k}`"))),
                }
            }
            Section::Priorities => {
                let t = exactly(&toks, 2, line)?;
                let rank = integer(&t[1], line)?;
                let rank = u32::try_from(rank).map_err(|_| syntax(line, t[1].col, "priority too large"))?;
                if priorities.get_or_insert_with(BTreeMap::new).insert(first.text.clone(), rank).is_some() {
                    return Err(err(line, first.col, ParseErrorKind::DuplicateId(first.text.clone())));
                }
            }
            Section::Durations => {
                let t = exactly(&toks, 2, line)?;
                durations.insert(first.text.clone(), parse_rational(&t[1], Some("ms"), line)?);
            }
            Section::IndexCheck => {
                exactly(&toks, 1, line)?;
                cfg.index_check.insert(first.text.clone());
            }
            Section::Overrides => {
                let t = exactly(&toks, 3, line)?;
                cfg.overrides.push(Override {
                    actor: first.text.clone(),
                    job: integer(&t[1], line)?,
                    duration: parse_rational(&t[2], Some("ms"), line)?,
                });
            }
            Section::Modes => {
                let mut name = first.text.clone();
                let mut rest = &toks[1..];
                if !first.quoted && name.ends_with(':') {
                    name.pop();
                } else if rest.first().is_some_and(|t| t.is(":")) {
                    rest = &rest[1..];
                } else {
                    return Err(syntax(line, first.col, "expected `decider: mode ...`"));
                }
                if rest.is_empty() {
                    return Err(syntax(line, first.col, "mode script is empty"));
                }
                cfg.mode_script
                    .entry(name)
                    .or_default()
                    .extend(rest.iter().map(|t| t.text.clone()));
            }
            Section::Subgraph => {
                exactly(&toks, 1, line)?;
                subgraph.get_or_insert_with(Vec::new).push(first.text.clone());
            }
        }
    }

    cfg.horizon = horizon.ok_or_else(|| syntax(text.lines().count().max(1), 1, "missing `horizon` setting"))?;
    if single_core {
        cfg.scheduler = Scheduler::SingleCore {
            priorities: priorities.unwrap_or_default(),
        };
    }
    if fixed {
        cfg.exec_time = ExecTimePolicy::Fixed(durations);
    }
    Ok(Scenario {
        config: cfg,
        subgraph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn bundled_flight6() {
        let s = parse_scenario(models::FLIGHT6_SCN).unwrap();
        assert_eq!(s.config.joiner_policy, JoinerPolicy::NaiveFirstArrival);
        assert!(s.config.index_check.contains("Feature Match"));
        assert_eq!(s.config.overrides.len(), 1);
        assert_eq!(s.config.overrides[0].job, 2);
        assert_eq!(s.config.mode_script["Label Decider"], vec!["base", "search"]);
        let Scheduler::SingleCore { priorities } = &s.config.scheduler else {
            panic!("single core expected")
        };
        assert_eq!(priorities.len(), 7);
        let g = s.graph_for(&models::ingenuity()).unwrap();
        assert!(g.actor("Navigation Filter").is_none());
        assert!(g.actor("Controlled Joiner").is_some());
    }

    #[test]
    fn fixed_durations_and_errors() {
        let s = parse_scenario("[settings]\nexec-time fixed\nhorizon 10ms\n[durations]\nA 1/2\n").unwrap();
        assert_eq!(
            s.config.exec_time,
            ExecTimePolicy::Fixed([("A".to_string(), Rational::new(1, 2).unwrap())].into())
        );
        let e = parse_scenario("[settings]\nhorizon 1\nscheduler many\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 11));
        assert!(parse_scenario("[settings]\nscheduler single-core\n").is_err());
        assert!(parse_scenario("horizon 5\n").is_err());
        let e = parse_scenario("[settings]\nhorizon 1\n[priorities]\nA 1\nA 2\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateId("A".into()));
        let e = parse_scenario("rmdf-scenario 2\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnsupportedVersion("2".into()));
    }

    #[test]
    fn mode_line_forms() {
        let s = parse_scenario("[settings]\nhorizon 1\n[modes]\nLD: a b\n\"Big One\" : c\n").unwrap();
        assert_eq!(s.config.mode_script["LD"], vec!["a", "b"]);
        assert_eq!(s.config.mode_script["Big One"], vec!["c"]);
    }
}
