//! The `.rmdf` text format.
//!
//! ```text
//! rmdf 1
//! [defaults]
//! bcet 3/25
//! wcet 1/5
//! [actors]
//! Camera timed freq 30Hz phase 0ms
//! "Feature Detection" usual wcet 1/4
//! [channels]
//! c6 "Feature Match" -> "Navigation Filter" prod 1 cons 3/50 init 1/50
//! [modes]
//! search: m1=1 m2=0
//! ```
//!
//! Outside any section a line may also start with `actor`, `channel` or
//! `mode` followed by the same declaration.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::graph::{
    default_bcet, default_wcet, Actor, ActorKind, Channel, ChannelClass, Graph, Mode, Rate,
};
use crate::rational::Rational;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown actor `{0}`")]
    UnknownActor(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unbound mode parameter `{0}`")]
    UnboundParameter(String),
    #[error("malformed rational literal `{0}`")]
    BadRational(String),
    #[error("unsupported format version `{0}`")]
    UnsupportedVersion(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub(crate) text: String,
    pub(crate) quoted: bool,
    pub(crate) col: usize,
}

impl Token {
    pub(crate) fn is(&self, word: &str) -> bool {
        !self.quoted && self.text == word
    }
}

pub(crate) fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

pub(crate) fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    err(line, column, ParseErrorKind::Syntax(msg.into()))
}

pub(crate) fn tokenize(text: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().enumerate().peekable();
    while let Some(&(i, c)) = chars.peek() {
        let col = i + 1;
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            let mut closed = false;
            while let Some((_, c)) = chars.next() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match chars.next() {
                        Some((_, e @ ('"' | '\\'))) => s.push(e),
                        Some((j, e)) => {
                            return Err(syntax(line, j + 1, format!("unknown escape `\\{e}`")))
                        }
                        None => break,
                    },
                    c => s.push(c),
                }
            }
            if !closed {
                return Err(syntax(line, col, "unterminated quoted name"));
            }
            tokens.push(Token {
                text: s,
                quoted: true,
                col,
            });
        } else {
            let mut s = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_whitespace() || c == '#' || c == '"' {
                    break;
                }
                s.push(c);
                chars.next();
            }
            tokens.push(Token {
                text: s,
                quoted: false,
                col,
            });
        }
    }
    Ok(tokens)
}

pub(crate) fn parse_rational(tok: &Token, suffix: Option<&str>, line: usize) -> Result<Rational, ParseError> {
    let mut text = tok.text.as_str();
    if let Some(sfx) = suffix {
        text = text.strip_suffix(sfx).unwrap_or(text);
    }
    if tok.quoted {
        return Err(err(line, tok.col, ParseErrorKind::BadRational(tok.text.clone())));
    }
    text.parse()
        .map_err(|_| err(line, tok.col, ParseErrorKind::BadRational(tok.text.clone())))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_kind(tok: &Token, line: usize) -> Result<ActorKind, ParseError> {
    let kind = match tok.text.to_ascii_lowercase().as_str() {
        "usual" => ActorKind::Usual,
        "timed" => ActorKind::Timed {
            frequency: Rational::zero(),
            phase: Rational::zero(),
        },
        "duplicater" | "duplicator" => ActorKind::Duplicater,
        "splitter" => ActorKind::Splitter,
        "joiner" => ActorKind::Joiner,
        "controlled-splitter" => ActorKind::ControlledSplitter,
        "controlled-joiner" => ActorKind::ControlledJoiner,
        "mode-decider" | "decider" => ActorKind::ModeDecider,
        _ => return Err(syntax(line, tok.col, format!("unknown actor kind `{}`", tok.text))),
    };
    if tok.quoted {
        return Err(syntax(line, tok.col, "actor kind must not be quoted"));
    }
    Ok(kind)
}

struct PendingActor {
    actor: Actor,
    bcet: Option<Rational>,
    wcet: Option<Rational>,
}

struct PendingChannel {
    channel: Channel,
    line: usize,
    end_cols: [usize; 2],
    rate_cols: [usize; 2],
}

fn parse_actor(toks: &[Token], line: usize) -> Result<PendingActor, ParseError> {
    let name = &toks[0];
    let Some(kind_tok) = toks.get(1) else {
        return Err(syntax(line, name.col + name.text.len(), "expected actor kind"));
    };
    let mut kind = parse_kind(kind_tok, line)?;
    let mut frequency = None;
    let mut phase = None;
    let mut bcet = None;
    let mut wcet = None;
    let mut i = 2;
    while i < toks.len() {
        let t = &toks[i];
        let value = |i: usize| {
            toks.get(i + 1)
                .ok_or_else(|| syntax(line, t.col, format!("`{}` needs a value", t.text)))
        };
        let slot = if t.is("freq") {
            i += 1;
            frequency.replace(parse_rational(value(i - 1)?, Some("Hz"), line)?)
        } else if !t.quoted && t.text.ends_with("Hz") {
            frequency.replace(parse_rational(t, Some("Hz"), line)?)
        } else if t.is("phase") {
            i += 1;
            phase.replace(parse_rational(value(i - 1)?, Some("ms"), line)?)
        } else if t.is("bcet") {
            i += 1;
            bcet.replace(parse_rational(value(i - 1)?, Some("ms"), line)?)
        } else if t.is("wcet") {
            i += 1;
            wcet.replace(parse_rational(value(i - 1)?, Some("ms"), line)?)
        } else {
            return Err(syntax(line, t.col, format!("unexpected `{}`", t.text)));
        };
        if slot.is_some() {
            return Err(syntax(line, t.col, "attribute given twice"));
        }
        i += 1;
    }
    match &mut kind {
        ActorKind::Timed {
            frequency: f,
            phase: p,
        } => {
            *f = frequency.ok_or_else(|| syntax(line, kind_tok.col, "timed actor needs a frequency"))?;
            *p = phase.unwrap_or_else(Rational::zero);
        }
        _ => {
            if frequency.is_some() || phase.is_some() {
                return Err(syntax(line, kind_tok.col, "only timed actors take a frequency or phase"));
            }
        }
    }
    Ok(PendingActor {
        actor: Actor::new(name.text.clone(), kind),
        bcet,
        wcet,
    })
}

fn parse_rate(tok: &Token, line: usize) -> Result<Rate, ParseError> {
    if !tok.quoted && is_identifier(&tok.text) {
        Ok(Rate::Parametric(tok.text.clone()))
    } else {
        parse_rational(tok, None, line).map(Rate::Constant)
    }
}

fn parse_channel(toks: &[Token], line: usize) -> Result<PendingChannel, ParseError> {
    let expect = |i: usize, what: &str| {
        toks.get(i).ok_or_else(|| {
            let col = toks.last().map_or(1, |t| t.col + t.text.len());
            syntax(line, col, format!("expected {what}"))
        })
    };
    let id = expect(0, "channel id")?;
    let producer = expect(1, "producer")?;
    let arrow = expect(2, "`->`")?;
    if !arrow.is("->") {
        return Err(syntax(line, arrow.col, "expected `->`"));
    }
    let consumer = expect(3, "consumer")?;
    let kw = expect(4, "`prod`")?;
    if !kw.is("prod") {
        return Err(syntax(line, kw.col, "expected `prod`"));
    }
    let prod_tok = expect(5, "production rate")?;
    let prod = parse_rate(prod_tok, line)?;
    let kw = expect(6, "`cons`")?;
    if !kw.is("cons") {
        return Err(syntax(line, kw.col, "expected `cons`"));
    }
    let cons_tok = expect(7, "consumption rate")?;
    let cons = parse_rate(cons_tok, line)?;
    let mut channel = Channel::data(id.text.clone(), producer.text.clone(), consumer.text.clone(), prod, cons);
    let mut i = 8;
    let mut seen_init = false;
    while i < toks.len() {
        let t = &toks[i];
        if t.is("init") && !seen_init {
            channel.initial_tokens = parse_rational(expect(i + 1, "initial tokens")?, None, line)?;
            seen_init = true;
            i += 2;
        } else if t.is("control") && channel.class == ChannelClass::Data {
            channel.class = ChannelClass::Control;
            i += 1;
        } else {
            return Err(syntax(line, t.col, format!("unexpected `{}`", t.text)));
        }
    }
    Ok(PendingChannel {
        channel,
        line,
        end_cols: [producer.col, consumer.col],
        rate_cols: [prod_tok.col, cons_tok.col],
    })
}

fn parse_mode(toks: &[Token], line: usize) -> Result<Mode, ParseError> {
    let first = &toks[0];
    let (name, rest) = if !first.quoted && first.text.ends_with(':') && first.text.len() > 1 {
        (first.text[..first.text.len() - 1].to_string(), &toks[1..])
    } else {
        match toks.get(1) {
            Some(t) if t.is(":") => (first.text.clone(), &toks[2..]),
            _ => return Err(syntax(line, first.col, "expected `name:` at the start of a mode")),
        }
    };
    let mut assignment = BTreeMap::new();
    for t in rest {
        let Some((param, value)) = t.text.split_once('=').filter(|_| !t.quoted) else {
            return Err(syntax(line, t.col, "expected `parameter=value`"));
        };
        if !is_identifier(param) {
            return Err(syntax(line, t.col, format!("bad parameter name `{param}`")));
        }
        let value: u8 = value
            .parse()
            .map_err(|_| syntax(line, t.col + param.len() + 1, format!("bad parameter value `{value}`")))?;
        if assignment.insert(param.to_string(), value).is_some() {
            return Err(err(line, t.col, ParseErrorKind::DuplicateId(param.to_string())));
        }
    }
    Ok(Mode { name, assignment })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Defaults,
    Actors,
    Channels,
    Modes,
}

/// Parses an `.rmdf` document. Never panics: malformed input yields a
/// [`ParseError`] with a 1-based line and column.
pub fn parse_model(text: &str) -> Result<Graph, ParseError> {
    let mut section = Section::None;
    let mut seen_content = false;
    let mut actors: Vec<(PendingActor, usize)> = Vec::new();
    let mut channels: Vec<PendingChannel> = Vec::new();
    let mut modes: Vec<(Mode, usize)> = Vec::new();
    let mut bcet_default = default_bcet();
    let mut wcet_default = default_wcet();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = tokenize(raw, line)?;
        let Some(first) = toks.first() else { continue };

        if !first.quoted && first.text.starts_with('[') {
            if toks.len() > 1 {
                return Err(syntax(line, toks[1].col, "unexpected text after section header"));
            }
            section = match first.text.as_str() {
                "[defaults]" => Section::Defaults,
                "[actors]" => Section::Actors,
                "[channels]" => Section::Channels,
                "[modes]" => Section::Modes,
                other => return Err(syntax(line, first.col, format!("unknown section `{other}`"))),
            };
            seen_content = true;
            continue;
        }

        if first.is("rmdf") && section == Section::None {
            if seen_content {
                return Err(syntax(line, first.col, "version header must come first"));
            }
            let Some(v) = toks.get(1) else {
                return Err(syntax(line, first.col, "expected a format version"));
            };
            if v.text != FORMAT_VERSION.to_string() || v.quoted {
                return Err(err(line, v.col, ParseErrorKind::UnsupportedVersion(v.text.clone())));
            }
            if let Some(t) = toks.get(2) {
                return Err(syntax(line, t.col, "unexpected text after version"));
            }
            seen_content = true;
            continue;
        }
        seen_content = true;

        let (kind, body) = match section {
            Section::None => {
                let kind = if first.is("actor") {
                    Section::Actors
                } else if first.is("channel") {
                    Section::Channels
                } else if first.is("mode") {
                    Section::Modes
                } else {
                    return Err(syntax(line, first.col, format!("unexpected `{}` outside a section", first.text)));
                };
                if toks.len() < 2 {
                    return Err(syntax(line, first.col, "empty declaration"));
                }
                (kind, &toks[1..])
            }
            s => (s, &toks[..]),
        };

        match kind {
            Section::Defaults => {
                let value = body
                    .get(1)
                    .ok_or_else(|| syntax(line, first.col, "expected a value"))?;
                let parsed = parse_rational(value, Some("ms"), line)?;
                if let Some(t) = body.get(2) {
                    return Err(syntax(line, t.col, "unexpected text after value"));
                }
                if body[0].is("bcet") {
                    bcet_default = parsed;
                } else if body[0].is("wcet") {
                    wcet_default = parsed;
                } else {
                    return Err(syntax(line, body[0].col, "expected `bcet` or `wcet`"));
                }
            }
            Section::Actors => actors.push((parse_actor(body, line)?, line)),
            Section::Channels => channels.push(parse_channel(body, line)?),
            Section::Modes => modes.push((parse_mode(body, line)?, line)),
            Section::None => unreachable!("resolved above"),
        }
    }

    let mut ids = HashSet::new();
    for (a, line) in &actors {
        if !ids.insert(a.actor.id.clone()) {
            return Err(err(*line, 1, ParseErrorKind::DuplicateId(a.actor.id.clone())));
        }
    }
    let mut chan_ids = HashSet::new();
    for c in &channels {
        if !chan_ids.insert(c.channel.id.clone()) {
            return Err(err(c.line, 1, ParseErrorKind::DuplicateId(c.channel.id.clone())));
        }
        for (end, col) in [&c.channel.producer, &c.channel.consumer].into_iter().zip(c.end_cols) {
            if !ids.contains(end) {
                return Err(err(c.line, col, ParseErrorKind::UnknownActor(end.clone())));
            }
        }
    }
    let mut mode_names = HashSet::new();
    for (m, line) in &modes {
        if !mode_names.insert(m.name.clone()) {
            return Err(err(*line, 1, ParseErrorKind::DuplicateId(m.name.clone())));
        }
    }
    for c in &channels {
        for (rate, col) in [&c.channel.prod_rate, &c.channel.cons_rate].into_iter().zip(c.rate_cols) {
            if let Rate::Parametric(p) = rate {
                if modes.is_empty() || modes.iter().any(|(m, _)| !m.assignment.contains_key(p)) {
                    return Err(err(c.line, col, ParseErrorKind::UnboundParameter(p.clone())));
                }
            }
        }
    }

    let mut g = Graph::new();
    for (p, _) in actors {
        let mut actor = p.actor;
        if !actor.kind.is_routing() {
            actor.bcet = bcet_default.clone();
            actor.wcet = wcet_default.clone();
        }
        if let Some(b) = p.bcet {
            actor.bcet = b;
        }
        if let Some(w) = p.wcet {
            actor.wcet = w;
        }
        g.actors.push(actor);
    }
    g.channels = channels.into_iter().map(|c| c.channel).collect();
    g.modes.modes = modes.into_iter().map(|(m, _)| m).collect();
    Ok(g)
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s == "->"
        || s.starts_with('[')
        || s.chars().any(|c| c.is_whitespace() || matches!(c, '"' | '#' | ':' | '=' | '\\'))
}

pub(crate) struct Name<'a>(&'a str);

impl fmt::Display for Name<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if needs_quotes(self.0) {
            f.write_char('"')?;
            for c in self.0.chars() {
                if matches!(c, '"' | '\\') {
                    f.write_char('\\')?;
                }
                f.write_char(c)?;
            }
            f.write_char('"')
        } else {
            f.write_str(self.0)
        }
    }
}

/// Renders a graph in the `.rmdf` format. Execution times equal to the
/// defaults are omitted; an empty mode table produces no `[modes]` section.
pub fn serialize_model(g: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rmdf {FORMAT_VERSION}");
    out.push_str("\n[actors]\n");
    for a in &g.actors {
        let _ = write!(out, "{} {}", Name(&a.id), a.kind.keyword());
        if let ActorKind::Timed { frequency, phase } = &a.kind {
            let _ = write!(out, " freq {frequency}Hz phase {phase}ms");
        }
        let (db, dw) = if a.kind.is_routing() {
            (Rational::zero(), Rational::zero())
        } else {
            (default_bcet(), default_wcet())
        };
        if a.bcet != db {
            let _ = write!(out, " bcet {}", a.bcet);
        }
        if a.wcet != dw {
            let _ = write!(out, " wcet {}", a.wcet);
        }
        out.push('\n');
    }
    if !g.channels.is_empty() {
        out.push_str("\n[channels]\n");
    }
    for c in &g.channels {
        let _ = write!(
            out,
            "{} {} -> {} prod {} cons {}",
            Name(&c.id),
            Name(&c.producer),
            Name(&c.consumer),
            c.prod_rate,
            c.cons_rate
        );
        if !c.initial_tokens.is_zero() {
            let _ = write!(out, " init {}", c.initial_tokens);
        }
        if c.class == ChannelClass::Control {
            out.push_str(" control");
        }
        out.push('\n');
    }
    if !g.modes.is_empty() {
        out.push_str("\n[modes]\n");
        for m in &g.modes.modes {
            let _ = write!(out, "{}:", Name(&m.name));
            for (p, v) in &m.assignment {
                let _ = write!(out, " {p}={v}");
            }
            out.push('\n');
        }
    }
    out
}
