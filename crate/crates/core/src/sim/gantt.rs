use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use super::trace::{Event, SimTrace};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanttFormat {
    Svg,
    Text,
}

impl FromStr for GanttFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svg" => Ok(GanttFormat::Svg),
            "text" => Ok(GanttFormat::Text),
            other => Err(format!("unknown chart format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub job: u64,
    pub start: Rational,
    pub end: Rational,
    /// The job consumed a token the index check rejected.
    pub discarded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub actor: String,
    pub intervals: Vec<Interval>,
}

impl Row {
    /// Rows for actors that can take time, by priority then declaration order.
    pub fn from_trace(trace: &SimTrace) -> Vec<Row> {
        let discarded: BTreeSet<(&str, u64)> = trace
            .events
            .iter()
            .filter_map(|e| match e {
                Event::TokenDiscard { actor, job, .. } => Some((actor.as_str(), *job)),
                _ => None,
            })
            .collect();
        let mut open: HashMap<&str, (u64, Rational)> = HashMap::new();
        let mut spans: HashMap<&str, Vec<Interval>> = HashMap::new();
        for e in &trace.events {
            match e {
                Event::JobStart { actor, job, time } | Event::JobResume { actor, job, time } => {
                    open.insert(actor, (*job, time.clone()));
                }
                Event::JobPreempt { actor, time, .. } | Event::JobEnd { actor, time, .. } => {
                    if let Some((job, start)) = open.remove(actor.as_str()) {
                        let end = time.clone();
                        if end > start {
                            spans.entry(actor).or_default().push(Interval {
                                job,
                                start,
                                end,
                                discarded: discarded.contains(&(actor.as_str(), job)),
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        for (actor, (job, start)) in open {
            if trace.horizon > start {
                spans.entry(actor).or_default().push(Interval {
                    job,
                    start,
                    end: trace.horizon.clone(),
                    discarded: discarded.contains(&(actor, job)),
                });
            }
        }
        let mut actors: Vec<(usize, &super::trace::TraceActor)> =
            trace.actors.iter().enumerate().filter(|(_, a)| a.executes).collect();
        actors.sort_by_key(|(i, a)| (a.priority.unwrap_or(u32::MAX), *i));
        actors
            .into_iter()
            .map(|(_, a)| {
                let mut intervals = spans.remove(a.id.as_str()).unwrap_or_default();
                intervals.sort_by(|x, y| x.start.cmp(&y.start));
                Row {
                    actor: a.id.clone(),
                    intervals,
                }
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 10.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn render_text(trace: &SimTrace, rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.actor.len()).max().unwrap_or(0);
    let mut out = format!("time 0 .. {} ms\n", trace.horizon.to_decimal(3));
    for row in rows {
        let cells: Vec<String> = row
            .intervals
            .iter()
            .map(|i| {
                format!(
                    "[{}, {}] job {}{}",
                    i.start.to_decimal(3),
                    i.end.to_decimal(3),
                    i.job,
                    if i.discarded { " discarded" } else { "" }
                )
            })
            .collect();
        let _ = writeln!(out, "{:width$} | {}", row.actor, cells.join("  "));
    }
    out
}

fn render_svg(trace: &SimTrace, rows: &[Row]) -> String {
    const LEFT: f64 = 170.0;
    const PLOT: f64 = 900.0;
    const ROW: f64 = 28.0;
    const TOP: f64 = 20.0;
    let horizon = trace.horizon.to_f64().max(f64::MIN_POSITIVE);
    let x = |t: &Rational| LEFT + t.to_f64() / horizon * PLOT;
    let axis_y = TOP + ROW * rows.len() as f64 + 6.0;
    let height = axis_y + 40.0;
    let width = LEFT + PLOT + 30.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    s.push_str(
        r##"<defs><pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6" patternTransform="rotate(45)"><rect width="6" height="6" fill="#f4c27a"/><line x1="0" y1="0" x2="0" y2="6" stroke="#7a3e00" stroke-width="2"/></pattern></defs>
"##,
    );
    for (i, row) in rows.iter().enumerate() {
        let y = TOP + ROW * i as f64;
        let _ = writeln!(
            s,
            r#"<g class="row" data-actor="{name}"><text x="{tx}" y="{ty}" text-anchor="end">{name}</text>"#,
            name = escape(&row.actor),
            tx = LEFT - 8.0,
            ty = y + ROW / 2.0 + 4.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="#ddd"/>"##,
            ly = y + ROW - 2.0,
            x2 = LEFT + PLOT
        );
        for iv in &row.intervals {
            let x0 = x(&iv.start);
            let w = (x(&iv.end) - x0).max(1.0);
            let fill = if iv.discarded { "url(#hatch)" } else { "#5b8def" };
            let class = if iv.discarded { "job discarded" } else { "job" };
            let _ = writeln!(
                s,
                r##"<rect class="{class}" x="{x0:.2}" y="{ry}" width="{w:.2}" height="{rh}" fill="{fill}" stroke="#223"><title>{name} job {job}: {a} - {b} ms</title></rect>"##,
                ry = y + 4.0,
                rh = ROW - 10.0,
                name = escape(&row.actor),
                job = iv.job,
                a = iv.start,
                b = iv.end
            );
        }
        s.push_str("</g>\n");
    }
    let _ = writeln!(
        s,
        r##"<g class="axis"><line x1="{LEFT}" y1="{axis_y}" x2="{x2}" y2="{axis_y}" stroke="#000"/>"##,
        x2 = LEFT + PLOT
    );
    let step = tick_step(horizon);
    let mut k = 0u32;
    loop {
        let t = step * f64::from(k);
        if t > horizon + 1e-9 {
            break;
        }
        let px = LEFT + t / horizon * PLOT;
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{axis_y}" x2="{px:.2}" y2="{y2}" stroke="#000"/><text x="{px:.2}" y="{ty}" text-anchor="middle">{t}</text>"##,
            y2 = axis_y + 5.0,
            ty = axis_y + 18.0
        );
        k += 1;
    }
    let _ = writeln!(
        s,
        r#"<text x="{cx}" y="{ty}" text-anchor="middle">time (ms)</text></g>"#,
        cx = LEFT + PLOT / 2.0,
        ty = axis_y + 34.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn export_gantt(trace: &SimTrace, format: GanttFormat) -> String {
    let rows = Row::from_trace(trace);
    match format {
        GanttFormat::Svg => render_svg(trace, &rows),
        GanttFormat::Text => render_text(trace, &rows),
    }
}
