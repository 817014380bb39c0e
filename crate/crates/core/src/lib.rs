//! Real-time mode-aware dataflow (RMDF): graph model, static analyses,
//! timing windows and a discrete-event simulator.

pub mod cli;
pub mod consistency;
mod flows;
pub mod graph;
pub mod liveness;
pub mod model_text;
pub mod models;
pub mod rational;
pub mod report;
pub mod sim;
pub mod timing;

pub use graph::{
    control_area, validate_graph, Actor, ActorKind, Channel, ChannelClass, Graph, Mode, ModeTable, Rate,
    ValidationReport, Valuation, Violation, ViolationKind,
};
pub use model_text::{parse_model, serialize_model, ParseError, ParseErrorKind};
pub use rational::{rat, rat_gcd_set, rat_lcm_set, Rational, RationalError};
