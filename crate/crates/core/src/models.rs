//! Models shipped with the crate.

use crate::graph::Graph;
use crate::model_text::parse_model;
use crate::sim::{parse_scenario, Scenario};

pub const INGENUITY_RMDF: &str = include_str!("../../../models/ingenuity.rmdf");
pub const FIG1_EXAMPLE_RMDF: &str = include_str!("../../../models/fig1-example.rmdf");
pub const FLIGHT6_SCN: &str = include_str!("../../../models/flight6.scn");

/// The Ingenuity helicopter graph: vision, navigation and control systems.
pub fn ingenuity() -> Graph {
    parse_model(INGENUITY_RMDF).expect("bundled model parses")
}

/// A source, a mode decider and three two-actor conditional branches.
pub fn fig1_example() -> Graph {
    parse_model(FIG1_EXAMPLE_RMDF).expect("bundled model parses")
}

/// The frame-inversion replay on the vision subgraph.
pub fn flight6() -> Scenario {
    parse_scenario(FLIGHT6_SCN).expect("bundled scenario parses")
}
