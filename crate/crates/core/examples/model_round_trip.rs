// Build a graph in code, print it in the text format, parse it back and validate.

use rmdf::{parse_model, rat, serialize_model, validate_graph, Actor, Channel, Graph};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut g = Graph::new();
    g.add_actor(Actor::timed("Sensor", rat(50, 1)?, rat(0, 1)?).with_times(rat(1, 10)?, rat(1, 5)?))
        .add_actor(Actor::usual("Filter"))
        .add_actor(Actor::timed("Actuator", rat(25, 1)?, rat(1, 1)?))
        .add_channel(Channel::data("s_f", "Sensor", "Filter", rat(1, 1)?, rat(1, 1)?))
        .add_channel(Channel::data("f_a", "Filter", "Actuator", rat(1, 2)?, rat(1, 1)?))
        .add_channel(Channel::data("state", "Filter", "Filter", rat(1, 1)?, rat(1, 1)?).with_init(rat(1, 1)?));

    let text = serialize_model(&g);
    print!("{text}");
    let back = parse_model(&text)?;
    println!("round trip identical: {}", back == g);
    println!("violations: {}", validate_graph(&back).violations.len());

    match parse_model("rmdf 1\n[actors]\nA usual\n[channels]\nx A -> Z prod 1 cons 1\n") {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("bad input: {e}"),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
