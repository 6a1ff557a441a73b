//! Parses a metamodel, walks its subtype order and shows the diagnostics
//! for a broken one.

use std::error::Error;

use modexpr::syntax::parse_mmx;

const WORKFLOW: &str = "schema Workflow {
  entity Step { }
  entity Task : Step { performer: string? }
  entity Sequence : Step { steps: Step[] }
  entity Parallel : Step { steps: Step[] }
  model WorkflowModel { steps: Step[] }
}";

const BROKEN: &str = "schema Broken {
  entity Task : Step { }
  model M { tasks: Task[] }
}";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let schema = parse_mmx(WORKFLOW)?;
    let step = schema.entity("Step").ok_or("no Step")?;
    for e in schema.own_entities() {
        let all = e.all_props();
        let props: Vec<&str> = all.names().collect();
        println!(
            "{:<14} step: {:<5} props: {}",
            e.qualified(),
            e.is_subtype_of(step),
            props.join(", ")
        );
    }
    assert!(schema
        .entity("Parallel")
        .ok_or("no Parallel")?
        .is_subtype_of(step));

    let err = parse_mmx(BROKEN).err().ok_or("broken schema parsed")?;
    for d in &err.diagnostics {
        println!("{d}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
