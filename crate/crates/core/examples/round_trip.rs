//! Serializes an evaluated model, reads the text back and compares the
//! two structurally. Shared elements come back as references.

use std::error::Error;
use std::path::Path;

use modexpr::expr::{ParamEnv, ReductionGuard};
use modexpr::schema::SchemaSet;
use modexpr::syntax::{load_schema, read_model, serialize_model, Source};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schema = load_schema(&fixtures.join("workflow.mmx"), &SchemaSet::new())?;
    let text = std::fs::read_to_string(fixtures.join("approval_process.mex"))?;
    let guard = ReductionGuard::default();
    let env = ParamEnv::new()
        .with("processName", "DocumentApproval")
        .with("approvers", 2.0);

    let (store, m) = read_model(
        Source::named("approval_process.mex", &text),
        &schema,
        &env,
        &guard,
    )?;
    let m = m.ok_or("empty document")?;
    let ground = serialize_model(&store, m);
    print!("{ground}");

    let (again, m2) = read_model(Source::from(&ground), &schema, &ParamEnv::new(), &guard)?;
    let m2 = m2.ok_or("empty document")?;
    assert!(store.structurally_equal(m, &again, m2));
    assert_eq!(serialize_model(&again, m2), ground);
    println!("round trip: equal");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
