//! Derives an approval workflow from an organization model: the worker's
//! document is approved by each unit on the way up, as far as the
//! sensitivity allows. Prints the target, the trace and the trace check.

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use modexpr::expr::{ElemHandle, ParamEnv, ReductionGuard, Value};
use modexpr::schema::SchemaSet;
use modexpr::syntax::{load_model, load_spec, serialize_model, serialize_trace};
use modexpr::transform::{check_trace, execute};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut set = SchemaSet::new();
    let spec = Arc::new(load_spec(&fixtures.join("org2wf.mtx"), &mut set)?);
    let (src, org) = load_model(&fixtures.join("acme.mex"), &spec.source_schema)?;
    let org = org.ok_or("empty source")?;
    let src = Arc::new(src);

    let judy = src.resolve_str(org, "Judy")?;
    let params = ParamEnv::new()
        .with("worker", Value::Elem(ElemHandle::new(src.clone(), judy)))
        .with("sensitivity", 2.0);
    let run = execute(&spec, &src, org, &params, &ReductionGuard::default())?;
    print!("{}", serialize_model(&run.store, run.target));
    print!("{}", serialize_trace(&run.trace, false)?);

    let report = check_trace(&run.trace, (&run.store, run.target), &spec, (&src, org));
    assert!(report.is_ok(), "{report}");
    println!(
        "trace covers all {} target elements",
        run.store.closure(run.target).len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
