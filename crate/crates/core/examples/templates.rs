//! One template, two instantiations: the approval workflow for a contract
//! with parallel approvers and for an invoice with sequential ones.

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use modexpr::expr::{evaluate, instantiate, ParamEnv, ReductionGuard};
use modexpr::schema::{conforms, SchemaSet};
use modexpr::store::Store;
use modexpr::syntax::{load_schema, load_template, serialize_model};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schema = load_schema(&fixtures.join("workflow.mmx"), &SchemaSet::new())?;
    let approval = Arc::new(load_template(&fixtures.join("approval.mex"), &schema)?);

    let mut store = Store::new();
    let root = store.root();
    for (document, approvers, mode) in [
        ("Contract", 3.0, "parallel"),
        ("Invoice", 2.0, "sequential"),
    ] {
        let env = ParamEnv::new()
            .with("document", document)
            .with("approvers", approvers)
            .with("mode", mode);
        let e = instantiate(&approval, &env)?;
        let m = evaluate(
            &e,
            &ParamEnv::new(),
            &mut store,
            root,
            &ReductionGuard::default(),
        )?[0];
        assert!(conforms(&store, m, &schema).is_ok());
        print!("{}", serialize_model(&store, m));
    }

    // Missing arguments are caught before anything is built.
    let err = instantiate(&approval, &ParamEnv::new().with("document", "Memo")).err();
    println!("{}", err.ok_or("instantiated without arguments")?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
