//! A template taking another template as argument. The generic approval
//! workflow is given a two-step writing phase in place of a single task,
//! once from a file and once built in Rust.

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use modexpr::expr::{
    evaluate_atomic, ExprNode, ParamDecl, ParamEnv, ParamKind, ReductionGuard, Template, Value,
};
use modexpr::schema::SchemaSet;
use modexpr::store::{PropertyValue, Store};
use modexpr::syntax::{load_schema, load_template, serialize_model};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schema = load_schema(&fixtures.join("workflow.mmx"), &SchemaSet::new())?;
    let generic = load_template(&fixtures.join("generic_approval.mex"), &schema)?;
    let two_step = Arc::new(load_template(
        &fixtures.join("two_step_write.mex"),
        &schema,
    )?);

    // `name` is supplied by the caller at the point of use.
    let s = schema.clone();
    let reviewed = Arc::new(Template::new(
        "reviewed",
        vec![ParamDecl::new("name", ParamKind::String)],
        move |env| {
            let Value::Str(name) = env.get("name")? else {
                unreachable!("checked by the template")
            };
            let task = |suffix: &str| {
                ExprNode::tag(&s, "Task").map(|b| b.name(format!("{name} ({suffix})")).build())
            };
            let by = PropertyValue::str("Reviewer");
            Ok(vec![ExprNode::tag(&s, "Sequence")?
                .children(
                    "steps",
                    vec![
                        task("draft")?,
                        ExprNode::tag(&s, "Task")?
                            .name(format!("{name} (review)"))
                            .prop("performer", by)?
                            .build(),
                    ],
                )?
                .build()])
        },
    ));

    for worker in [two_step, reviewed] {
        let env = ParamEnv::new()
            .with("worker", Value::Template(worker))
            .with("document", "Contract")
            .with("approvers", 2.0)
            .with("mode", "parallel");
        let mut store = Store::new();
        let root = store.root();
        for e in generic.apply(&env)? {
            let m = evaluate_atomic(&e, &env, &mut store, root, &ReductionGuard::default())?[0];
            print!("{}", serialize_model(&store, m));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
