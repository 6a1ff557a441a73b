//! A computation that never reaches ground is cut off by the reduction
//! guard, and an atomic evaluation leaves the store as it was.

use std::error::Error;
use std::sync::Arc;

use modexpr::expr::{evaluate_atomic, ExprNode, ParamEnv, ReductionGuard};
use modexpr::store::Store;
use modexpr::syntax::parse_mmx;

fn forever() -> ExprNode {
    ExprNode::kappa(|_| Ok(vec![forever()]))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let schema = Arc::new(parse_mmx(
        "schema S { entity Item { } model Box { items: Item[] } }",
    )?);
    let e = ExprNode::model(&schema)?
        .name("B")
        .children(
            "items",
            vec![
                ExprNode::tag(&schema, "Item")?.name("first").build(),
                forever(),
            ],
        )?
        .build();

    let mut store = Store::new();
    let root = store.root();
    let before = store.len();
    let guard = ReductionGuard::with_depth(16);
    let err = evaluate_atomic(&e, &ParamEnv::new(), &mut store, root, &guard)
        .err()
        .ok_or("diverging expression terminated")?;
    println!("{err}");
    assert_eq!(store.len(), before);
    println!("store unchanged: {} element(s)", store.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
