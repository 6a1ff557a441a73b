//! Builds models with the expression API and checks them against their
//! schema. The second model breaks a multiplicity and a property type.

use std::error::Error;
use std::sync::Arc;

use modexpr::expr::{evaluate, ExprNode, ParamEnv, ReductionGuard};
use modexpr::schema::conforms;
use modexpr::store::{PropertyValue, Store};
use modexpr::syntax::parse_mmx;

const LIBRARY: &str = "schema Library {
  entity Author { born: number? }
  entity Book { title: string isbn: string[] author: ref(Library::Author) }
  model Catalog { authors: Author[] books: Book[] }
}";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let schema = Arc::new(parse_mmx(LIBRARY)?);
    let guard = ReductionGuard::default();
    let mut store = Store::new();
    let root = store.root();

    let good = ExprNode::model(&schema)?
        .name("Shelf")
        .child(
            "authors",
            ExprNode::tag(&schema, "Author")?.name("Le Guin").build(),
        )?
        .child(
            "books",
            ExprNode::tag(&schema, "Book")?
                .name("Earthsea")
                .prop("title", PropertyValue::str("A Wizard of Earthsea"))?
                .child("author", ExprNode::reference("Le Guin"))?
                .build(),
        )?
        .build();
    let m = evaluate(&good, &ParamEnv::new(), &mut store, root, &guard)?[0];
    let report = conforms(&store, m, &schema);
    println!(
        "{}: {}",
        store.qname(m),
        if report.is_ok() {
            "conforms"
        } else {
            "violations"
        }
    );

    let bad = ExprNode::model(&schema)?
        .name("Pile")
        .child(
            "books",
            ExprNode::tag(&schema, "Book")?
                .name("Untitled")
                .prop("title", PropertyValue::num(42.0))?
                .build(),
        )?
        .build();
    let m = evaluate(&bad, &ParamEnv::new(), &mut store, root, &guard)?[0];
    let report = conforms(&store, m, &schema);
    assert!(!report.is_ok());
    println!("{}:\n{report}", store.qname(m));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
