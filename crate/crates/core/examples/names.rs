//! Nested model namespaces and qualified-name resolution: simple names,
//! paths into submodels, `..` to the enclosing model and absolute paths.

use std::error::Error;
use std::sync::Arc;

use modexpr::store::{PropertyRecord, Store};
use modexpr::syntax::parse_mmx;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let schema = Arc::new(parse_mmx(
        "schema S { entity Unit { } model Org { units: Unit[] } }",
    )?);
    let unit = schema.entity("Unit").ok_or("no Unit")?.clone();

    let mut st = Store::new();
    let acme = st.new_model(st.root(), "Acme Corp", &schema, PropertyRecord::new())?;
    let labs = st.new_model(acme, "Labs", &schema, PropertyRecord::new())?;
    st.new_element(acme, "Executive Board", &unit, PropertyRecord::new())?;
    st.new_element(labs, "Robotics", &unit, PropertyRecord::new())?;

    for (scope, path) in [
        (acme, "Executive Board"),
        (acme, "Labs/Robotics"),
        (labs, "../Executive Board"),
        (labs, "/Acme Corp/Labs/Robotics"),
    ] {
        let id = st.resolve_str(scope, path)?;
        println!("{:<16} {path:<26} -> {}", st.qname(scope), st.qname(id));
    }
    for (scope, path) in [(acme, "Robotics"), (labs, "Executive Board")] {
        let err = st.resolve_str(scope, path).err().ok_or("resolved")?;
        println!("{:<16} {path:<26} !! {err}", st.qname(scope));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
