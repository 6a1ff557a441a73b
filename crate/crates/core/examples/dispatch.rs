//! Rule selection by most specific source type. A specialization point
//! for organizational units has options for departments and boards; plain
//! units fall back to the point itself.

use std::error::Error;
use std::sync::Arc;

use modexpr::syntax::parse_mmx;
use modexpr::transform::{dispatch, Rule, RuleKind, TransformationSpec};

const ORG: &str = "schema Org {
  entity Unit { }
  entity Department : Unit { }
  entity Lab : Department { }
  entity Board : Unit { }
  model Organization { units: Unit[] }
}";

const OUT: &str = "schema Out { model Report { } }";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let org = Arc::new(parse_mmx(ORG)?);
    let out = Arc::new(parse_mmx(OUT)?);
    let ty = |n: &str| org.entity(n).cloned().ok_or(format!("no {n}"));

    let mut spec = TransformationSpec::new("Org2Report", &org, &out);
    let empty = |_: &modexpr::transform::RuleCall| Ok(Vec::new());
    spec.add_rule(Rule::new(
        "Unit2Line",
        &ty("Unit")?,
        RuleKind::SpecPoint,
        empty,
    ))?;
    let option = RuleKind::SpecOption("Unit2Line".into());
    spec.add_rule(Rule::new(
        "Department2Line",
        &ty("Department")?,
        option.clone(),
        empty,
    ))?;
    spec.add_rule(Rule::new("Board2Line", &ty("Board")?, option, empty))?;

    for name in ["Unit", "Department", "Lab", "Board"] {
        let rule = dispatch(&spec, &ty(name)?)?;
        println!("{name:<10} -> {} ({})", rule.name, rule.kind);
    }
    assert_eq!(dispatch(&spec, &ty("Lab")?)?.name, "Department2Line");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
