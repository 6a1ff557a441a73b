//! Seeded generators shared by the property suites: random schemas (as MMX
//! text), well-typed expressions over them, and validated transformation
//! specifications with a brute-force dispatch oracle.
#![allow(dead_code)]

use std::fmt::Write;
use std::sync::Arc;

use modexpr::expr::{ElemHandle, ExprError, ExprNode, ParamEnv, TextExpr};
use modexpr::schema::TypeSchema;
use modexpr::store::{DataValue, ElemId, PropertyValue, Store};
use modexpr::syntax::parse_mmx;
use modexpr::transform::{Rule, RuleKind, TransformationSpec};
use modexpr::typesys::{BaseType, EntityRef, Multiplicity, TypeDescriptor};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Props whose name starts with `c` are filled with nested elements, props
/// starting with `r` with references; both are entity-typed in the schema.
pub fn schema_text(rng: &mut Rng8, name: &str) -> String {
    let n = rng.gen_range(2..=6);
    let mut text = format!("schema {name} {{\n");
    let mults = ["", "?", "[]", "[+]"];
    for i in 0..n {
        let parent = if i > 0 && rng.gen_bool(0.5) {
            format!(" : E{}", rng.gen_range(0..i))
        } else {
            String::new()
        };
        let _ = write!(text, "  entity E{i}{parent} {{");
        for k in 0..rng.gen_range(0..=4) {
            match rng.gen_range(0..3) {
                0 => {
                    let ty = ["string", "number", "boolean"].choose(rng).unwrap();
                    let m = mults.choose(rng).unwrap();
                    let _ = write!(text, " d{i}_{k}: {ty}{m}");
                }
                // Mandatory containment only points to earlier entities, so
                // every type has a finite instance.
                1 => {
                    let j = rng.gen_range(0..n);
                    let m = if j < i {
                        mults.choose(rng).unwrap()
                    } else {
                        ["?", "[]"].choose(rng).unwrap()
                    };
                    let _ = write!(text, " c{i}_{k}: E{j}{m}");
                }
                _ => {
                    let j = rng.gen_range(0..n);
                    let m = ["?", "[]"].choose(rng).unwrap();
                    let _ = write!(text, " r{i}_{k}: ref({name}::E{j}){m}");
                }
            }
        }
        text.push_str(" }\n");
    }
    text.push_str("  model M {");
    for k in 0..rng.gen_range(1..=3) {
        let j = rng.gen_range(0..n);
        let m = ["[]", "[+]", "?", ""].choose(rng).unwrap();
        let _ = write!(text, " c_m{k}: E{j}{m}");
    }
    text.push_str(" }\n}\n");
    text
}

pub fn schema(rng: &mut Rng8, name: &str) -> Arc<TypeSchema> {
    let text = schema_text(rng, name);
    Arc::new(parse_mmx(text.as_str()).unwrap_or_else(|e| panic!("{e}\n{text}")))
}

fn random_string(rng: &mut Rng8) -> String {
    const CHARS: &[char] = &[
        'a', 'b', 'z', 'Q', '0', '7', ' ', '"', '\\', '$', '{', '}', '<', '/', 'é', '✓', '-',
    ];
    (0..rng.gen_range(0..8))
        .map(|_| *CHARS.choose(rng).unwrap())
        .collect()
}

fn random_data(rng: &mut Rng8, b: BaseType) -> PropertyValue {
    PropertyValue::Data(match b {
        BaseType::String => DataValue::Str(random_string(rng)),
        BaseType::Number => DataValue::Num(match rng.gen_range(0..3) {
            0 => rng.gen_range(-100..100) as f64,
            1 => rng.gen_range(-1.0e6..1.0e6),
            _ => rng.gen_range(-4096..4096) as f64 / 64.0,
        }),
        BaseType::Boolean => DataValue::Bool(rng.gen()),
    })
}

fn count(rng: &mut Rng8, mult: Multiplicity, collection: bool, deep: bool) -> usize {
    match (mult, collection) {
        (Multiplicity::One, false) => 1,
        (Multiplicity::ZeroOrOne, false) => usize::from(!deep && rng.gen_bool(0.6)),
        (Multiplicity::OneOrMore, _) => {
            if deep {
                1
            } else {
                rng.gen_range(1..=3)
            }
        }
        _ => {
            if deep {
                0
            } else {
                rng.gen_range(0..=3)
            }
        }
    }
}

/// Well-typed model expression generator.
pub struct ExprGen<'a> {
    pub schema: &'a Arc<TypeSchema>,
    pub rng: &'a mut Rng8,
    /// Names and types of elements that exist before the next reference.
    created: Vec<(String, EntityRef)>,
    next: usize,
    pub max_depth: usize,
}

impl<'a> ExprGen<'a> {
    pub fn new(schema: &'a Arc<TypeSchema>, rng: &'a mut Rng8) -> Self {
        ExprGen {
            schema,
            rng,
            created: Vec::new(),
            next: 0,
            max_depth: 4,
        }
    }

    fn fresh(&mut self) -> String {
        self.next += 1;
        if self.rng.gen_bool(0.3) {
            format!("node {}", self.next)
        } else {
            format!("e{}", self.next)
        }
    }

    fn concrete(&mut self, ty: &EntityRef, deep: bool) -> EntityRef {
        if deep {
            return ty.clone();
        }
        let subs: Vec<EntityRef> = self
            .schema
            .own_entities()
            .filter(|e| e.is_subtype_of(ty))
            .cloned()
            .collect();
        subs.choose(self.rng).cloned().unwrap_or_else(|| ty.clone())
    }

    fn data_props(&mut self, ty: &EntityRef) -> Vec<(String, PropertyValue)> {
        let mut out = Vec::new();
        for (k, decl) in ty.all_props().iter() {
            if k == "name" || decl.ty.is_entity_valued() {
                continue;
            }
            let TypeDescriptor::Base(b) = decl.member_type().innermost() else {
                continue;
            };
            let b = *b;
            let v = if decl.is_collection() {
                let lo = usize::from(decl.mult == Multiplicity::OneOrMore);
                let n = self.rng.gen_range(lo..=3);
                PropertyValue::Seq((0..n).map(|_| random_data(self.rng, b)).collect())
            } else if decl.mult == Multiplicity::ZeroOrOne && self.rng.gen_bool(0.3) {
                continue;
            } else {
                random_data(self.rng, b)
            };
            out.push((k.to_string(), v));
        }
        out
    }

    /// Children for the `c`-props of `ty`, then references for its
    /// `r`-props, in that order so references only see created elements.
    fn slots(&mut self, ty: &EntityRef, depth: usize) -> Vec<(String, Vec<ExprNode>)> {
        let deep = depth >= self.max_depth;
        let mut out = Vec::new();
        let props = ty.all_props();
        for (k, decl) in props.iter().filter(|(k, _)| k.starts_with('c')) {
            let target = self.schema.member_entity(decl).expect("entity prop");
            let n = count(self.rng, decl.mult, decl.is_collection(), deep);
            let mut kids: Vec<ExprNode> = (0..n)
                .map(|_| {
                    let t = self.concrete(&target, deep);
                    self.element(&t, depth + 1)
                })
                .collect();
            if decl.is_collection() && !deep && self.rng.gen_bool(0.3) {
                kids.push(self.repeat(&target));
            }
            if !kids.is_empty() && self.rng.gen_bool(0.25) {
                let inner = kids;
                kids = vec![ExprNode::kappa(move |_| Ok(inner.clone()))];
            }
            out.push((k.to_string(), kids));
        }
        for (k, decl) in props.iter().filter(|(k, _)| k.starts_with('r')) {
            let target = self.schema.member_entity(decl).expect("entity prop");
            let cands: Vec<String> = self
                .created
                .iter()
                .filter(|(_, t)| t.is_subtype_of(&target))
                .map(|(n, _)| n.clone())
                .collect();
            let n = if decl.is_collection() { 2 } else { 1 };
            let mut kids = Vec::new();
            for _ in 0..n {
                if let Some(c) = cands.choose(self.rng) {
                    if self.rng.gen_bool(0.7) && !kids_contains(&kids, c) {
                        kids.push((c.clone(), ExprNode::reference_typed(c.as_str(), &target)));
                    }
                }
            }
            if !kids.is_empty() {
                out.push((k.to_string(), kids.into_iter().map(|(_, n)| n).collect()));
            }
        }
        out
    }

    /// A κ producing `n` leaf elements, `n` taken from the environment.
    fn repeat(&mut self, target: &EntityRef) -> ExprNode {
        let prefix = self.fresh().replace(' ', "_");
        let schema = self.schema.clone();
        let target = target.clone();
        ExprNode::kappa(move |env: &ParamEnv| {
            let n = env.get("n")?.as_num().unwrap_or(0.0) as usize;
            let tag = env.get("tag")?.to_string();
            let mut out = Vec::new();
            for i in 0..n {
                let b = ExprNode::element(&schema, &target).name(format!("{prefix}-{tag}-{i}"));
                let b = fill_mandatory(&schema, &target, b, &format!("{prefix}-{tag}-{i}"))?;
                out.push(b.build());
            }
            Ok(out)
        })
    }

    pub fn element(&mut self, ty: &EntityRef, depth: usize) -> ExprNode {
        let name = self.fresh();
        self.created.push((name.clone(), ty.clone()));
        let mut b = ExprNode::element(self.schema, ty).name(if self.rng.gen_bool(0.2) {
            let fixed = name.clone();
            TextExpr::computed(move |_| Ok(fixed.clone()))
        } else {
            TextExpr::from(name.as_str())
        });
        for (k, v) in self.data_props(ty) {
            b = b.prop(&k, v).expect("data prop");
        }
        for (k, kids) in self.slots(ty, depth) {
            b = b.children(&k, kids).expect("typed children");
        }
        b.build()
    }

    /// A μ over the schema's model type named `name`.
    pub fn model(&mut self, name: &str) -> ExprNode {
        let mt = self.schema.model_type().unwrap().clone();
        let mut b = ExprNode::model(self.schema).unwrap().name(name);
        for (k, kids) in self.slots(&mt, 0) {
            b = b.children(&k, kids).expect("typed children");
        }
        b.build()
    }
}

fn kids_contains(kids: &[(String, ExprNode)], name: &str) -> bool {
    kids.iter().any(|(n, _)| n == name)
}

/// Minimal children for the mandatory `c`-props of `ty`, named under
/// `prefix`. Only declared types are used, so recursion terminates.
fn fill_mandatory(
    schema: &Arc<TypeSchema>,
    ty: &EntityRef,
    mut b: modexpr::expr::ConstructBuilder,
    prefix: &str,
) -> Result<modexpr::expr::ConstructBuilder, ExprError> {
    for (k, decl) in ty.all_props().iter() {
        if k == "name" {
            continue;
        }
        let needed = matches!(decl.mult, Multiplicity::One | Multiplicity::OneOrMore);
        if !needed {
            continue;
        }
        if decl.ty.is_entity_valued() {
            let target = schema.member_entity(decl).unwrap();
            let child_name = format!("{prefix}.{k}");
            let child = ExprNode::element(schema, &target).name(child_name.as_str());
            let child = fill_mandatory(schema, &target, child, &child_name)?.build();
            b = b.children(k, vec![child])?;
        } else if let TypeDescriptor::Base(base) = decl.member_type().innermost() {
            let v = match base {
                BaseType::String => PropertyValue::str("x"),
                BaseType::Number => PropertyValue::num(1.0),
                BaseType::Boolean => PropertyValue::bool(true),
            };
            let v = if decl.is_collection() {
                PropertyValue::Seq(vec![v])
            } else {
                v
            };
            b = b.prop(k, v)?;
        }
    }
    Ok(b)
}

pub fn env(rng: &mut Rng8) -> ParamEnv {
    ParamEnv::new()
        .with("n", rng.gen_range(0..4) as f64)
        .with("tag", format!("t{}", rng.gen_range(0..100)))
}

// ---- transformations ----

pub const TARGET_MMX: &str = "schema Out-Schema {
  entity Out { rule: string src: string subs: Out[] }
  model OutModel { outs: Out[] }
}";

pub fn target_schema() -> Arc<TypeSchema> {
    Arc::new(parse_mmx(TARGET_MMX).unwrap())
}

/// Elements nested directly under `id`, in link order.
pub fn contained(store: &Store, id: ElemId) -> Vec<ElemId> {
    store
        .get(id)
        .links()
        .iter()
        .filter(|l| {
            !l.derived && store.get(l.target).container() == Some((id, l.property.as_str()))
        })
        .map(|l| l.target)
        .collect()
}

fn out_rule(name: &str, ty: &EntityRef, kind: RuleKind, target: &Arc<TypeSchema>) -> Rule {
    let rule_name = name.to_string();
    let target = target.clone();
    Rule::new(name, ty, kind, move |call| {
        let out = target.entity("Out").unwrap().clone();
        let src = call.source.clone();
        let mut subs = Vec::new();
        for c in contained(src.store(), src.id()) {
            subs.push(call.ctx.apply(&ElemHandle::new(src.store().clone(), c))?);
        }
        let node = ExprNode::element(&target, &out)
            .name(format!("{rule_name}-{}", src.name()))
            .prop("rule", PropertyValue::str(rule_name.as_str()))?
            .prop("src", PropertyValue::str(src.qname()))?
            .children("subs", subs)?
            .build();
        Ok(vec![node])
    })
}

/// A spec over `source` that passes validation by construction: a top rule,
/// a catch-all on ModelElement, and random regular rules, points and
/// pairwise incomparable options.
pub fn spec(rng: &mut Rng8, source: &Arc<TypeSchema>) -> TransformationSpec {
    let target = target_schema();
    let mut spec = TransformationSpec::new("Gen", source, &target);
    let mt = source.model_type().unwrap().clone();
    let tgt = target.clone();
    spec.add_rule(Rule::new("top", &mt, RuleKind::Regular, move |call| {
        let src = call.source.clone();
        let mut outs = Vec::new();
        for c in contained(src.store(), src.id()) {
            outs.push(call.ctx.apply(&ElemHandle::new(src.store().clone(), c))?);
        }
        Ok(vec![ExprNode::model(&tgt)?
            .name("out")
            .children("outs", outs)?
            .build()])
    }))
    .unwrap();
    spec.set_top("top");
    let base = source.entity("ModelElement").unwrap().clone();
    spec.add_rule(out_rule("base", &base, RuleKind::Regular, &target))
        .unwrap();
    let entities: Vec<EntityRef> = source
        .own_entities()
        .filter(|e| !e.is_subtype_of(&mt))
        .cloned()
        .collect();
    let mut claimed: Vec<EntityRef> = Vec::new();
    for e in &entities {
        if claimed.iter().any(|c| c.name() == e.name()) || !rng.gen_bool(0.5) {
            continue;
        }
        claimed.push(e.clone());
        if rng.gen_bool(0.5) {
            spec.add_rule(out_rule(
                &format!("R{}", e.name()),
                e,
                RuleKind::Regular,
                &target,
            ))
            .unwrap();
            continue;
        }
        let point = format!("P{}", e.name());
        spec.add_rule(out_rule(&point, e, RuleKind::SpecPoint, &target))
            .unwrap();
        let mut opts: Vec<EntityRef> = Vec::new();
        for s in &entities {
            if s.name() != e.name()
                && s.is_subtype_of(e)
                && !opts
                    .iter()
                    .any(|o| o.is_subtype_of(s) || s.is_subtype_of(o))
                && rng.gen_bool(0.7)
            {
                opts.push(s.clone());
                spec.add_rule(out_rule(
                    &format!("O{}{}", e.name(), s.name()),
                    s,
                    RuleKind::SpecOption(point.clone()),
                    &target,
                ))
                .unwrap();
            }
        }
    }
    spec
}

/// Brute force over all rules: the (invoked, dispatched) pair for an
/// element of type `ty` reached through `{apply}`.
pub fn oracle(spec: &TransformationSpec, ty: &EntityRef) -> Option<(String, String)> {
    let applicable = |r: &&Rule| ty.is_subtype_of(&r.source_type);
    let global: Vec<&Rule> = spec
        .rules
        .values()
        .filter(|r| {
            matches!(r.kind, RuleKind::Regular | RuleKind::SpecPoint) && r.extra_params.is_empty()
        })
        .filter(applicable)
        .collect();
    let best = global.iter().find(|r| {
        global
            .iter()
            .all(|o| r.source_type.is_subtype_of(&o.source_type))
    })?;
    if best.kind != RuleKind::SpecPoint {
        return Some((best.name.clone(), best.name.clone()));
    }
    let family: Vec<&Rule> = spec
        .rules
        .values()
        .filter(|r| r.name == best.name || r.kind == RuleKind::SpecOption(best.name.clone()))
        .filter(applicable)
        .collect();
    let pick = family.iter().find(|r| {
        family
            .iter()
            .all(|o| r.source_type.is_subtype_of(&o.source_type))
    })?;
    Some((best.name.clone(), pick.name.clone()))
}
