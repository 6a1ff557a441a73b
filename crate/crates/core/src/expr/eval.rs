use std::sync::Arc;

use crate::expr::{
    Construct, ExprError, ExprNode, GuardLimit, KappaLabel, ParamEnv, RefNode, Slot, TextExpr,
    ValueExpr,
};
use crate::store::{ElemId, PropertyRecord, PropertyValue, QName, Store};
use crate::typesys::EntityRef;

/// Bounds on computation: maximum κ nesting depth and maximum number of
/// nodes visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionGuard {
    pub max_depth: usize,
    pub max_nodes: usize,
}

impl Default for ReductionGuard {
    fn default() -> Self {
        ReductionGuard {
            max_depth: 64,
            max_nodes: 1_000_000,
        }
    }
}

impl ReductionGuard {
    pub fn with_depth(max_depth: usize) -> Self {
        ReductionGuard {
            max_depth,
            ..Self::default()
        }
    }
}

/// Hooks called during evaluation, in document order.
pub trait EvalObserver {
    fn enter_kappa(
        &mut self,
        _label: Option<&KappaLabel>,
        _store: &Store,
    ) -> Result<(), ExprError> {
        Ok(())
    }

    fn exit_kappa(&mut self, _label: Option<&KappaLabel>, _produced: &[ElemId], _store: &Store) {}

    fn created(&mut self, _id: ElemId, _store: &Store) {}
}

pub struct NoObserver;

impl EvalObserver for NoObserver {}

struct Counter<'g> {
    guard: &'g ReductionGuard,
    nodes: usize,
}

impl Counter<'_> {
    fn visit(&mut self) -> Result<(), ExprError> {
        self.nodes += 1;
        if self.nodes > self.guard.max_nodes {
            return Err(ExprError::GuardExceeded {
                limit: GuardLimit::Nodes,
                max: self.guard.max_nodes,
            });
        }
        Ok(())
    }

    fn descend(&self, depth: usize) -> Result<usize, ExprError> {
        let depth = depth + 1;
        if depth > self.guard.max_depth {
            return Err(ExprError::GuardExceeded {
                limit: GuardLimit::Depth,
                max: self.guard.max_depth,
            });
        }
        Ok(depth)
    }
}

/// Replaces every κ by the sequence it produces, recursively, and resolves
/// every computed literal. The result is ground.
pub fn reduce(
    e: &ExprNode,
    env: &ParamEnv,
    guard: &ReductionGuard,
) -> Result<Vec<ExprNode>, ExprError> {
    let mut c = Counter { guard, nodes: 0 };
    reduce_node(&mut c, e, env, 0)
}

fn reduce_node(
    c: &mut Counter,
    e: &ExprNode,
    env: &ParamEnv,
    depth: usize,
) -> Result<Vec<ExprNode>, ExprError> {
    c.visit()?;
    match e {
        ExprNode::Kappa(k) => {
            let depth = c.descend(depth)?;
            let env = k.bound.as_deref().unwrap_or(env);
            let produced = (k.f)(env)?;
            let mut out = Vec::new();
            for p in &produced {
                out.extend(reduce_node(c, p, env, depth)?);
            }
            Ok(out)
        }
        ExprNode::Ref(r) => Ok(vec![ExprNode::Ref(Arc::new(RefNode {
            path: TextExpr::Lit(r.path.eval(env)?),
            expected: r.expected.clone(),
        }))]),
        ExprNode::Model(con) | ExprNode::Element(con) => {
            let name = match &con.name {
                Some(t) => Some(TextExpr::Lit(t.eval(env)?)),
                None => None,
            };
            let mut props = Vec::with_capacity(con.props.len());
            for (k, v) in &con.props {
                props.push((k.clone(), ValueExpr::Lit(v.eval(env)?)));
            }
            let mut slots = Vec::with_capacity(con.slots.len());
            for slot in &con.slots {
                let expected = slot_type(con, slot);
                let mut children = Vec::new();
                for ch in &slot.children {
                    let produced = reduce_node(c, ch, env, depth)?;
                    if matches!(ch, ExprNode::Kappa(_)) {
                        for p in &produced {
                            if let Some(t) = p.static_type() {
                                if !t.is_subtype_of(&expected) {
                                    return Err(kappa_type_error(slot, &expected, t));
                                }
                            }
                        }
                    }
                    children.extend(produced);
                }
                if !is_collection(con, slot) && children.len() > 1 {
                    return Err(ExprError::SlotArityError {
                        element: describe(con, name.as_ref()),
                        property: slot.property.clone(),
                        count: children.len(),
                    });
                }
                slots.push(Slot {
                    property: slot.property.clone(),
                    children,
                });
            }
            let reduced = Arc::new(Construct {
                ty: con.ty.clone(),
                schema: con.schema.clone(),
                name,
                props,
                slots,
            });
            Ok(vec![match e {
                ExprNode::Model(_) => ExprNode::Model(reduced),
                _ => ExprNode::Element(reduced),
            }])
        }
    }
}

fn slot_type(con: &Construct, slot: &Slot) -> EntityRef {
    con.slot_type(&slot.property)
        .expect("slot types are checked when the node is built")
}

fn is_collection(con: &Construct, slot: &Slot) -> bool {
    con.slot_decl(&slot.property)
        .map(|d| d.is_collection())
        .unwrap_or(false)
}

fn describe(con: &Construct, name: Option<&TextExpr>) -> String {
    match name {
        Some(TextExpr::Lit(n)) => format!("{} `{n}`", con.ty.name()),
        _ => con.ty.name().to_string(),
    }
}

fn kappa_type_error(slot: &Slot, expected: &EntityRef, actual: &EntityRef) -> ExprError {
    ExprError::KappaTypeError {
        slot: slot.property.clone(),
        expected: expected.name().to_string(),
        actual: actual.name().to_string(),
    }
}

/// Evaluates `e` in document order inside model `model`, returning the
/// top-level elements produced or retrieved. Elements created before a
/// failure stay in the store; see [`evaluate_atomic`].
pub fn evaluate(
    e: &ExprNode,
    env: &ParamEnv,
    store: &mut Store,
    model: ElemId,
    guard: &ReductionGuard,
) -> Result<Vec<ElemId>, ExprError> {
    evaluate_observed(e, env, store, model, guard, &mut NoObserver)
}

/// Like [`evaluate`], but works on a scratch copy of the store that is
/// committed only on success.
pub fn evaluate_atomic(
    e: &ExprNode,
    env: &ParamEnv,
    store: &mut Store,
    model: ElemId,
    guard: &ReductionGuard,
) -> Result<Vec<ElemId>, ExprError> {
    let mut scratch = store.clone();
    let out = evaluate(e, env, &mut scratch, model, guard)?;
    *store = scratch;
    Ok(out)
}

pub fn evaluate_observed(
    e: &ExprNode,
    env: &ParamEnv,
    store: &mut Store,
    model: ElemId,
    guard: &ReductionGuard,
    observer: &mut dyn EvalObserver,
) -> Result<Vec<ElemId>, ExprError> {
    let mut ev = Evaluator {
        store,
        counter: Counter { guard, nodes: 0 },
        observer,
    };
    Ok(ev
        .node(e, env, model, 0)?
        .into_iter()
        .map(|(id, _)| id)
        .collect())
}

struct Evaluator<'a, 'g> {
    store: &'a mut Store,
    counter: Counter<'g>,
    observer: &'a mut dyn EvalObserver,
}

impl Evaluator<'_, '_> {
    /// Returns the produced elements, each flagged whether it was created
    /// (as opposed to retrieved by reference).
    fn node(
        &mut self,
        e: &ExprNode,
        env: &ParamEnv,
        model: ElemId,
        depth: usize,
    ) -> Result<Vec<(ElemId, bool)>, ExprError> {
        self.counter.visit()?;
        match e {
            ExprNode::Kappa(k) => {
                let depth = self.counter.descend(depth)?;
                let env = k.bound.as_deref().unwrap_or(env);
                self.observer.enter_kappa(k.label.as_ref(), self.store)?;
                let produced = (k.f)(env)?;
                let mut out = Vec::new();
                for p in &produced {
                    out.extend(self.node(p, env, model, depth)?);
                }
                let ids: Vec<ElemId> = out.iter().map(|(id, _)| *id).collect();
                self.observer.exit_kappa(k.label.as_ref(), &ids, self.store);
                Ok(out)
            }
            ExprNode::Ref(r) => {
                let path = r.path.eval(env)?;
                let q = QName::parse(&path).map_err(crate::store::StoreError::from)?;
                let id = self.store.resolve(model, &q)?;
                if let Some(t) = &r.expected {
                    let actual = self.store.get(id).ty();
                    if !actual.is_subtype_of(t) {
                        return Err(ExprError::ReferenceTypeMismatch {
                            path,
                            expected: t.name().to_string(),
                            actual: actual.name().to_string(),
                        });
                    }
                }
                Ok(vec![(id, false)])
            }
            ExprNode::Model(con) | ExprNode::Element(con) => {
                let is_model = matches!(e, ExprNode::Model(_));
                let name = match &con.name {
                    Some(t) => t.eval(env)?,
                    None => self.store.fresh_name(model, &con.ty),
                };
                let mut rec = PropertyRecord::new();
                for (k, v) in &con.props {
                    rec.insert(k.clone(), v.eval(env)?);
                }
                let id = if is_model {
                    self.store.new_model(model, &name, &con.schema, rec)?
                } else {
                    self.store.new_element(model, &name, &con.ty, rec)?
                };
                self.observer.created(id, self.store);
                let inner = if is_model { id } else { model };
                let owner = self
                    .store
                    .get(id)
                    .owner()
                    .expect("new elements have an owner");
                for slot in &con.slots {
                    let expected = slot_type(con, slot);
                    let collection = is_collection(con, slot);
                    let mut count = 0;
                    for ch in &slot.children {
                        for (cid, created) in self.node(ch, env, inner, depth)? {
                            let actual = self.store.get(cid).ty().clone();
                            if !actual.is_subtype_of(&expected) {
                                return Err(if matches!(ch, ExprNode::Kappa(_)) {
                                    kappa_type_error(slot, &expected, &actual)
                                } else {
                                    ExprError::SlotTypeMismatch {
                                        slot: slot.property.clone(),
                                        expected: expected.name().to_string(),
                                        actual: actual.name().to_string(),
                                    }
                                });
                            }
                            count += 1;
                            if !collection && count > 1 {
                                return Err(ExprError::SlotArityError {
                                    element: self.store.qname(id),
                                    property: slot.property.clone(),
                                    count,
                                });
                            }
                            if created && self.store.get(cid).container().is_none() {
                                self.store.set_container(cid, id, &slot.property);
                            }
                            let mut link = PropertyRecord::new();
                            link.insert(slot.property.clone(), PropertyValue::Elem(cid));
                            self.store.update_element(owner, id, link)?;
                        }
                    }
                }
                Ok(vec![(id, true)])
            }
        }
    }
}
