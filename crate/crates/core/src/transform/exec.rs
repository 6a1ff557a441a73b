use std::any::Any;
use std::sync::Arc;

use chrono::{SecondsFormat, Utc};

use crate::expr::{
    evaluate_observed, ElemHandle, EvalObserver, ExprError, ExprNode, KappaLabel, ParamEnv,
    ReductionGuard, Value,
};
use crate::schema::conforms;
use crate::store::{ElemId, Store};
use crate::transform::{
    dispatch_candidates, dispatch_in_point, most_specific, validate_spec, Rule, RuleKind,
    TraceEntry, TraceModel, TransformError, TransformationSpec,
};

/// Label attached to the computation node of one rule invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub source: ElemId,
    /// Rule named at the call site (or selected by global dispatch).
    pub rule: String,
    /// Rule whose body actually ran.
    pub dispatched: String,
    pub kind: RuleKind,
}

/// What a rule body sees besides its source element: the specification,
/// the transformation parameters and the source store.
#[derive(Clone)]
pub struct TransformContext {
    spec: Arc<TransformationSpec>,
    params: ParamEnv,
    source: Arc<Store>,
}

pub struct RuleCall<'a> {
    pub source: ElemHandle,
    pub args: &'a ParamEnv,
    pub ctx: &'a TransformContext,
}

impl RuleCall<'_> {
    pub fn arg(&self, name: &str) -> Result<&Value, ExprError> {
        self.args.get(name)
    }

    pub fn param(&self, name: &str) -> Result<&Value, ExprError> {
        self.ctx.params.get(name)
    }
}

impl TransformContext {
    pub fn new(spec: Arc<TransformationSpec>, params: ParamEnv, source: Arc<Store>) -> Self {
        TransformContext {
            spec,
            params,
            source,
        }
    }

    pub fn spec(&self) -> &Arc<TransformationSpec> {
        &self.spec
    }

    pub fn params(&self) -> &ParamEnv {
        &self.params
    }

    pub fn source_store(&self) -> &Arc<Store> {
        &self.source
    }

    pub fn handle(&self, id: ElemId) -> ElemHandle {
        ElemHandle::new(self.source.clone(), id)
    }

    /// Invocation of the most specific rule for `e`.
    pub fn apply(&self, e: &ElemHandle) -> Result<ExprNode, ExprError> {
        let ty = e.element().ty();
        let candidate = most_specific(dispatch_candidates(&self.spec), ty).ok_or_else(|| {
            TransformError::NoApplicableRule(format!("{} ({})", e.qname(), ty.name()))
        })?;
        let chosen = if candidate.kind == RuleKind::SpecPoint {
            dispatch_in_point(&self.spec, &candidate.name, ty)?
        } else {
            candidate
        };
        Ok(self.invocation(&candidate.name, chosen, e, ParamEnv::new()))
    }

    /// Invocation of the named rule; a specialization point dispatches
    /// among its options.
    pub fn apply_rule(
        &self,
        name: &str,
        e: &ElemHandle,
        args: ParamEnv,
    ) -> Result<ExprNode, ExprError> {
        let rule = self
            .spec
            .rule(name)
            .ok_or_else(|| TransformError::UnknownRule(name.to_string()))?;
        check_args(rule, &args)?;
        let ty = e.element().ty();
        let chosen = if rule.kind == RuleKind::SpecPoint {
            dispatch_in_point(&self.spec, name, ty)?
        } else if rule.applies_to(ty) {
            rule
        } else {
            return Err(TransformError::NotApplicable {
                rule: name.to_string(),
                ty: ty.qualified(),
            }
            .into());
        };
        Ok(self.invocation(name, chosen, e, args))
    }

    fn invocation(&self, invoked: &str, rule: &Rule, e: &ElemHandle, args: ParamEnv) -> ExprNode {
        let label: KappaLabel = Arc::new(Invocation {
            source: e.id(),
            rule: invoked.to_string(),
            dispatched: rule.name.clone(),
            kind: rule.kind.clone(),
        });
        let ctx = self.clone();
        let body = rule.body.clone();
        let source = e.clone();
        ExprNode::kappa_labeled(label, move |_| {
            body(&RuleCall {
                source: source.clone(),
                args: &args,
                ctx: &ctx,
            })
        })
    }
}

fn check_args(rule: &Rule, args: &ParamEnv) -> Result<(), TransformError> {
    let bad = |message: String| TransformError::BadArguments {
        rule: rule.name.clone(),
        message,
    };
    for p in &rule.extra_params {
        let v = args
            .get(&p.name)
            .map_err(|_| bad(format!("missing argument `{}`", p.name)))?;
        if !p.kind.admits(v) {
            return Err(bad(format!(
                "argument `{}` expects {}, got {}",
                p.name,
                p.kind,
                v.kind_name()
            )));
        }
    }
    for (k, _) in args.iter() {
        if !rule.extra_params.iter().any(|p| p.name == k) {
            return Err(bad(format!("unexpected argument `{k}`")));
        }
    }
    Ok(())
}

/// Result of a successful execution.
pub struct Execution {
    pub store: Store,
    pub target: ElemId,
    pub trace: TraceModel,
}

/// Runs the top rule on the source model and evaluates the result into a
/// fresh target store, recording one trace entry per rule invocation.
pub fn execute(
    spec: &Arc<TransformationSpec>,
    source: &Arc<Store>,
    source_model: ElemId,
    params: &ParamEnv,
    guard: &ReductionGuard,
) -> Result<Execution, TransformError> {
    if let Some(e) = validate_spec(spec).errors.into_iter().next() {
        return Err(e);
    }
    for p in &spec.params {
        let v = params
            .get(&p.name)
            .map_err(|_| ExprError::MissingParameter {
                template: spec.name.clone(),
                name: p.name.clone(),
            })?;
        if !p.kind.admits(v) {
            return Err(ExprError::ParameterKindMismatch {
                name: p.name.clone(),
                expected: p.kind.to_string(),
                actual: v.kind_name().to_string(),
            }
            .into());
        }
    }
    let report = conforms(source, source_model, &spec.source_schema);
    if !report.is_ok() {
        return Err(TransformError::SourceNotConforming(report));
    }
    let top = spec
        .top_rule()
        .ok_or_else(|| TransformError::MissingTopRule("no top rule declared".to_string()))?;
    let ctx = TransformContext::new(spec.clone(), params.clone(), source.clone());
    let root = ctx.handle(source_model);
    let node = ctx.apply_rule(&top.name, &root, ParamEnv::new())?;

    let mut store = Store::new();
    let target_root = store.root();
    let mut recorder = Recorder {
        entries: Vec::new(),
        stack: Vec::new(),
        roots: Vec::new(),
        last_len: store.len(),
    };
    let produced = evaluate_observed(&node, params, &mut store, target_root, guard, &mut recorder)?;
    let target = match produced.as_slice() {
        [m] if store.get(*m).is_model() => *m,
        _ => {
            return Err(TransformError::TopRuleResult(format!(
                "got {} top-level elements",
                produced.len()
            )))
        }
    };
    let expected = spec
        .target_schema
        .model_type()
        .expect("validated target schema has a model type");
    if !store.get(target).ty().is_subtype_of(expected) {
        return Err(TransformError::TopRuleResult(format!(
            "{} is not a {}",
            store.get(target).ty().name(),
            expected.name()
        )));
    }
    let trace = TraceModel {
        name: format!(
            "{} to {}",
            source.get(source_model).name(),
            store.get(target).name()
        ),
        source_model: source.qname(source_model),
        target_model: store.qname(target),
        timestamp: Some(Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)),
        entries: recorder
            .roots
            .iter()
            .map(|i| recorder.entry(*i, source, &store))
            .collect(),
    };
    Ok(Execution {
        store,
        target,
        trace,
    })
}

struct RecEntry {
    inv: Invocation,
    targets: Vec<ElemId>,
    calls: Vec<usize>,
}

struct Recorder {
    entries: Vec<RecEntry>,
    stack: Vec<usize>,
    roots: Vec<usize>,
    last_len: usize,
}

fn invocation(label: Option<&KappaLabel>) -> Option<&Invocation> {
    let any: &(dyn Any + Send + Sync) = &**label?;
    any.downcast_ref::<Invocation>()
}

impl Recorder {
    fn entry(&self, i: usize, source: &Store, target: &Store) -> TraceEntry {
        let e = &self.entries[i];
        TraceEntry {
            source: source.qname(e.inv.source),
            rule: e.inv.rule.clone(),
            dispatched: e.inv.dispatched.clone(),
            rule_kind: e.inv.kind.trace_name().to_string(),
            targets: e.targets.iter().map(|t| target.qname(*t)).collect(),
            calls: e
                .calls
                .iter()
                .map(|c| self.entry(*c, source, target))
                .collect(),
        }
    }
}

impl EvalObserver for Recorder {
    fn enter_kappa(&mut self, label: Option<&KappaLabel>, store: &Store) -> Result<(), ExprError> {
        let Some(inv) = invocation(label) else {
            return Ok(());
        };
        if store.len() < self.last_len {
            return Err(ExprError::Computation(
                "target store shrank during execution".into(),
            ));
        }
        self.last_len = store.len();
        let idx = self.entries.len();
        self.entries.push(RecEntry {
            inv: inv.clone(),
            targets: Vec::new(),
            calls: Vec::new(),
        });
        match self.stack.last() {
            Some(&parent) => self.entries[parent].calls.push(idx),
            None => self.roots.push(idx),
        }
        self.stack.push(idx);
        Ok(())
    }

    fn exit_kappa(&mut self, label: Option<&KappaLabel>, _produced: &[ElemId], _store: &Store) {
        if invocation(label).is_some() {
            self.stack.pop();
        }
    }

    fn created(&mut self, id: ElemId, _store: &Store) {
        if let Some(&top) = self.stack.last() {
            self.entries[top].targets.push(id);
        }
    }
}
