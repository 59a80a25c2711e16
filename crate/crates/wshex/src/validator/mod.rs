//! The conformance engine: does a node's statement bag derive the shape
//! it was asked about?
//!
//! Shape expressions are judged per focus value (conditions, conjunction,
//! references, open/closed shapes), triple expressions per statement bag
//! (exact partition semantics, not counting), qualifier specifiers per
//! qualifier set of a single statement. Recursive references resolve
//! against the greatest fixed point: every (value, shape) pair starts out
//! assumed conforming and is downgraded when refuted, re-checking anything
//! that relied on it, until nothing changes. The rule system is
//! negation-free, so statuses only ever move down and the process
//! terminates on the maximal consistent assignment.
//!
//! Bag matching is a memoized backtracking search over subset bitmasks
//! with a per-pair step budget; blowing the budget yields a distinct
//! engine-limit outcome, never a wrong verdict.

mod engine;

use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde_json::json;
use thiserror::Error;

use crate::ast::{
    desugar_ps, desugar_te, well_formed, Diagnostic, NodeConstraint, Openness, PropertySpec,
    QualifierSpec, RangeError, Schema, ShapeExpr, ShapeLabel, TripleExpr,
};
use crate::model::{BuiltinDatatype, EntityId, Qualifier, Statement, Value, WikibaseGraph};

use engine::Engine;

/// Knobs for a validation run.
#[derive(Debug, Clone, Copy)]
pub struct ValidatorOptions {
    /// Use the literal qualifier-conjunction rule (both operands against
    /// the same qualifier set) instead of partition semantics.
    pub pedantic: bool,
    /// Partition-search steps allowed per (value, shape) evaluation
    /// before the engine gives up with [`Outcome::EngineLimit`].
    pub step_budget: u64,
}

impl Default for ValidatorOptions {
    fn default() -> Self {
        ValidatorOptions { pedantic: false, step_budget: 10_000_000 }
    }
}

/// Why a schema could not be compiled for validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("schema is not well-formed: {}", format_diagnostics(.0))]
    NotWellFormed(Vec<Diagnostic>),
    #[error(transparent)]
    Range(#[from] RangeError),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

/// Evaluation state of one (value, shape) pair. Doubles as the engine's
/// three-point lattice, ordered NonConforming < InProgress < Conforming:
/// conjunction is `min`, disjunction is `max`, and pairs are optimistic
/// (Conforming) until refuted. A pair still InProgress once the fixed
/// point stabilizes ran out of step budget; reports surface that as
/// [`Outcome::EngineLimit`] — InProgress itself never escapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValidationStatus {
    NonConforming,
    InProgress,
    Conforming,
}

impl From<bool> for ValidationStatus {
    fn from(b: bool) -> Self {
        if b {
            ValidationStatus::Conforming
        } else {
            ValidationStatus::NonConforming
        }
    }
}

/// Final per-target verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Conforming,
    NonConforming,
    /// The step budget (or the 128-statement bag ceiling) cut evaluation
    /// short; deliberately distinct from NonConforming.
    EngineLimit,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Conforming => "conforms",
            Outcome::NonConforming => "fails",
            Outcome::EngineLimit => "limit",
        }
    }
}

/// One validated target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportEntry {
    pub node: EntityId,
    pub shape: ShapeLabel,
    pub outcome: Outcome,
    /// For failing targets: rule names from the root of the derivation
    /// attempt down to the deepest rule that could not be applied.
    pub trace: Vec<String>,
}

impl fmt::Display for ReportEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}: ", self.node, self.shape)?;
        match self.outcome {
            Outcome::Conforming => write!(f, "CONFORMS"),
            Outcome::NonConforming => {
                write!(f, "FAILS")?;
                if !self.trace.is_empty() {
                    write!(f, " ({})", self.trace.join(" > "))?;
                }
                Ok(())
            }
            Outcome::EngineLimit => write!(f, "LIMIT (step budget exhausted)"),
        }
    }
}

/// Verdicts for every requested target, in request order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub entries: Vec<ReportEntry>,
}

impl ValidationReport {
    pub fn all_conforming(&self) -> bool {
        self.entries.iter().all(|e| e.outcome == Outcome::Conforming)
    }

    pub fn any_limit(&self) -> bool {
        self.entries.iter().any(|e| e.outcome == Outcome::EngineLimit)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "entries": self.entries.iter().map(|e| json!({
                "node": e.node.to_string(),
                "shape": e.shape.name(),
                "status": e.outcome.as_str(),
                "trace": e.trace,
            })).collect::<Vec<_>>()
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// A set of (entity, shape) pairs — the assignment the fixed point
/// settles on, usable to re-check verdicts against a frozen context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShapeAssignment {
    pairs: IndexSet<(EntityId, ShapeLabel)>,
}

impl ShapeAssignment {
    pub fn insert(&mut self, node: EntityId, shape: ShapeLabel) {
        self.pairs.insert((node, shape));
    }

    pub fn contains(&self, node: EntityId, shape: &ShapeLabel) -> bool {
        self.pairs.contains(&(node, shape.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(EntityId, ShapeLabel)> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The requested shape is not defined by the schema.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shape <{0}> is not defined in the schema")]
pub struct UnknownShape(pub ShapeLabel);

/// Evaluation was cut short by the step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("step budget exhausted")]
pub struct EngineLimit;

/// Why an ad-hoc bag match could not produce a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error(transparent)]
    UnknownShape(#[from] UnknownShape),
    #[error(transparent)]
    Limit(#[from] EngineLimit),
}

/// Verdict of a single-entity (streaming) check: `approximate` is set
/// when a shape check on a non-focus entity had to be assumed rather
/// than evaluated. Non-approximate verdicts, and every NonConforming
/// verdict, hold in the full graph too.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalVerdict {
    pub outcome: Outcome,
    pub approximate: bool,
}

/// Does the value satisfy the node condition?
///
/// Value sets compare entities by id and literals by (datatype, lexical
/// form); `Item`/`Property` datatypes classify entity references, every
/// other datatype classifies literals.
pub fn satisfies_cond(cond: &NodeConstraint, v: &Value) -> bool {
    match cond {
        NodeConstraint::AnyValue => true,
        NodeConstraint::Datatype(dt) => match v {
            Value::EntityRef(id) => match dt {
                BuiltinDatatype::Item => id.is_item(),
                BuiltinDatatype::Property => id.is_property(),
                _ => false,
            },
            Value::Data(dv) => {
                !matches!(dt, BuiltinDatatype::Item | BuiltinDatatype::Property)
                    && dv.datatype() == *dt
            }
        },
        NodeConstraint::ValueSet(values) => values.iter().any(|w| match (w, v) {
            (Value::EntityRef(a), Value::EntityRef(b)) => a == b,
            (Value::Data(a), Value::Data(b)) => {
                a.datatype() == b.datatype() && a.lexical() == b.lexical()
            }
            _ => false,
        }),
    }
}

// ---------------------------------------------------------------------
// Compiled schema: expression trees flattened into index arenas so the
// matcher can memoize on small ids instead of tree pointers.

pub(crate) type SeId = usize;
pub(crate) type TeId = usize;
pub(crate) type PsId = usize;
pub(crate) type QsId = usize;
pub(crate) type LabelId = usize;

#[derive(Debug, Clone)]
pub(crate) enum SeNode {
    Cond(NodeConstraint),
    And(SeId, SeId),
    Ref(LabelId),
    Shape { closed: bool, te: TeId },
}

#[derive(Debug, Clone)]
pub(crate) enum TeNode {
    Empty,
    EachOf(TeId, TeId),
    OneOf(TeId, TeId),
    Star(TeId),
    Tc { predicate: EntityId, value: SeId, qual: QsId },
}

#[derive(Debug, Clone)]
pub(crate) struct QsNode {
    pub(crate) closed: bool,
    pub(crate) body: PsId,
}

#[derive(Debug, Clone)]
pub(crate) enum PsNode {
    Empty,
    EachOf(PsId, PsId),
    OneOf(PsId, PsId),
    Star(PsId),
    Prop { property: EntityId, value: SeId },
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub(crate) labels: Vec<ShapeLabel>,
    pub(crate) label_ids: IndexMap<ShapeLabel, LabelId>,
    pub(crate) roots: Vec<SeId>,
    pub(crate) ses: Vec<SeNode>,
    pub(crate) tes: Vec<TeNode>,
    pub(crate) qss: Vec<QsNode>,
    pub(crate) pss: Vec<PsNode>,
    /// Statement predicates mentioned by each triple expression (the
    /// open-shape restriction set). Qualifier properties excluded.
    pub(crate) te_preds: Vec<IndexSet<EntityId>>,
    /// Qualifier properties mentioned by each property specifier (the
    /// open-qualifier restriction set).
    pub(crate) ps_preds: Vec<IndexSet<EntityId>>,
    /// Labels whose expression never inspects a neighborhood (conditions
    /// and conjunctions only, transitively through references). These
    /// evaluate exactly on any value in any graph.
    pub(crate) cond_only: Vec<bool>,
}

impl Compiled {
    fn compile(schema: &Schema) -> Result<Self, CompileError> {
        let issues = well_formed(schema);
        if !issues.is_empty() {
            return Err(CompileError::NotWellFormed(issues));
        }
        let core = schema.desugar()?;
        let mut c = Compiled {
            labels: Vec::new(),
            label_ids: IndexMap::new(),
            roots: Vec::new(),
            ses: Vec::new(),
            tes: Vec::new(),
            qss: Vec::new(),
            pss: Vec::new(),
            te_preds: Vec::new(),
            ps_preds: Vec::new(),
            cond_only: Vec::new(),
        };
        for label in core.labels() {
            let id = c.labels.len();
            c.labels.push(label.clone());
            c.label_ids.insert(label.clone(), id);
        }
        for (_, se) in core.shapes() {
            let root = c.compile_se(se);
            c.roots.push(root);
        }
        c.compute_cond_only();
        Ok(c)
    }

    fn compile_se(&mut self, se: &ShapeExpr) -> SeId {
        let node = match se {
            ShapeExpr::Cond(nc) => SeNode::Cond(nc.clone()),
            ShapeExpr::And(a, b) => {
                let a = self.compile_se(a);
                let b = self.compile_se(b);
                SeNode::And(a, b)
            }
            ShapeExpr::Ref(label) => {
                SeNode::Ref(*self.label_ids.get(label).expect("well-formedness checked refs"))
            }
            ShapeExpr::Shape { closed, te } => {
                SeNode::Shape { closed: *closed, te: self.compile_te(te) }
            }
        };
        self.ses.push(node);
        self.ses.len() - 1
    }

    fn compile_te(&mut self, te: &TripleExpr) -> TeId {
        let (node, preds) = match te {
            TripleExpr::Empty => (TeNode::Empty, IndexSet::new()),
            TripleExpr::EachOf(a, b) => {
                let a = self.compile_te(a);
                let b = self.compile_te(b);
                let mut preds = self.te_preds[a].clone();
                preds.extend(self.te_preds[b].iter().copied());
                (TeNode::EachOf(a, b), preds)
            }
            TripleExpr::OneOf(a, b) => {
                let a = self.compile_te(a);
                let b = self.compile_te(b);
                let mut preds = self.te_preds[a].clone();
                preds.extend(self.te_preds[b].iter().copied());
                (TeNode::OneOf(a, b), preds)
            }
            TripleExpr::Star(x) => {
                let x = self.compile_te(x);
                let preds = self.te_preds[x].clone();
                (TeNode::Star(x), preds)
            }
            TripleExpr::Tc(tc) => {
                let value = self.compile_se(tc.value());
                let qual = self.compile_qs(tc.qualifiers());
                (
                    TeNode::Tc { predicate: tc.predicate(), value, qual },
                    IndexSet::from([tc.predicate()]),
                )
            }
            TripleExpr::Repeat(..) => unreachable!("compiled schemas are desugared"),
        };
        self.tes.push(node);
        self.te_preds.push(preds);
        self.tes.len() - 1
    }

    fn compile_qs(&mut self, qs: &QualifierSpec) -> QsId {
        let body = self.compile_ps(&qs.body);
        self.qss.push(QsNode { closed: qs.openness == Openness::Closed, body });
        self.qss.len() - 1
    }

    fn compile_ps(&mut self, ps: &PropertySpec) -> PsId {
        let (node, preds) = match ps {
            PropertySpec::EmptyQs => (PsNode::Empty, IndexSet::new()),
            PropertySpec::EachOfQs(a, b) => {
                let a = self.compile_ps(a);
                let b = self.compile_ps(b);
                let mut preds = self.ps_preds[a].clone();
                preds.extend(self.ps_preds[b].iter().copied());
                (PsNode::EachOf(a, b), preds)
            }
            PropertySpec::OneOfQs(a, b) => {
                let a = self.compile_ps(a);
                let b = self.compile_ps(b);
                let mut preds = self.ps_preds[a].clone();
                preds.extend(self.ps_preds[b].iter().copied());
                (PsNode::OneOf(a, b), preds)
            }
            PropertySpec::StarQs(x) => {
                let x = self.compile_ps(x);
                let preds = self.ps_preds[x].clone();
                (PsNode::Star(x), preds)
            }
            PropertySpec::PropQs { property, value } => {
                let value = self.compile_se(value);
                (PsNode::Prop { property: *property, value }, IndexSet::from([*property]))
            }
            PropertySpec::RepeatQs(..) => unreachable!("compiled schemas are desugared"),
        };
        self.pss.push(node);
        self.ps_preds.push(preds);
        self.pss.len() - 1
    }

    fn compute_cond_only(&mut self) {
        fn neighborhood_free(c: &Compiled, se: SeId, flags: &[bool]) -> bool {
            match &c.ses[se] {
                SeNode::Cond(_) => true,
                SeNode::And(a, b) => {
                    neighborhood_free(c, *a, flags) && neighborhood_free(c, *b, flags)
                }
                SeNode::Ref(l) => flags[*l],
                SeNode::Shape { .. } => false,
            }
        }
        let mut flags = vec![true; self.labels.len()];
        loop {
            let mut changed = false;
            for (l, &root) in self.roots.iter().enumerate() {
                if flags[l] && !neighborhood_free(self, root, &flags) {
                    flags[l] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.cond_only = flags;
    }
}

/// A schema compiled for validation.
#[derive(Debug)]
pub struct Validator {
    compiled: Compiled,
    options: ValidatorOptions,
}

impl Validator {
    /// Compile a (surface or core) schema. Fails if the schema is not
    /// well-formed or contains an inverted cardinality range.
    pub fn new(schema: &Schema, options: ValidatorOptions) -> Result<Self, CompileError> {
        Ok(Validator { compiled: Compiled::compile(schema)?, options })
    }

    fn label_id(&self, shape: &ShapeLabel) -> Result<LabelId, UnknownShape> {
        self.compiled
            .label_ids
            .get(shape)
            .copied()
            .ok_or_else(|| UnknownShape(shape.clone()))
    }

    /// Validate every target, sharing one fixed point. Each target gets
    /// exactly one entry, in request order; budget exhaustion is reported
    /// per target without aborting the rest.
    pub fn validate(
        &self,
        graph: &WikibaseGraph,
        targets: &[(EntityId, ShapeLabel)],
    ) -> Result<ValidationReport, UnknownShape> {
        Ok(self.validate_with_assignment(graph, targets)?.0)
    }

    /// Like [`validate`](Self::validate), also returning the conforming
    /// (entity, shape) pairs the fixed point settled on.
    pub fn validate_with_assignment(
        &self,
        graph: &WikibaseGraph,
        targets: &[(EntityId, ShapeLabel)],
    ) -> Result<(ValidationReport, ShapeAssignment), UnknownShape> {
        let mut keys = Vec::with_capacity(targets.len());
        for (node, shape) in targets {
            keys.push((Value::EntityRef(*node), self.label_id(shape)?));
        }
        let mut engine = Engine::new(&self.compiled, graph, self.options);
        engine.solve_pairs(keys.clone());

        let mut entries = Vec::with_capacity(targets.len());
        for ((node, shape), key) in targets.iter().zip(&keys) {
            let status = engine.status_of(key);
            let outcome = match status {
                ValidationStatus::Conforming => Outcome::Conforming,
                ValidationStatus::NonConforming => Outcome::NonConforming,
                ValidationStatus::InProgress => Outcome::EngineLimit,
            };
            let trace = if outcome == Outcome::NonConforming {
                engine.trace_pair(&key.0, key.1)
            } else {
                Vec::new()
            };
            entries.push(ReportEntry { node: *node, shape: shape.clone(), outcome, trace });
        }
        Ok((ValidationReport { entries }, engine.assignment()))
    }

    /// Single-target convenience wrapper.
    pub fn conforms(
        &self,
        graph: &WikibaseGraph,
        node: EntityId,
        shape: &ShapeLabel,
    ) -> Result<Outcome, UnknownShape> {
        let report = self.validate(graph, std::slice::from_ref(&(node, shape.clone())))?;
        Ok(report.entries[0].outcome)
    }

    /// Re-check one pair against a frozen assignment: references look the
    /// answer up instead of recursing. The fixed point returned by
    /// [`validate_with_assignment`](Self::validate_with_assignment) is a
    /// model, i.e. every Conforming entry re-checks true here.
    pub fn conforms_under(
        &self,
        graph: &WikibaseGraph,
        node: EntityId,
        shape: &ShapeLabel,
        assignment: &ShapeAssignment,
    ) -> Result<bool, UnknownShape> {
        let label = self.label_id(shape)?;
        let key = (Value::EntityRef(node), label);
        let mut engine = Engine::frozen(&self.compiled, graph, self.options, assignment);
        engine.solve_pairs(vec![key.clone()]);
        Ok(engine.status_of(&key) == ValidationStatus::Conforming)
    }

    /// Match an explicit statement bag against a triple expression
    /// (desugared on the fly; references resolve against this schema).
    pub fn matches_te(
        &self,
        graph: &WikibaseGraph,
        stmts: &[Statement],
        te: &TripleExpr,
    ) -> Result<bool, MatchError> {
        let core = desugar_te(te)?;
        let mut refs = Vec::new();
        collect_refs_te(&core, &mut refs);
        self.check_refs(&refs)?;
        let mut comp = self.compiled.clone();
        let te_id = comp.compile_te(&core);
        let mut engine = Engine::new(&comp, graph, self.options);
        let borrowed: Vec<&Statement> = stmts.iter().collect();
        finish(engine.solve_bag(&borrowed, te_id))
    }

    /// Match an explicit qualifier set against a qualifier specifier.
    pub fn matches_qs(
        &self,
        graph: &WikibaseGraph,
        qualifiers: &[Qualifier],
        qs: &QualifierSpec,
    ) -> Result<bool, MatchError> {
        let core = QualifierSpec { openness: qs.openness, body: desugar_ps(&qs.body)? };
        let mut refs = Vec::new();
        collect_refs_ps(&core.body, &mut refs);
        self.check_refs(&refs)?;
        let mut comp = self.compiled.clone();
        let qs_id = comp.compile_qs(&core);
        let mut engine = Engine::new(&comp, graph, self.options);
        finish(engine.solve_quals(qualifiers, qs_id))
    }

    fn check_refs(&self, refs: &[ShapeLabel]) -> Result<(), UnknownShape> {
        for label in refs {
            if !self.compiled.label_ids.contains_key(label) {
                return Err(UnknownShape(label.clone()));
            }
        }
        Ok(())
    }

    /// Check one entity against a shape using only that entity's own
    /// statements: shape checks on other entities are assumed to hold and
    /// flagged approximate. A NonConforming verdict is therefore final —
    /// the full graph can only remove assumptions, never add statements.
    pub fn validate_local(
        &self,
        graph: &WikibaseGraph,
        focus: EntityId,
        shape: &ShapeLabel,
    ) -> Result<LocalVerdict, UnknownShape> {
        let label = self.label_id(shape)?;
        let mut engine = Engine::local(&self.compiled, graph, self.options, focus);
        engine.solve_pairs(vec![(Value::EntityRef(focus), label)]);
        let outcome = match engine.status_of(&(Value::EntityRef(focus), label)) {
            ValidationStatus::Conforming => Outcome::Conforming,
            ValidationStatus::NonConforming => Outcome::NonConforming,
            ValidationStatus::InProgress => Outcome::EngineLimit,
        };
        Ok(LocalVerdict { outcome, approximate: engine.approximate() })
    }

    /// The labels this validator knows, in declaration order.
    pub fn shape_labels(&self) -> impl Iterator<Item = &ShapeLabel> {
        self.compiled.labels.iter()
    }
}

fn finish(status: ValidationStatus) -> Result<bool, MatchError> {
    match status {
        ValidationStatus::Conforming => Ok(true),
        ValidationStatus::NonConforming => Ok(false),
        ValidationStatus::InProgress => Err(MatchError::Limit(EngineLimit)),
    }
}

fn collect_refs_se(se: &ShapeExpr, out: &mut Vec<ShapeLabel>) {
    match se {
        ShapeExpr::Cond(_) => {}
        ShapeExpr::And(a, b) => {
            collect_refs_se(a, out);
            collect_refs_se(b, out);
        }
        ShapeExpr::Ref(l) => out.push(l.clone()),
        ShapeExpr::Shape { te, .. } => collect_refs_te(te, out),
    }
}

fn collect_refs_te(te: &TripleExpr, out: &mut Vec<ShapeLabel>) {
    match te {
        TripleExpr::Empty => {}
        TripleExpr::EachOf(a, b) | TripleExpr::OneOf(a, b) => {
            collect_refs_te(a, out);
            collect_refs_te(b, out);
        }
        TripleExpr::Star(x) | TripleExpr::Repeat(x, _) => collect_refs_te(x, out),
        TripleExpr::Tc(tc) => {
            collect_refs_se(tc.value(), out);
            collect_refs_ps(&tc.qualifiers().body, out);
        }
    }
}

fn collect_refs_ps(ps: &PropertySpec, out: &mut Vec<ShapeLabel>) {
    match ps {
        PropertySpec::EmptyQs => {}
        PropertySpec::EachOfQs(a, b) | PropertySpec::OneOfQs(a, b) => {
            collect_refs_ps(a, out);
            collect_refs_ps(b, out);
        }
        PropertySpec::StarQs(x) | PropertySpec::RepeatQs(x, _) => collect_refs_ps(x, out),
        PropertySpec::PropQs { value, .. } => collect_refs_se(value, out),
    }
}
