//! The WShEx abstract syntax tree.
//!
//! The core grammar describes a node with shape expressions (conditions,
//! conjunctions, label references, open/closed shapes), a node's statement
//! bag with triple expressions (`EachOf`/`OneOf`/`*`/triple constraints/ε)
//! and a statement's qualifier set with property specifiers of the same
//! build. The compact syntax additionally offers the cardinalities `?`,
//! `+` and `{m,n}`; those live in the [`TripleExpr::Repeat`] /
//! [`PropertySpec::RepeatQs`] wrappers and are removed by
//! [`Schema::desugar`] before validation, so the semantics only ever sees
//! the core grammar.

use std::fmt;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::model::{BuiltinDatatype, EntityId, ModelError, Value};

/// A shape label; unique key within a [`Schema`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShapeLabel(String);

impl ShapeLabel {
    /// Panics on an empty name; labels are non-empty by construction.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "shape labels are non-empty");
        ShapeLabel(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ShapeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A boolean condition on a single node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeConstraint {
    /// The node equals one of the listed values. Non-empty (checked by
    /// well-formedness).
    ValueSet(Vec<Value>),
    /// The node is a data value of the given datatype, or — for the
    /// `Item`/`Property` datatypes — an entity reference of that kind.
    Datatype(BuiltinDatatype),
    /// Wildcard: any node.
    AnyValue,
}

/// A shape expression: what a single node must look like.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeExpr {
    Cond(NodeConstraint),
    And(Box<ShapeExpr>, Box<ShapeExpr>),
    Ref(ShapeLabel),
    Shape {
        closed: bool,
        te: TripleExpr,
    },
}

impl ShapeExpr {
    pub fn and(a: ShapeExpr, b: ShapeExpr) -> Self {
        ShapeExpr::And(Box::new(a), Box::new(b))
    }

    pub fn shape(te: TripleExpr) -> Self {
        ShapeExpr::Shape { closed: false, te }
    }

    pub fn closed_shape(te: TripleExpr) -> Self {
        ShapeExpr::Shape { closed: true, te }
    }

    pub fn reference(name: impl Into<String>) -> Self {
        ShapeExpr::Ref(ShapeLabel::new(name))
    }
}

/// One triple constraint: statements with this predicate, a value
/// conforming to the shape expression, and qualifiers matching the
/// qualifier specifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleConstraint {
    predicate: EntityId,
    value: Box<ShapeExpr>,
    qualifiers: QualifierSpec,
}

impl TripleConstraint {
    pub fn new(predicate: EntityId, value: ShapeExpr, qualifiers: QualifierSpec) -> Result<Self, ModelError> {
        if !predicate.is_property() {
            return Err(ModelError::NotAProperty(predicate));
        }
        Ok(TripleConstraint { predicate, value: Box::new(value), qualifiers })
    }

    pub fn predicate(&self) -> EntityId {
        self.predicate
    }

    pub fn value(&self) -> &ShapeExpr {
        &self.value
    }

    pub fn qualifiers(&self) -> &QualifierSpec {
        &self.qualifiers
    }
}

/// A triple expression: what a node's statement bag must look like.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TripleExpr {
    Empty,
    EachOf(Box<TripleExpr>, Box<TripleExpr>),
    OneOf(Box<TripleExpr>, Box<TripleExpr>),
    Star(Box<TripleExpr>),
    /// Surface-syntax cardinality wrapper; removed by desugaring.
    Repeat(Box<TripleExpr>, Cardinality),
    Tc(TripleConstraint),
}

impl TripleExpr {
    pub fn each_of(a: TripleExpr, b: TripleExpr) -> Self {
        TripleExpr::EachOf(Box::new(a), Box::new(b))
    }

    pub fn one_of(a: TripleExpr, b: TripleExpr) -> Self {
        TripleExpr::OneOf(Box::new(a), Box::new(b))
    }

    pub fn star(x: TripleExpr) -> Self {
        TripleExpr::Star(Box::new(x))
    }

    pub fn repeat(x: TripleExpr, card: Cardinality) -> Self {
        TripleExpr::Repeat(Box::new(x), card)
    }

    pub fn tc(predicate: EntityId, value: ShapeExpr) -> Self {
        Self::tc_with(predicate, value, QualifierSpec::default())
    }

    pub fn tc_with(predicate: EntityId, value: ShapeExpr, qs: QualifierSpec) -> Self {
        TripleExpr::Tc(TripleConstraint::new(predicate, value, qs).expect("predicate kind"))
    }
}

/// Whether a qualifier specifier constrains the whole qualifier set
/// (closed, `[|…|]`) or only the pairs whose property it mentions
/// (open, `{|…|}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Openness {
    Open,
    Closed,
}

/// A qualifier specifier: openness plus a property specifier body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualifierSpec {
    pub openness: Openness,
    pub body: PropertySpec,
}

impl QualifierSpec {
    pub fn open(body: PropertySpec) -> Self {
        QualifierSpec { openness: Openness::Open, body }
    }

    pub fn closed(body: PropertySpec) -> Self {
        QualifierSpec { openness: Openness::Closed, body }
    }
}

impl Default for QualifierSpec {
    /// The specifier of a constraint with no qualifier block: open over
    /// the empty specifier, i.e. qualifiers unconstrained.
    fn default() -> Self {
        QualifierSpec::open(PropertySpec::EmptyQs)
    }
}

/// A property specifier: what a statement's qualifier set must look like.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertySpec {
    EmptyQs,
    EachOfQs(Box<PropertySpec>, Box<PropertySpec>),
    OneOfQs(Box<PropertySpec>, Box<PropertySpec>),
    StarQs(Box<PropertySpec>),
    /// Surface-syntax cardinality wrapper; removed by desugaring.
    RepeatQs(Box<PropertySpec>, Cardinality),
    PropQs {
        property: EntityId,
        value: Box<ShapeExpr>,
    },
}

impl PropertySpec {
    pub fn each_of(a: PropertySpec, b: PropertySpec) -> Self {
        PropertySpec::EachOfQs(Box::new(a), Box::new(b))
    }

    pub fn one_of(a: PropertySpec, b: PropertySpec) -> Self {
        PropertySpec::OneOfQs(Box::new(a), Box::new(b))
    }

    pub fn star(x: PropertySpec) -> Self {
        PropertySpec::StarQs(Box::new(x))
    }

    pub fn repeat(x: PropertySpec, card: Cardinality) -> Self {
        PropertySpec::RepeatQs(Box::new(x), card)
    }

    pub fn prop(property: EntityId, value: ShapeExpr) -> Self {
        assert!(property.is_property(), "qualifier property kind");
        PropertySpec::PropQs { property, value: Box::new(value) }
    }
}

/// Surface-syntax cardinalities. `ExactlyOne` is the default of a bare
/// constraint; the rest desugar into the core grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cardinality {
    ExactlyOne,
    Optional,
    Star,
    Plus,
    Range { min: u32, max: Option<u32> },
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cardinality::ExactlyOne => Ok(()),
            Cardinality::Optional => f.write_str("?"),
            Cardinality::Star => f.write_str("*"),
            Cardinality::Plus => f.write_str("+"),
            Cardinality::Range { min, max: Some(max) } => write!(f, "{{{min},{max}}}"),
            Cardinality::Range { min, max: None } => write!(f, "{{{min},*}}"),
        }
    }
}

/// Desugaring failure: a `{m,n}` range with `m > n`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid cardinality range {{{min},{max}}}: min > max")]
pub struct RangeError {
    pub min: u32,
    pub max: u32,
}

/// A WShEx schema: a total mapping from labels to shape expressions plus
/// the prefix table of the source text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    defs: IndexMap<ShapeLabel, ShapeExpr>,
    prefixes: IndexMap<String, String>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    /// Define (or redefine) a label. Returns the previous definition if
    /// the label was already present, letting callers flag duplicates.
    pub fn define(&mut self, label: ShapeLabel, se: ShapeExpr) -> Option<ShapeExpr> {
        self.defs.insert(label, se)
    }

    pub fn add_prefix(&mut self, prefix: impl Into<String>, iri: impl Into<String>) {
        self.prefixes.insert(prefix.into(), iri.into());
    }

    pub fn get(&self, label: &ShapeLabel) -> Option<&ShapeExpr> {
        self.defs.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &ShapeLabel> {
        self.defs.keys()
    }

    pub fn shapes(&self) -> impl Iterator<Item = (&ShapeLabel, &ShapeExpr)> {
        self.defs.iter()
    }

    pub fn prefixes(&self) -> impl Iterator<Item = (&str, &str)> {
        self.prefixes.iter().map(|(p, iri)| (p.as_str(), iri.as_str()))
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Remove every surface cardinality, yielding a schema in the core
    /// grammar with the identical bag language.
    pub fn desugar(&self) -> Result<Schema, RangeError> {
        let mut out = Schema::new();
        out.prefixes = self.prefixes.clone();
        for (label, se) in &self.defs {
            out.defs.insert(label.clone(), desugar_se(se)?);
        }
        Ok(out)
    }
}

/// Desugar a shape expression (recursing into nested shapes).
pub fn desugar_se(se: &ShapeExpr) -> Result<ShapeExpr, RangeError> {
    Ok(match se {
        ShapeExpr::Cond(c) => ShapeExpr::Cond(c.clone()),
        ShapeExpr::And(a, b) => ShapeExpr::and(desugar_se(a)?, desugar_se(b)?),
        ShapeExpr::Ref(l) => ShapeExpr::Ref(l.clone()),
        ShapeExpr::Shape { closed, te } => ShapeExpr::Shape { closed: *closed, te: desugar_te(te)? },
    })
}

/// Desugar a triple expression into the core grammar:
/// `x?` → `OneOf(x, ε)`, `x+` → `EachOf(x, x*)`, `x{m,n}` → m copies
/// followed by n−m optionals (right-folded under `EachOf`), `x{m,*}` →
/// m copies then `x*`.
pub fn desugar_te(te: &TripleExpr) -> Result<TripleExpr, RangeError> {
    Ok(match te {
        TripleExpr::Empty => TripleExpr::Empty,
        TripleExpr::EachOf(a, b) => TripleExpr::each_of(desugar_te(a)?, desugar_te(b)?),
        TripleExpr::OneOf(a, b) => TripleExpr::one_of(desugar_te(a)?, desugar_te(b)?),
        TripleExpr::Star(x) => TripleExpr::star(desugar_te(x)?),
        TripleExpr::Repeat(x, card) => expand(desugar_te(x)?, *card, TeOps)?,
        TripleExpr::Tc(tc) => TripleExpr::Tc(TripleConstraint {
            predicate: tc.predicate,
            value: Box::new(desugar_se(&tc.value)?),
            qualifiers: QualifierSpec {
                openness: tc.qualifiers.openness,
                body: desugar_ps(&tc.qualifiers.body)?,
            },
        }),
    })
}

/// Desugar a property specifier; the same scheme as [`desugar_te`] over
/// the `*Qs` constructors.
pub fn desugar_ps(ps: &PropertySpec) -> Result<PropertySpec, RangeError> {
    Ok(match ps {
        PropertySpec::EmptyQs => PropertySpec::EmptyQs,
        PropertySpec::EachOfQs(a, b) => PropertySpec::each_of(desugar_ps(a)?, desugar_ps(b)?),
        PropertySpec::OneOfQs(a, b) => PropertySpec::one_of(desugar_ps(a)?, desugar_ps(b)?),
        PropertySpec::StarQs(x) => PropertySpec::star(desugar_ps(x)?),
        PropertySpec::RepeatQs(x, card) => expand(desugar_ps(x)?, *card, PsOps)?,
        PropertySpec::PropQs { property, value } => PropertySpec::PropQs {
            property: *property,
            value: Box::new(desugar_se(value)?),
        },
    })
}

/// The constructors shared by the two expression levels, so cardinality
/// expansion is written once.
trait RbeOps {
    type Expr: Clone;
    fn empty(&self) -> Self::Expr;
    fn each_of(&self, a: Self::Expr, b: Self::Expr) -> Self::Expr;
    fn one_of(&self, a: Self::Expr, b: Self::Expr) -> Self::Expr;
    fn star(&self, x: Self::Expr) -> Self::Expr;
}

struct TeOps;
impl RbeOps for TeOps {
    type Expr = TripleExpr;
    fn empty(&self) -> TripleExpr {
        TripleExpr::Empty
    }
    fn each_of(&self, a: TripleExpr, b: TripleExpr) -> TripleExpr {
        TripleExpr::each_of(a, b)
    }
    fn one_of(&self, a: TripleExpr, b: TripleExpr) -> TripleExpr {
        TripleExpr::one_of(a, b)
    }
    fn star(&self, x: TripleExpr) -> TripleExpr {
        TripleExpr::star(x)
    }
}

struct PsOps;
impl RbeOps for PsOps {
    type Expr = PropertySpec;
    fn empty(&self) -> PropertySpec {
        PropertySpec::EmptyQs
    }
    fn each_of(&self, a: PropertySpec, b: PropertySpec) -> PropertySpec {
        PropertySpec::each_of(a, b)
    }
    fn one_of(&self, a: PropertySpec, b: PropertySpec) -> PropertySpec {
        PropertySpec::one_of(a, b)
    }
    fn star(&self, x: PropertySpec) -> PropertySpec {
        PropertySpec::star(x)
    }
}

fn expand<O: RbeOps>(x: O::Expr, card: Cardinality, ops: O) -> Result<O::Expr, RangeError> {
    let optional = |x: O::Expr| ops.one_of(x, ops.empty());
    let pieces: Vec<O::Expr> = match card {
        Cardinality::ExactlyOne => return Ok(x),
        Cardinality::Optional => return Ok(optional(x)),
        Cardinality::Star => return Ok(ops.star(x)),
        Cardinality::Plus => vec![x.clone(), ops.star(x)],
        Cardinality::Range { min, max: Some(max) } => {
            if min > max {
                return Err(RangeError { min, max });
            }
            let mut ps: Vec<O::Expr> = std::iter::repeat_n(x.clone(), min as usize).collect();
            ps.extend(std::iter::repeat_n(optional(x), (max - min) as usize));
            ps
        }
        Cardinality::Range { min, max: None } => {
            let mut ps: Vec<O::Expr> = std::iter::repeat_n(x.clone(), min as usize).collect();
            ps.push(ops.star(x));
            ps
        }
    };
    // Right fold: [a, b, c] becomes EachOf(a, EachOf(b, c)).
    let mut it = pieces.into_iter().rev();
    let mut acc = match it.next() {
        Some(last) => last,
        None => ops.empty(),
    };
    for piece in it {
        acc = ops.each_of(piece, acc);
    }
    Ok(acc)
}

/// Is this the degenerate `{0,0}` cardinality, equivalent to ε?
fn zero_width(card: &Cardinality) -> bool {
    matches!(card, Cardinality::Range { min: 0, max: Some(0) })
}

/// The predicates of all triple constraints of `te` (the statement-level
/// alphabet used by open-shape filtering). Does not descend into a
/// constraint's value shape or qualifier block: those describe other
/// nodes / the qualifier level, not this node's statements. A zero-width
/// repeat `x{0,0}` is ε and contributes nothing, keeping preds stable
/// under desugaring.
pub fn preds_te(te: &TripleExpr) -> IndexSet<EntityId> {
    fn walk(te: &TripleExpr, out: &mut IndexSet<EntityId>) {
        match te {
            TripleExpr::Empty => {}
            TripleExpr::EachOf(a, b) | TripleExpr::OneOf(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            TripleExpr::Star(x) => walk(x, out),
            TripleExpr::Repeat(x, card) => {
                if !zero_width(card) {
                    walk(x, out);
                }
            }
            TripleExpr::Tc(tc) => {
                out.insert(tc.predicate);
            }
        }
    }
    let mut out = IndexSet::new();
    walk(te, &mut out);
    out
}

/// The properties of all `PropQs` of `ps` (the qualifier-level alphabet
/// used by open-specifier filtering).
pub fn preds_ps(ps: &PropertySpec) -> IndexSet<EntityId> {
    fn walk(ps: &PropertySpec, out: &mut IndexSet<EntityId>) {
        match ps {
            PropertySpec::EmptyQs => {}
            PropertySpec::EachOfQs(a, b) | PropertySpec::OneOfQs(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            PropertySpec::StarQs(x) => walk(x, out),
            PropertySpec::RepeatQs(x, card) => {
                if !zero_width(card) {
                    walk(x, out);
                }
            }
            PropertySpec::PropQs { property, .. } => {
                out.insert(*property);
            }
        }
    }
    let mut out = IndexSet::new();
    walk(ps, &mut out);
    out
}

/// What a well-formedness diagnostic is complaining about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WellFormednessIssue {
    UnresolvedRef(ShapeLabel),
    EmptyValueSet,
    InvalidRange { min: u32, max: u32 },
}

impl fmt::Display for WellFormednessIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WellFormednessIssue::UnresolvedRef(l) => write!(f, "reference to undefined shape <{l}>"),
            WellFormednessIssue::EmptyValueSet => f.write_str("empty value set"),
            WellFormednessIssue::InvalidRange { min, max } => {
                write!(f, "invalid cardinality range {{{min},{max}}}: min > max")
            }
        }
    }
}

/// One well-formedness finding: the shape it was found in, a `/`-joined
/// path to the offending node, and the issue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub label: ShapeLabel,
    pub path: String,
    pub issue: WellFormednessIssue,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}> {}: {}", self.label, self.path, self.issue)
    }
}

/// Check a schema: every `Ref` resolves, every value set is non-empty,
/// every range cardinality has min ≤ max. Returns the empty list iff the
/// schema is well-formed. (Definition totality holds by construction:
/// [`Schema`] stores labels and definitions as one map.)
pub fn well_formed(schema: &Schema) -> Vec<Diagnostic> {
    struct Ctx<'s> {
        schema: &'s Schema,
        label: ShapeLabel,
        out: Vec<Diagnostic>,
    }

    impl Ctx<'_> {
        fn push(&mut self, path: &[String], issue: WellFormednessIssue) {
            self.out.push(Diagnostic { label: self.label.clone(), path: path.join("/"), issue });
        }

        fn se(&mut self, se: &ShapeExpr, path: &mut Vec<String>) {
            match se {
                ShapeExpr::Cond(NodeConstraint::ValueSet(vs)) => {
                    if vs.is_empty() {
                        path.push("ValueSet".into());
                        self.push(path, WellFormednessIssue::EmptyValueSet);
                        path.pop();
                    }
                }
                ShapeExpr::Cond(_) => {}
                ShapeExpr::And(a, b) => {
                    path.push("AND.0".into());
                    self.se(a, path);
                    path.pop();
                    path.push("AND.1".into());
                    self.se(b, path);
                    path.pop();
                }
                ShapeExpr::Ref(l) => {
                    if self.schema.get(l).is_none() {
                        path.push(format!("@{l}"));
                        self.push(path, WellFormednessIssue::UnresolvedRef(l.clone()));
                        path.pop();
                    }
                }
                ShapeExpr::Shape { te, .. } => {
                    path.push("shape".into());
                    self.te(te, path);
                    path.pop();
                }
            }
        }

        fn card(&mut self, card: &Cardinality, path: &[String]) {
            if let Cardinality::Range { min, max: Some(max) } = card {
                if min > max {
                    self.push(path, WellFormednessIssue::InvalidRange { min: *min, max: *max });
                }
            }
        }

        fn te(&mut self, te: &TripleExpr, path: &mut Vec<String>) {
            match te {
                TripleExpr::Empty => {}
                TripleExpr::EachOf(a, b) | TripleExpr::OneOf(a, b) => {
                    let name = if matches!(te, TripleExpr::EachOf(..)) { "EachOf" } else { "OneOf" };
                    path.push(format!("{name}.0"));
                    self.te(a, path);
                    path.pop();
                    path.push(format!("{name}.1"));
                    self.te(b, path);
                    path.pop();
                }
                TripleExpr::Star(x) => {
                    path.push("Star".into());
                    self.te(x, path);
                    path.pop();
                }
                TripleExpr::Repeat(x, card) => {
                    path.push("Repeat".into());
                    self.card(card, path);
                    self.te(x, path);
                    path.pop();
                }
                TripleExpr::Tc(tc) => {
                    path.push(format!("TC(:{})", tc.predicate()));
                    self.se(tc.value(), path);
                    self.ps(&tc.qualifiers().body, path);
                    path.pop();
                }
            }
        }

        fn ps(&mut self, ps: &PropertySpec, path: &mut Vec<String>) {
            match ps {
                PropertySpec::EmptyQs => {}
                PropertySpec::EachOfQs(a, b) | PropertySpec::OneOfQs(a, b) => {
                    let name = if matches!(ps, PropertySpec::EachOfQs(..)) { "EachOfQs" } else { "OneOfQs" };
                    path.push(format!("{name}.0"));
                    self.ps(a, path);
                    path.pop();
                    path.push(format!("{name}.1"));
                    self.ps(b, path);
                    path.pop();
                }
                PropertySpec::StarQs(x) => {
                    path.push("StarQs".into());
                    self.ps(x, path);
                    path.pop();
                }
                PropertySpec::RepeatQs(x, card) => {
                    path.push("RepeatQs".into());
                    self.card(card, path);
                    self.ps(x, path);
                    path.pop();
                }
                PropertySpec::PropQs { property, value } => {
                    path.push(format!("PropQs(:{property})"));
                    self.se(value, path);
                    path.pop();
                }
            }
        }
    }

    let mut out = Vec::new();
    for (label, se) in schema.shapes() {
        let mut ctx = Ctx { schema, label: label.clone(), out: Vec::new() };
        let mut path = Vec::new();
        ctx.se(se, &mut path);
        out.extend(ctx.out);
    }
    out
}
