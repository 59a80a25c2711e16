//! Conversion of ShEx entity schemas into WShEx.
//!
//! Wikidata's entity schemas describe the RDF serialization of entities,
//! where one qualified statement is spread over the reification pattern:
//! a truthy `wdt:P` arc carries the preferred value, and a `p:P` arc
//! leads to a statement node holding the full value (`ps:P`) and its
//! qualifiers (`pq:Q`). WShEx talks about statements directly, so the
//! converter folds the pattern back together per shape and property:
//!
//! - `wdt:P v card` alone maps to the triple constraint `:P v′ card`;
//! - `p:P { ps:P v; pq:Q₁ v₁ c₁; … } card` alone maps to
//!   `:P v′ {| :Q₁ v₁′ c₁, … |} card`;
//! - both together merge into one constraint: value from `ps:`,
//!   qualifier block from `pq:`, cardinality from the `p:` block (which
//!   ranges over all statements, while `wdt:` sees only truthy ones).
//!
//! Qualifier blocks come out open (`{| … |}`): the RDF pattern never
//! forbids extra qualifiers. Value expressions translate by namespace —
//! `wd:Q5` becomes `:Q5`, `xsd:dateTime` becomes `Time`, shape
//! references pass through — with namespaces recognized by their
//! declared IRI first and conventional prefix name second.
//!
//! The converter never silently changes or drops anything. Resolutions a
//! reviewer may want to look at — conflicting value or cardinality
//! declarations between the `wdt:` and `p:` sides, and preserved
//! non-default cardinalities on reference-valued constraints (the spot
//! where hand-maintained WShEx ports most often tighten the source) —
//! become notes. Constructs with no WShEx counterpart (`EXTRA`,
//! `CLOSED`, semantic actions, `prov:` reference blocks, `wikibase:`
//! rank vocabulary, predicates outside the pattern, foreign datatypes)
//! become rejections carrying the source position and text. Every input
//! constraint ends up either mapped or rejected, never forgotten.

use std::fmt;

use indexmap::IndexMap;

use crate::ast::{
    Cardinality, NodeConstraint, PropertySpec, QualifierSpec, Schema, ShapeExpr, ShapeLabel,
    TripleExpr,
};
use crate::model::{BuiltinDatatype, DataValue, EntityId, Value};
use crate::parser::{
    fold_right, lex, valid_name, ParseDiagnostic, SourcePosition, Token, TokenKind,
};

const NS_DIRECT: &str = "http://www.wikidata.org/prop/direct/";
const NS_STATEMENT_NODE: &str = "http://www.wikidata.org/prop/";
const NS_STATEMENT_VALUE: &str = "http://www.wikidata.org/prop/statement/";
const NS_QUALIFIER: &str = "http://www.wikidata.org/prop/qualifier/";
const NS_ENTITY: &str = "http://www.wikidata.org/entity/";
const NS_XSD: &str = "http://www.w3.org/2001/XMLSchema#";
const NS_PROV: &str = "http://www.w3.org/ns/prov#";
const NS_WIKIBASE: &str = "http://wikiba.se/ontology#";

/// What part of the reification pattern a prefix stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    /// `wdt:` — truthy direct arcs.
    Direct,
    /// `p:` — arcs to reified statement nodes.
    StatementNode,
    /// `ps:` — statement node to statement value.
    StatementValue,
    /// `pq:` — statement node to qualifier values.
    Qualifier,
    /// `wd:` — the entity namespace.
    Entity,
    /// `xsd:` — XML Schema datatypes.
    XsdDatatype,
    /// `prov:` — reference provenance.
    Provenance,
    /// `wikibase:` — ontology vocabulary (ranks, badges, …).
    Ontology,
    Other,
}

/// Classify a prefix by its declared IRI, falling back to the
/// conventional name for abbreviated or out-of-tree declarations.
fn classify(prefix: &str, iri: &str) -> Role {
    match iri {
        _ if iri == NS_DIRECT => Role::Direct,
        _ if iri == NS_STATEMENT_NODE => Role::StatementNode,
        _ if iri == NS_STATEMENT_VALUE => Role::StatementValue,
        _ if iri == NS_QUALIFIER => Role::Qualifier,
        _ if iri == NS_ENTITY => Role::Entity,
        _ if iri == NS_XSD => Role::XsdDatatype,
        _ if iri == NS_PROV => Role::Provenance,
        _ if iri == NS_WIKIBASE => Role::Ontology,
        _ => match prefix {
            "wdt" => Role::Direct,
            "p" => Role::StatementNode,
            "ps" => Role::StatementValue,
            "pq" => Role::Qualifier,
            "wd" => Role::Entity,
            "xsd" => Role::XsdDatatype,
            "prov" => Role::Provenance,
            "wikibase" => Role::Ontology,
            _ => Role::Other,
        },
    }
}

/// A ShEx entity schema restricted to the Wikibase reification subset,
/// as produced by [`parse_shexc_subset`]. Constructs the subset
/// recognizes but cannot represent are preserved in [`rejected`]
/// (see [`Self::rejected`]) rather than dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShExSubsetSchema {
    prefixes: IndexMap<String, String>,
    shapes: Vec<ShExShape>,
    rejected: Vec<RejectedConstraint>,
}

impl ShExSubsetSchema {
    pub fn prefixes(&self) -> impl Iterator<Item = (&str, &str)> {
        self.prefixes.iter().map(|(p, iri)| (p.as_str(), iri.as_str()))
    }

    pub fn shapes(&self) -> &[ShExShape] {
        &self.shapes
    }

    /// Constructs recognized and skipped at parse time (`EXTRA`,
    /// `CLOSED`, semantic actions, `prov:` blocks, …).
    pub fn rejected(&self) -> &[RejectedConstraint] {
        &self.rejected
    }

    /// Total top-level triple constraints in the source: those in the
    /// subset AST plus those already rejected at parse time. This is the
    /// accounting base of conversion totality — every one of them shows
    /// up as mapped or rejected in the [`ConversionReport`].
    pub fn constraint_count(&self) -> usize {
        let parsed: usize = self.shapes.iter().map(|s| s.constraints.len()).sum();
        let skipped =
            self.rejected.iter().filter(|r| r.reason.is_constraint_level()).count();
        parsed + skipped
    }

    /// The IRI the converted schema's default prefix binds to: the
    /// declared entity namespace when present, the Wikidata one otherwise.
    pub fn entity_namespace(&self) -> &str {
        self.prefixes
            .iter()
            .find(|(p, iri)| classify(p, iri) == Role::Entity)
            .map_or(NS_ENTITY, |(_, iri)| iri.as_str())
    }
}

/// One shape declaration of the subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShExShape {
    pub label: ShapeLabel,
    pub constraints: Vec<ShExConstraint>,
}

/// One top-level triple constraint, classified by its reification role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShExConstraint {
    /// `wdt:P value card` — constrains truthy statement values.
    Direct(DirectConstraint),
    /// `p:P { ps:P v; pq:Q v c; … } card` — constrains statement nodes.
    Statement(StatementConstraint),
}

impl ShExConstraint {
    /// The Wikibase property this constraint talks about.
    pub fn property(&self) -> EntityId {
        match self {
            ShExConstraint::Direct(d) => d.property,
            ShExConstraint::Statement(s) => s.property,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectConstraint {
    pub property: EntityId,
    pub value: ShExValueExpr,
    pub card: Cardinality,
    pub pos: SourcePosition,
    /// Whitespace-normalized source text, for reports.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatementConstraint {
    pub property: EntityId,
    /// Value of the `ps:` entry; `Any` when the block has none.
    pub value: ShExValueExpr,
    pub qualifiers: Vec<ShExQualifier>,
    /// The cardinality written after the block.
    pub card: Cardinality,
    pub pos: SourcePosition,
    /// Whitespace-normalized source text, for reports.
    pub text: String,
}

/// One `pq:` entry of a statement block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShExQualifier {
    pub property: EntityId,
    pub value: ShExValueExpr,
    pub card: Cardinality,
}

/// A value expression of the subset, kept as written; prefixed names are
/// resolved by [`convert`], not the reader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShExValueExpr {
    /// `@<Label>`
    Ref(ShapeLabel),
    /// A datatype IRI such as `xsd:dateTime`.
    Datatype { prefix: String, local: String },
    /// `[ … ]`
    ValueSet(Vec<ShExTerm>),
    /// `.` or the empty nested shape `{}`.
    Any,
}

/// One member of a value set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShExTerm {
    /// `wd:Q5`
    Entity { prefix: String, local: String },
    Str(String),
    Int(u64),
}

/// Why a recognized construct could not be converted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// `prov:` reference blocks.
    ReferencesUnsupported,
    /// `wikibase:` rank vocabulary.
    RanksUnsupported,
    /// The `EXTRA` shape modifier.
    ExtraUnsupported,
    /// The `CLOSED` shape modifier.
    ClosedUnsupported,
    /// `%…{ … %}` semantic actions.
    SemanticActionsUnsupported,
    /// Predicate outside the `wdt:`/`p:` reification pattern.
    PredicateOutsidePattern,
    /// Datatype IRI with no Wikibase builtin counterpart.
    UnsupportedDatatype,
    /// Value-set term outside the entity namespace.
    ValueOutsideEntityNamespace,
    /// `p:` block that does not fit the `ps:` + `pq:` statement pattern.
    MalformedStatementBlock,
    /// Second `wdt:` (or `p:`) constraint on an already-constrained
    /// property; the first one wins.
    DuplicateConstraint,
}

impl RejectReason {
    /// Whether entries with this reason stand for one top-level input
    /// constraint (the accounting unit), as opposed to a shape modifier
    /// or decoration.
    pub fn is_constraint_level(self) -> bool {
        !matches!(
            self,
            RejectReason::ExtraUnsupported
                | RejectReason::ClosedUnsupported
                | RejectReason::SemanticActionsUnsupported
        )
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::ReferencesUnsupported => "ReferencesUnsupported",
            RejectReason::RanksUnsupported => "RanksUnsupported",
            RejectReason::ExtraUnsupported => "ExtraUnsupported",
            RejectReason::ClosedUnsupported => "ClosedUnsupported",
            RejectReason::SemanticActionsUnsupported => "SemanticActionsUnsupported",
            RejectReason::PredicateOutsidePattern => "PredicateOutsidePattern",
            RejectReason::UnsupportedDatatype => "UnsupportedDatatype",
            RejectReason::ValueOutsideEntityNamespace => "ValueOutsideEntityNamespace",
            RejectReason::MalformedStatementBlock => "MalformedStatementBlock",
            RejectReason::DuplicateConstraint => "DuplicateConstraint",
        })
    }
}

/// One construct that did not make it into the converted schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedConstraint {
    /// The shape it appeared in.
    pub shape: ShapeLabel,
    /// Whitespace-normalized source text of the construct.
    pub constraint: String,
    pub reason: RejectReason,
    pub position: SourcePosition,
}

impl fmt::Display for RejectedConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: <{}>: `{}` ({})", self.position, self.shape, self.constraint, self.reason)
    }
}

/// A resolution worth a reviewer's look: the conversion went through, but
/// not verbatim, or verbatim where hand-written ports usually diverge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionNote {
    pub shape: ShapeLabel,
    pub message: String,
}

impl fmt::Display for ConversionNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>: {}", self.shape, self.message)
    }
}

/// Everything [`convert`] has to say: the schema, the review notes, and
/// the constructs left behind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionReport {
    pub converted: Schema,
    pub notes: Vec<ConversionNote>,
    /// All rejections, parse-time and conversion-time, in source order.
    pub rejected: Vec<RejectedConstraint>,
    /// Input constraints represented in `converted`; a merged constraint
    /// counts both of its sources.
    pub mapped: usize,
}

impl ConversionReport {
    /// Rejections that stand for a top-level input constraint. Together
    /// with `mapped` these account for every constraint of the source:
    /// `shex.constraint_count() == mapped + rejected_constraints()`.
    pub fn rejected_constraints(&self) -> usize {
        self.rejected.iter().filter(|r| r.reason.is_constraint_level()).count()
    }
}

/// Read a ShEx schema restricted to the Wikibase reification subset:
/// `PREFIX` declarations, then shape declarations `<Name> { tc (";"
/// tc)* }` whose constraints take a shape reference, a datatype name, a
/// value set `[ … ]`, a wildcard `.`/`{}`, or — behind `p:` predicates
/// only — a nested statement block of `ps:`/`pq:` constraints, each with
/// an optional trailing cardinality.
///
/// Shape modifiers (`EXTRA`, `CLOSED`), semantic actions and constraints
/// on predicates outside the pattern parse but land in
/// [`ShExSubsetSchema::rejected`] with their source position; prefixes
/// must be declared before use; anything else is a hard error reported
/// as the full diagnostic list.
pub fn parse_shexc_subset(text: &str) -> Result<ShExSubsetSchema, Vec<ParseDiagnostic>> {
    let (tokens, lex_diags) = lex(text);
    let mut r = SubsetReader {
        end: SourcePosition {
            line: text.lines().count().max(1),
            column: text.lines().last().map_or(1, |l| l.chars().count() + 1),
            byte_offset: text.len(),
        },
        text,
        tokens,
        i: 0,
        diags: lex_diags,
        out: ShExSubsetSchema {
            prefixes: IndexMap::new(),
            shapes: Vec::new(),
            rejected: Vec::new(),
        },
        decl_pos: IndexMap::new(),
    };

    r.parse_prefixes();
    let mut saw_decl = false;
    while !r.at_end() {
        if matches!(r.peek(), Some(TokenKind::Iri(_))) {
            saw_decl = true;
            r.parse_shape_decl();
        } else {
            r.error_here_expecting("expected shape declaration", &["<Label>"]);
            r.recover_to_decl();
        }
    }
    if !saw_decl {
        r.diags.push(
            ParseDiagnostic::new(r.end, "expected shape declaration").expecting(&["<Label>"]),
        );
    }
    if r.diags.is_empty() {
        r.check_references();
    }

    if r.diags.is_empty() {
        Ok(r.out)
    } else {
        Err(r.diags)
    }
}

struct SubsetReader<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    i: usize,
    diags: Vec<ParseDiagnostic>,
    out: ShExSubsetSchema,
    decl_pos: IndexMap<ShapeLabel, SourcePosition>,
    end: SourcePosition,
}

impl SubsetReader<'_> {
    fn at_end(&self) -> bool {
        self.i >= self.tokens.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.i).map(|t| &t.kind)
    }

    fn peek2(&self) -> Option<&TokenKind> {
        self.tokens.get(self.i + 1).map(|t| &t.kind)
    }

    fn pos(&self) -> SourcePosition {
        self.tokens.get(self.i).map_or(self.end, |t| t.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.i).cloned();
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(TokenKind::Ident(s)) if s == kw) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&mut self, message: impl Into<String>) {
        self.error_here_expecting(message, &[]);
    }

    fn error_here_expecting(&mut self, message: impl Into<String>, expected: &[&str]) {
        let found = match self.peek() {
            Some(kind) => format!("{}, found {kind}", message.into()),
            None => format!("{}, found end of input", message.into()),
        };
        self.diags.push(ParseDiagnostic::new(self.pos(), found).expecting(expected));
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> bool {
        if self.eat(&kind) {
            true
        } else {
            self.error_here(format!("expected {what}"));
            false
        }
    }

    /// Advance until one of the sync kinds (not consumed) or end of input.
    fn recover_to(&mut self, sync: &[TokenKind]) {
        while let Some(kind) = self.peek() {
            if sync.contains(kind) {
                return;
            }
            self.i += 1;
        }
    }

    /// Decl-level recovery: skip to the next `<Label>` opener.
    fn recover_to_decl(&mut self) {
        while let Some(kind) = self.peek() {
            if matches!(kind, TokenKind::Iri(_)) {
                return;
            }
            self.i += 1;
        }
    }

    /// The source from `start_byte` to the current token, collapsed to
    /// single spaces — the constraint renderings used in reports.
    fn snippet(&self, start_byte: usize) -> String {
        let end = self.pos().byte_offset.max(start_byte);
        self.text[start_byte..end].split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn reject(
        &mut self,
        shape: ShapeLabel,
        constraint: String,
        reason: RejectReason,
        position: SourcePosition,
    ) {
        self.out.rejected.push(RejectedConstraint { shape, constraint, reason, position });
    }

    /// The role of a prefix, or `None` (with a diagnostic) when it was
    /// never declared.
    fn role_of(&mut self, prefix: &str, pos: SourcePosition) -> Option<Role> {
        match self.out.prefixes.get(prefix) {
            Some(iri) => Some(classify(prefix, iri)),
            None => {
                self.diags
                    .push(ParseDiagnostic::new(pos, format!("undeclared prefix `{prefix}:`")));
                None
            }
        }
    }

    fn parse_prefixes(&mut self) {
        while self.eat_keyword("PREFIX") {
            let prefix = match self.bump() {
                Some(Token { kind: TokenKind::Pname { prefix, local: None }, .. }) => prefix,
                Some(Token { kind: TokenKind::Pname { prefix, local: Some(_) }, pos }) => {
                    self.diags.push(ParseDiagnostic::new(
                        pos,
                        "prefix declaration takes a bare `name:`",
                    ));
                    prefix
                }
                other => {
                    let pos = other.map_or(self.end, |t| t.pos);
                    self.diags.push(
                        ParseDiagnostic::new(pos, "expected prefix name").expecting(&["name:"]),
                    );
                    continue;
                }
            };
            match self.bump() {
                Some(Token { kind: TokenKind::Iri(iri), .. }) => {
                    self.out.prefixes.insert(prefix, iri);
                }
                other => {
                    let pos = other.map_or(self.end, |t| t.pos);
                    self.diags
                        .push(ParseDiagnostic::new(pos, "expected IRI").expecting(&["<iri>"]));
                }
            }
        }
    }

    fn parse_shape_decl(&mut self) {
        let Some(Token { kind: TokenKind::Iri(name), pos }) = self.bump() else {
            unreachable!("caller checked for an IRI token");
        };
        if !valid_name(&name) {
            self.diags.push(ParseDiagnostic::new(
                pos,
                format!("invalid shape label `<{name}>`: expected a plain name"),
            ));
            self.recover_to_decl();
            return;
        }
        let label = ShapeLabel::new(&name);
        let duplicate = self.decl_pos.contains_key(&label);
        if duplicate {
            self.diags
                .push(ParseDiagnostic::new(pos, format!("shape <{label}> already defined")));
        } else {
            self.decl_pos.insert(label.clone(), pos);
        }

        let mut shape = ShExShape { label, constraints: Vec::new() };
        self.parse_modifiers(&shape.label.clone());
        if !self.expect(TokenKind::LBrace, "`{`") {
            self.recover_to_decl();
            return;
        }
        if !self.eat(&TokenKind::RBrace) {
            loop {
                self.parse_constraint(&mut shape);
                if self.eat(&TokenKind::Semi) {
                    if matches!(self.peek(), Some(TokenKind::RBrace)) {
                        break; // trailing `;`
                    }
                    continue;
                }
                break;
            }
            self.expect(TokenKind::RBrace, "`}`");
        }
        if !duplicate {
            self.out.shapes.push(shape);
        }
    }

    /// `EXTRA pred…` and `CLOSED` before the shape body: both parse, both
    /// are rejections (WShEx triple expressions have no EXTRA, and ShEx
    /// CLOSED closes the RDF neighborhood, not the statement bag).
    fn parse_modifiers(&mut self, shape: &ShapeLabel) {
        loop {
            match self.peek() {
                Some(TokenKind::Ident(k)) if k == "CLOSED" => {
                    let pos = self.pos();
                    self.bump();
                    self.reject(
                        shape.clone(),
                        "CLOSED".to_string(),
                        RejectReason::ClosedUnsupported,
                        pos,
                    );
                }
                Some(TokenKind::Ident(k)) if k == "EXTRA" => {
                    let pos = self.pos();
                    let start = pos.byte_offset;
                    self.bump();
                    let mut any = false;
                    while matches!(self.peek(), Some(TokenKind::Pname { .. } | TokenKind::Iri(_)))
                    {
                        self.bump();
                        any = true;
                    }
                    if !any {
                        self.error_here("expected predicate list after `EXTRA`");
                    }
                    let text = self.snippet(start);
                    self.reject(shape.clone(), text, RejectReason::ExtraUnsupported, pos);
                }
                _ => return,
            }
        }
    }

    fn parse_constraint(&mut self, shape: &mut ShExShape) {
        self.skip_semacts(&shape.label.clone());
        if self.at_end() || matches!(self.peek(), Some(TokenKind::Semi | TokenKind::RBrace)) {
            return; // the slot held only semantic actions
        }
        let pos = self.pos();
        let start = pos.byte_offset;
        let Some(TokenKind::Pname { prefix, local }) = self.peek().cloned() else {
            self.error_here_expecting("expected triple constraint", &["wdt:P<n>", "p:P<n>"]);
            self.recover_to(&[TokenKind::Semi, TokenKind::RBrace]);
            return;
        };
        self.bump();
        let Some(role) = self.role_of(&prefix, pos) else {
            self.skip_value_expr();
            self.parse_cardinality();
            return;
        };
        match role {
            Role::Direct => {
                if let Some((property, value, card)) =
                    self.parse_direct_tail(&prefix, local.as_deref(), pos)
                {
                    let text = self.snippet(start);
                    shape.constraints.push(ShExConstraint::Direct(DirectConstraint {
                        property,
                        value,
                        card,
                        pos,
                        text,
                    }));
                }
            }
            Role::StatementNode => {
                self.parse_statement_block(shape, &prefix, local.as_deref(), pos, start);
            }
            other => {
                self.skip_value_expr();
                self.parse_cardinality();
                let reason = match other {
                    Role::Provenance => RejectReason::ReferencesUnsupported,
                    Role::Ontology => RejectReason::RanksUnsupported,
                    _ => RejectReason::PredicateOutsidePattern,
                };
                let text = self.snippet(start);
                self.reject(shape.label.clone(), text, reason, pos);
            }
        }
        self.skip_semacts(&shape.label.clone());
    }

    fn parse_direct_tail(
        &mut self,
        prefix: &str,
        local: Option<&str>,
        pos: SourcePosition,
    ) -> Option<(EntityId, ShExValueExpr, Cardinality)> {
        let property = self.property_local(prefix, local, pos);
        let value = self.parse_value_atom();
        let card = self.parse_cardinality().unwrap_or(Cardinality::ExactlyOne);
        match (property, value) {
            (Some(p), Some(v)) => Some((p, v, card)),
            _ => {
                self.recover_to(&[TokenKind::Semi, TokenKind::RBrace]);
                None
            }
        }
    }

    /// `p:P { ps:P v; pq:Q v c; … } card`. Blocks that stray from the
    /// statement pattern — a foreign inner predicate, a second or
    /// mismatched `ps:`, a cardinality on the (single) statement value —
    /// are consumed whole and recorded as one rejection.
    fn parse_statement_block(
        &mut self,
        shape: &mut ShExShape,
        prefix: &str,
        local: Option<&str>,
        pos: SourcePosition,
        start: usize,
    ) {
        let property = self.property_local(prefix, local, pos);
        if !matches!(self.peek(), Some(TokenKind::LBrace)) {
            self.skip_value_expr();
            self.parse_cardinality();
            if property.is_some() {
                let text = self.snippet(start);
                self.reject(
                    shape.label.clone(),
                    text,
                    RejectReason::MalformedStatementBlock,
                    pos,
                );
            }
            return;
        }
        self.bump(); // `{`

        let mut value: Option<ShExValueExpr> = None;
        let mut qualifiers: Vec<ShExQualifier> = Vec::new();
        let mut poison: Option<RejectReason> = None;

        if !self.eat(&TokenKind::RBrace) {
            loop {
                let entry_pos = self.pos();
                let Some(TokenKind::Pname { prefix: ep, local: el }) = self.peek().cloned()
                else {
                    self.error_here_expecting(
                        "expected `ps:` or `pq:` constraint",
                        &["ps:P<n>", "pq:P<n>"],
                    );
                    self.skip_block_rest();
                    poison = poison.or(Some(RejectReason::MalformedStatementBlock));
                    break;
                };
                self.bump();
                match self.role_of(&ep, entry_pos) {
                    None => {
                        self.skip_block_rest();
                        poison = poison.or(Some(RejectReason::MalformedStatementBlock));
                        break;
                    }
                    Some(Role::StatementValue) => {
                        let p = self.property_local(&ep, el.as_deref(), entry_pos);
                        let v = self.parse_value_atom();
                        let card = self.parse_cardinality();
                        if let (Some(p), Some(v)) = (p, v) {
                            if Some(p) != property || value.is_some() {
                                poison = Some(RejectReason::MalformedStatementBlock);
                            } else if card.is_some_and(|c| c != Cardinality::ExactlyOne) {
                                // a statement has exactly one value
                                poison = Some(RejectReason::MalformedStatementBlock);
                            } else {
                                value = Some(v);
                            }
                        }
                    }
                    Some(Role::Qualifier) => {
                        let p = self.property_local(&ep, el.as_deref(), entry_pos);
                        let v = self.parse_value_atom();
                        let card = self.parse_cardinality().unwrap_or(Cardinality::ExactlyOne);
                        if let (Some(p), Some(v)) = (p, v) {
                            qualifiers.push(ShExQualifier { property: p, value: v, card });
                        }
                    }
                    Some(other) => {
                        self.skip_value_expr();
                        self.parse_cardinality();
                        poison = poison.or(Some(match other {
                            Role::Provenance => RejectReason::ReferencesUnsupported,
                            Role::Ontology => RejectReason::RanksUnsupported,
                            _ => RejectReason::MalformedStatementBlock,
                        }));
                    }
                }
                if poison.is_some() {
                    self.skip_block_rest();
                    break;
                }
                if self.eat(&TokenKind::Semi) {
                    if self.eat(&TokenKind::RBrace) {
                        break; // trailing `;`
                    }
                    continue;
                }
                if self.eat(&TokenKind::RBrace) {
                    break;
                }
                self.error_here_expecting("expected `;` or `}` in statement block", &[";", "}"]);
                self.skip_block_rest();
                break;
            }
        }

        let card = self.parse_cardinality().unwrap_or(Cardinality::ExactlyOne);
        let Some(property) = property else { return };
        let text = self.snippet(start);
        if let Some(reason) = poison {
            self.reject(shape.label.clone(), text, reason, pos);
            return;
        }
        shape.constraints.push(ShExConstraint::Statement(StatementConstraint {
            property,
            value: value.unwrap_or(ShExValueExpr::Any),
            qualifiers,
            card,
            pos,
            text,
        }));
    }

    fn property_local(
        &mut self,
        prefix: &str,
        local: Option<&str>,
        pos: SourcePosition,
    ) -> Option<EntityId> {
        let Some(local) = local else {
            self.diags.push(ParseDiagnostic::new(
                pos,
                format!("expected local name after `{prefix}:`"),
            ));
            return None;
        };
        match local.parse::<EntityId>() {
            Ok(id) if id.is_property() => Some(id),
            Ok(id) => {
                self.diags.push(ParseDiagnostic::new(
                    pos,
                    format!("`{id}` cannot be a predicate: expected a property (P<n>)"),
                ));
                None
            }
            Err(_) => {
                self.diags.push(ParseDiagnostic::new(
                    pos,
                    format!("`{local}` is not a property id (expected P<n>)"),
                ));
                None
            }
        }
    }

    fn parse_value_atom(&mut self) -> Option<ShExValueExpr> {
        match self.peek() {
            Some(TokenKind::At) => {
                self.bump();
                match self.bump() {
                    Some(Token { kind: TokenKind::Iri(name), pos }) => {
                        if valid_name(&name) {
                            Some(ShExValueExpr::Ref(ShapeLabel::new(name)))
                        } else {
                            self.diags.push(ParseDiagnostic::new(
                                pos,
                                format!("invalid shape label `<{name}>`"),
                            ));
                            None
                        }
                    }
                    other => {
                        let pos = other.map_or(self.end, |t| t.pos);
                        self.diags.push(
                            ParseDiagnostic::new(pos, "expected shape label after `@`")
                                .expecting(&["<Label>"]),
                        );
                        None
                    }
                }
            }
            Some(TokenKind::Pname { .. }) => {
                let pos = self.pos();
                let Some(Token { kind: TokenKind::Pname { prefix, local }, .. }) = self.bump()
                else {
                    unreachable!("peeked a pname");
                };
                if self.out.prefixes.get(&prefix).is_none() {
                    self.diags
                        .push(ParseDiagnostic::new(pos, format!("undeclared prefix `{prefix}:`")));
                    return None;
                }
                let Some(local) = local else {
                    self.diags.push(ParseDiagnostic::new(
                        pos,
                        format!("expected local name after `{prefix}:`"),
                    ));
                    return None;
                };
                Some(ShExValueExpr::Datatype { prefix, local })
            }
            Some(TokenKind::Dot) => {
                self.bump();
                Some(ShExValueExpr::Any)
            }
            Some(TokenKind::LBracket) => self.parse_value_set(),
            Some(TokenKind::LBrace) if matches!(self.peek2(), Some(TokenKind::RBrace)) => {
                self.bump();
                self.bump();
                Some(ShExValueExpr::Any)
            }
            Some(TokenKind::LBrace) => {
                self.error_here("nested shapes are only supported behind p: predicates");
                None
            }
            _ => {
                self.error_here_expecting(
                    "expected value expression",
                    &["@<Label>", "xsd:datatype", "[ values ]", ".", "{}"],
                );
                None
            }
        }
    }

    fn parse_value_set(&mut self) -> Option<ShExValueExpr> {
        let open_pos = self.pos();
        self.bump(); // `[`
        let mut terms = Vec::new();
        loop {
            match self.peek() {
                Some(TokenKind::RBracket) => {
                    self.bump();
                    break;
                }
                Some(TokenKind::Pname { .. }) => {
                    let pos = self.pos();
                    let Some(Token { kind: TokenKind::Pname { prefix, local }, .. }) =
                        self.bump()
                    else {
                        unreachable!("peeked a pname");
                    };
                    if self.out.prefixes.get(&prefix).is_none() {
                        self.diags.push(ParseDiagnostic::new(
                            pos,
                            format!("undeclared prefix `{prefix}:`"),
                        ));
                    } else if let Some(local) = local {
                        terms.push(ShExTerm::Entity { prefix, local });
                    } else {
                        self.diags.push(ParseDiagnostic::new(
                            pos,
                            format!("expected local name after `{prefix}:`"),
                        ));
                    }
                }
                Some(TokenKind::Str(_)) => {
                    let pos = self.pos();
                    let Some(Token { kind: TokenKind::Str(s), .. }) = self.bump() else {
                        unreachable!("peeked a string");
                    };
                    if s.is_empty() {
                        self.diags
                            .push(ParseDiagnostic::new(pos, "empty literal in value set"));
                    } else {
                        terms.push(ShExTerm::Str(s));
                    }
                }
                Some(TokenKind::Int(n)) => {
                    let n = *n;
                    self.bump();
                    terms.push(ShExTerm::Int(n));
                }
                _ => {
                    self.error_here("expected value or `]` in value set");
                    self.recover_to(&[TokenKind::RBracket, TokenKind::Semi, TokenKind::RBrace]);
                    self.eat(&TokenKind::RBracket);
                    break;
                }
            }
        }
        if terms.is_empty() {
            self.diags
                .push(ParseDiagnostic::new(open_pos, "value set must contain at least one value"));
            return None;
        }
        Some(ShExValueExpr::ValueSet(terms))
    }

    fn parse_cardinality(&mut self) -> Option<Cardinality> {
        match self.peek() {
            Some(TokenKind::Question) => {
                self.bump();
                Some(Cardinality::Optional)
            }
            Some(TokenKind::Star) => {
                self.bump();
                Some(Cardinality::Star)
            }
            Some(TokenKind::Plus) => {
                self.bump();
                Some(Cardinality::Plus)
            }
            Some(TokenKind::LBrace) if matches!(self.peek2(), Some(TokenKind::Int(_))) => {
                self.bump();
                let Some(TokenKind::Int(min)) = self.peek().cloned() else { unreachable!() };
                self.bump();
                let min = min as u32;
                let card = if self.eat(&TokenKind::Comma) {
                    match self.peek() {
                        Some(TokenKind::Int(max)) => {
                            let max = *max as u32;
                            self.bump();
                            Cardinality::Range { min, max: Some(max) }
                        }
                        Some(TokenKind::Star) => {
                            self.bump();
                            Cardinality::Range { min, max: None }
                        }
                        _ => {
                            self.error_here("expected maximum count or `*`");
                            Cardinality::Range { min, max: None }
                        }
                    }
                } else {
                    Cardinality::Range { min, max: Some(min) }
                };
                self.expect(TokenKind::RBrace, "`}`");
                Some(card)
            }
            _ => None,
        }
    }

    fn skip_semacts(&mut self, shape: &ShapeLabel) {
        while matches!(self.peek(), Some(TokenKind::Percent)) {
            self.skip_semact(shape);
        }
    }

    /// `%name{ code %}` (or the empty form `%name%`). The body must lex —
    /// it is consumed token by token until the closing `%}`.
    fn skip_semact(&mut self, shape: &ShapeLabel) {
        let pos = self.pos();
        let start = pos.byte_offset;
        self.bump(); // `%`
        if matches!(self.peek(), Some(TokenKind::Pname { .. } | TokenKind::Ident(_))) {
            self.bump();
        }
        match self.peek() {
            Some(TokenKind::Percent) => {
                self.bump();
            }
            Some(TokenKind::LBrace) => {
                self.bump();
                loop {
                    match self.bump() {
                        Some(Token { kind: TokenKind::Percent, .. })
                            if matches!(self.peek(), Some(TokenKind::RBrace)) =>
                        {
                            self.bump();
                            break;
                        }
                        Some(_) => {}
                        None => {
                            self.diags.push(ParseDiagnostic::new(
                                self.end,
                                "unterminated semantic action",
                            ));
                            break;
                        }
                    }
                }
            }
            _ => self.error_here_expecting("expected semantic action body", &["{ code %}", "%"]),
        }
        let text = self.snippet(start);
        self.reject(shape.clone(), text, RejectReason::SemanticActionsUnsupported, pos);
    }

    /// Consume the rest of a `{ … }` block whose opener is already
    /// consumed (used when a block is being rejected whole).
    fn skip_block_rest(&mut self) {
        let mut depth = 1usize;
        while let Some(tok) = self.bump() {
            match tok.kind {
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return;
                    }
                }
                _ => {}
            }
        }
        self.diags.push(ParseDiagnostic::new(self.end, "unterminated `{` block"));
    }

    /// Consume a value expression of any form without building an AST —
    /// for constraints recorded as rejections, where only the source
    /// extent matters.
    fn skip_value_expr(&mut self) {
        match self.peek() {
            Some(TokenKind::At) => {
                self.bump();
                if matches!(self.peek(), Some(TokenKind::Iri(_))) {
                    self.bump();
                } else {
                    self.error_here("expected shape label after `@`");
                }
            }
            Some(
                TokenKind::Pname { .. } | TokenKind::Ident(_) | TokenKind::Iri(_) | TokenKind::Dot,
            ) => {
                self.bump();
            }
            Some(TokenKind::LBracket) => {
                self.bump();
                loop {
                    match self.bump() {
                        Some(Token { kind: TokenKind::RBracket, .. }) => break,
                        Some(_) => {}
                        None => {
                            self.diags.push(ParseDiagnostic::new(
                                self.end,
                                "unterminated `[` value set",
                            ));
                            break;
                        }
                    }
                }
            }
            Some(TokenKind::LBrace) => {
                self.bump();
                self.skip_block_rest();
            }
            _ => self.error_here("expected value expression"),
        }
    }

    /// Every `@<Label>` must point at a declared shape, mirroring the
    /// well-formedness gate of the WShEx parser.
    fn check_references(&mut self) {
        let mut missing: Vec<(ShapeLabel, ShapeLabel)> = Vec::new();
        for shape in &self.out.shapes {
            let mut see = |v: &ShExValueExpr| {
                if let ShExValueExpr::Ref(l) = v {
                    if !self.out.shapes.iter().any(|s| s.label == *l) {
                        missing.push((shape.label.clone(), l.clone()));
                    }
                }
            };
            for c in &shape.constraints {
                match c {
                    ShExConstraint::Direct(d) => see(&d.value),
                    ShExConstraint::Statement(s) => {
                        see(&s.value);
                        for q in &s.qualifiers {
                            see(&q.value);
                        }
                    }
                }
            }
        }
        for (in_shape, l) in missing {
            let pos = self.decl_pos.get(&in_shape).copied().unwrap_or(self.end);
            self.diags.push(ParseDiagnostic::new(
                pos,
                format!("<{in_shape}> references undefined shape <{l}>"),
            ));
        }
    }
}

/// Convert a parsed subset schema to WShEx. Never fails: constraints
/// that cannot be mapped are listed in [`ConversionReport::rejected`],
/// and every declared shape appears in the output (possibly emptied), so
/// shape references always resolve.
pub fn convert(shex: &ShExSubsetSchema) -> ConversionReport {
    let mut converted = Schema::new();
    converted.add_prefix("", shex.entity_namespace());
    let mut cx = Converter {
        prefixes: &shex.prefixes,
        report: ConversionReport {
            converted,
            notes: Vec::new(),
            rejected: shex.rejected.clone(),
            mapped: 0,
        },
    };
    for shape in &shex.shapes {
        cx.convert_shape(shape);
    }
    cx.report.rejected.sort_by_key(|r| r.position.byte_offset);
    cx.report
}

struct Converter<'a> {
    prefixes: &'a IndexMap<String, String>,
    report: ConversionReport,
}

impl Converter<'_> {
    fn role(&self, prefix: &str) -> Role {
        self.prefixes.get(prefix).map_or(Role::Other, |iri| classify(prefix, iri))
    }

    fn note(&mut self, shape: &ShExShape, message: String) {
        self.report.notes.push(ConversionNote { shape: shape.label.clone(), message });
    }

    fn reject(
        &mut self,
        shape: &ShExShape,
        constraint: &str,
        reason: RejectReason,
        position: SourcePosition,
    ) {
        self.report.rejected.push(RejectedConstraint {
            shape: shape.label.clone(),
            constraint: constraint.to_string(),
            reason,
            position,
        });
    }

    fn convert_shape(&mut self, shape: &ShExShape) {
        // Regroup by property in first-mention order; the merge rules
        // consult both constraint kinds of one property at once.
        let mut by_prop: IndexMap<EntityId, (Vec<&DirectConstraint>, Vec<&StatementConstraint>)> =
            IndexMap::new();
        for c in &shape.constraints {
            let slot = by_prop.entry(c.property()).or_default();
            match c {
                ShExConstraint::Direct(d) => slot.0.push(d),
                ShExConstraint::Statement(s) => slot.1.push(s),
            }
        }

        let mut tes: Vec<TripleExpr> = Vec::new();
        for (property, (directs, statements)) in &by_prop {
            for d in directs.iter().skip(1) {
                self.reject(shape, &d.text, RejectReason::DuplicateConstraint, d.pos);
            }
            for s in statements.iter().skip(1) {
                self.reject(shape, &s.text, RejectReason::DuplicateConstraint, s.pos);
            }
            if let Some(te) = self.convert_property(
                shape,
                *property,
                directs.first().copied(),
                statements.first().copied(),
            ) {
                tes.push(te);
            }
        }
        let te = if tes.is_empty() { TripleExpr::Empty } else { fold_right(tes, TripleExpr::each_of) };
        self.report.converted.define(shape.label.clone(), ShapeExpr::shape(te));
    }

    fn convert_property(
        &mut self,
        shape: &ShExShape,
        property: EntityId,
        direct: Option<&DirectConstraint>,
        statement: Option<&StatementConstraint>,
    ) -> Option<TripleExpr> {
        // Convert each side's pieces first: a side whose value (or
        // qualifier) cannot be mapped is rejected whole — partial
        // conversion would silently weaken the constraint — and the
        // other side stands alone.
        let direct =
            direct.and_then(|d| self.value_expr(shape, &d.value, &d.text, d.pos).map(|v| (d, v)));
        let statement = statement.and_then(|s| {
            let v = self.value_expr(shape, &s.value, &s.text, s.pos)?;
            let qs = self.qualifier_spec(shape, s)?;
            Some((s, v, qs))
        });

        match (direct, statement) {
            (None, None) => None,
            (Some((d, value)), None) => {
                self.note_reference_cardinality(shape, "constraint", property, &value, d.card);
                self.report.mapped += 1;
                Some(lower_te(TripleExpr::tc(property, value), d.card))
            }
            (None, Some((s, value, qs))) => {
                self.report.mapped += 1;
                Some(lower_te(
                    TripleExpr::tc_with(property, value, QualifierSpec::open(qs)),
                    s.card,
                ))
            }
            (Some((d, direct_value)), Some((s, value, qs))) => {
                if direct_value != value {
                    self.note(
                        shape,
                        format!(
                            "wdt:{property} and ps:{property} constrain the value differently; \
                             keeping the ps: one"
                        ),
                    );
                }
                if d.card != s.card {
                    self.note(
                        shape,
                        format!(
                            "wdt:{property} cardinality {} conflicts with the p:{property} \
                             block's {}; the p: block wins",
                            card_text(d.card),
                            card_text(s.card)
                        ),
                    );
                }
                self.report.mapped += 2;
                Some(lower_te(
                    TripleExpr::tc_with(property, value, QualifierSpec::open(qs)),
                    s.card,
                ))
            }
        }
    }

    fn qualifier_spec(&mut self, shape: &ShExShape, s: &StatementConstraint) -> Option<PropertySpec> {
        let mut converted = Vec::with_capacity(s.qualifiers.len());
        for q in &s.qualifiers {
            converted.push((q, self.value_expr(shape, &q.value, &s.text, s.pos)?));
        }
        let mut parts = Vec::with_capacity(converted.len());
        for (q, value) in converted {
            self.note_reference_cardinality(shape, "qualifier", q.property, &value, q.card);
            parts.push(lower_ps(PropertySpec::prop(q.property, value), q.card));
        }
        Some(if parts.is_empty() {
            PropertySpec::EmptyQs
        } else {
            fold_right(parts, PropertySpec::each_of)
        })
    }

    /// Non-default cardinalities on reference-valued constraints are
    /// where hand-maintained WShEx ports most often diverge from
    /// mechanical conversion, so preserving one is worth a review note.
    /// Cardinalities adopted from a `p:` block are the documented
    /// resolution and stay silent.
    fn note_reference_cardinality(
        &mut self,
        shape: &ShExShape,
        what: &str,
        property: EntityId,
        value: &ShapeExpr,
        card: Cardinality,
    ) {
        if card == Cardinality::ExactlyOne {
            return;
        }
        let ShapeExpr::Ref(target) = value else { return };
        self.note(
            shape,
            format!(
                "preserved source cardinality `{card}` on reference-valued {what} \
                 :{property} @<{target}>"
            ),
        );
    }

    fn value_expr(
        &mut self,
        shape: &ShExShape,
        value: &ShExValueExpr,
        constraint: &str,
        pos: SourcePosition,
    ) -> Option<ShapeExpr> {
        match value {
            ShExValueExpr::Ref(label) => Some(ShapeExpr::Ref(label.clone())),
            ShExValueExpr::Datatype { prefix, local } => {
                if self.role(prefix) == Role::XsdDatatype {
                    if let Some(dt) = xsd_datatype(local) {
                        return Some(ShapeExpr::Cond(NodeConstraint::Datatype(dt)));
                    }
                }
                self.reject(shape, constraint, RejectReason::UnsupportedDatatype, pos);
                None
            }
            ShExValueExpr::ValueSet(terms) => {
                let mut values = Vec::with_capacity(terms.len());
                for term in terms {
                    match term {
                        ShExTerm::Entity { prefix, local } => {
                            let id = (self.role(prefix) == Role::Entity)
                                .then(|| local.parse::<EntityId>().ok())
                                .flatten();
                            match id {
                                Some(id) => values.push(Value::EntityRef(id)),
                                None => {
                                    self.reject(
                                        shape,
                                        constraint,
                                        RejectReason::ValueOutsideEntityNamespace,
                                        pos,
                                    );
                                    return None;
                                }
                            }
                        }
                        ShExTerm::Str(s) => values.push(Value::Data(
                            DataValue::simple(BuiltinDatatype::String, s)
                                .expect("the reader drops empty literals"),
                        )),
                        ShExTerm::Int(n) => values.push(Value::Data(
                            DataValue::quantity(n.to_string(), None).expect("digits"),
                        )),
                    }
                }
                Some(ShapeExpr::Cond(NodeConstraint::ValueSet(values)))
            }
            ShExValueExpr::Any => Some(ShapeExpr::Cond(NodeConstraint::AnyValue)),
        }
    }
}

/// The datatype bridge from XML Schema names to Wikibase builtins; only
/// the four with an exact counterpart convert.
fn xsd_datatype(local: &str) -> Option<BuiltinDatatype> {
    match local {
        "dateTime" => Some(BuiltinDatatype::Time),
        "string" => Some(BuiltinDatatype::String),
        "decimal" => Some(BuiltinDatatype::Quantity),
        "anyURI" => Some(BuiltinDatatype::Url),
        _ => None,
    }
}

// The same `?`/`*`/`+` lowering the WShEx parser applies, so converted
// schemas compare structurally equal to parsed ones.
fn lower_te(te: TripleExpr, card: Cardinality) -> TripleExpr {
    match card {
        Cardinality::ExactlyOne => te,
        Cardinality::Optional => TripleExpr::one_of(te, TripleExpr::Empty),
        Cardinality::Star => TripleExpr::star(te),
        Cardinality::Plus => TripleExpr::each_of(te.clone(), TripleExpr::star(te)),
        card @ Cardinality::Range { .. } => TripleExpr::repeat(te, card),
    }
}

fn lower_ps(ps: PropertySpec, card: Cardinality) -> PropertySpec {
    match card {
        Cardinality::ExactlyOne => ps,
        Cardinality::Optional => PropertySpec::one_of(ps, PropertySpec::EmptyQs),
        Cardinality::Star => PropertySpec::star(ps),
        Cardinality::Plus => PropertySpec::each_of(ps.clone(), PropertySpec::star(ps)),
        card @ Cardinality::Range { .. } => PropertySpec::repeat(ps, card),
    }
}

fn card_text(card: Cardinality) -> String {
    match card {
        Cardinality::ExactlyOne => "exactly one".to_string(),
        other => format!("`{other}`"),
    }
}
