//! Parser and pretty-printer for the WShEx compact syntax.
//!
//! The syntax is ShExC-flavoured: `PREFIX` declarations, `<Label> <shape
//! expression>` declarations, `;`-separated triple constraints, `|` for
//! alternatives, and the qualifier blocks `{| … |}` (open) / `[| … |]`
//! (closed) attached between a constraint's value expression and its
//! cardinality. Prefixes are namespaces for entity ids only: `wdt:P31`
//! and `:P31` denote the same property.
//!
//! Parenthesized groups `( … )` are accepted at all three expression
//! levels so every well-formed AST the renderer can emit is re-parseable;
//! plain texts never need them.

mod lexer;
mod render;

pub use render::render_schema;

use std::fmt;

use indexmap::IndexMap;

use crate::ast::{
    well_formed, Cardinality, NodeConstraint, PropertySpec, QualifierSpec, Schema, ShapeExpr,
    ShapeLabel, TripleExpr,
};
use crate::model::{BuiltinDatatype, DataValue, EntityId, Value};

pub(crate) use lexer::{lex, Token, TokenKind};

/// A position in the source text; line and column are 1-based, the byte
/// offset 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePosition {
    pub line: usize,
    pub column: usize,
    pub byte_offset: usize,
}

impl fmt::Display for SourcePosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// One parse problem: where, what, and (when useful) what would have been
/// accepted there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub position: SourcePosition,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseDiagnostic {
    pub fn new(position: SourcePosition, message: impl Into<String>) -> Self {
        ParseDiagnostic { position, message: message.into(), expected: Vec::new() }
    }

    pub(crate) fn expecting(mut self, expected: &[&str]) -> Self {
        self.expected = expected.iter().map(|s| s.to_string()).collect();
        self
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.position, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// Parse a schema from compact-syntax text. On any problem the full
/// diagnostic list is returned; the parser resynchronizes at `;`, `}`,
/// `|}`, `|]` and shape-declaration boundaries to report several errors
/// per run. A successfully parsed schema is well-formed (references
/// resolve, value sets non-empty, ranges ordered).
pub fn parse_schema(text: &str) -> Result<Schema, Vec<ParseDiagnostic>> {
    let (tokens, lex_diags) = lex(text);
    let mut p = Parser {
        end: SourcePosition {
            line: text.lines().count().max(1),
            column: text.lines().last().map_or(1, |l| l.chars().count() + 1),
            byte_offset: text.len(),
        },
        tokens,
        i: 0,
        diags: lex_diags,
        schema: Schema::new(),
        decl_pos: IndexMap::new(),
    };

    p.parse_prefixes();
    let mut saw_decl = false;
    while !p.at_end() {
        if matches!(p.peek(), Some(TokenKind::Iri(_))) {
            saw_decl = true;
            p.parse_shape_decl();
        } else {
            p.error_here_expecting("expected shape declaration", &["<Label>"]);
            p.recover_to_decl();
        }
    }
    if !saw_decl {
        p.diags.push(
            ParseDiagnostic::new(p.end, "expected shape declaration").expecting(&["<Label>"]),
        );
    }

    // Well-formedness failures surface as diagnostics at the declaration
    // of the shape they were found in.
    if p.diags.is_empty() {
        for d in well_formed(&p.schema) {
            let pos = p.decl_pos.get(&d.label).copied().unwrap_or(p.end);
            p.diags.push(ParseDiagnostic::new(pos, d.to_string()));
        }
    }

    if p.diags.is_empty() {
        Ok(p.schema)
    } else {
        Err(p.diags)
    }
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
    diags: Vec<ParseDiagnostic>,
    schema: Schema,
    decl_pos: IndexMap<ShapeLabel, SourcePosition>,
    end: SourcePosition,
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Parser {
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
                    self.schema.add_prefix(prefix, iri);
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
        let label = if valid_name(&name) {
            Some(ShapeLabel::new(&name))
        } else {
            self.diags.push(ParseDiagnostic::new(
                pos,
                format!("invalid shape label `<{name}>`: expected a plain name"),
            ));
            None
        };
        let Some(se) = self.parse_shape_expr() else {
            self.recover_to_decl();
            return;
        };
        if let Some(label) = label {
            if self.schema.get(&label).is_some() {
                self.diags
                    .push(ParseDiagnostic::new(pos, format!("shape <{label}> already defined")));
            } else {
                self.decl_pos.insert(label.clone(), pos);
                self.schema.define(label, se);
            }
        }
    }

    fn parse_shape_expr(&mut self) -> Option<ShapeExpr> {
        // AND chains fold left: `a AND b AND c` is And(And(a, b), c).
        let mut acc = self.parse_shape_atom()?;
        while self.eat_keyword("AND") {
            let rhs = self.parse_shape_atom()?;
            acc = ShapeExpr::and(acc, rhs);
        }
        Some(acc)
    }

    fn parse_shape_atom(&mut self) -> Option<ShapeExpr> {
        match self.peek() {
            Some(TokenKind::At) => {
                self.bump();
                match self.bump() {
                    Some(Token { kind: TokenKind::Iri(name), pos }) => {
                        if valid_name(&name) {
                            Some(ShapeExpr::Ref(ShapeLabel::new(name)))
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
            Some(TokenKind::Dot) => {
                self.bump();
                Some(ShapeExpr::Cond(NodeConstraint::AnyValue))
            }
            Some(TokenKind::LBracket) => self.parse_value_set(),
            Some(TokenKind::Ident(name)) if name == "CLOSED" => self.parse_shape(),
            Some(TokenKind::LBrace) => self.parse_shape(),
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                let pos = self.pos();
                self.bump();
                match BuiltinDatatype::from_name(&name) {
                    Some(dt) => Some(ShapeExpr::Cond(NodeConstraint::Datatype(dt))),
                    None => {
                        self.diags.push(ParseDiagnostic::new(
                            pos,
                            format!("unknown datatype `{name}`"),
                        ));
                        None
                    }
                }
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let se = self.parse_shape_expr()?;
                self.expect(TokenKind::RParen, "`)`");
                Some(se)
            }
            _ => {
                self.error_here_expecting(
                    "expected shape expression",
                    &["@<Label>", "datatype", "[", ".", "{", "CLOSED", "("],
                );
                None
            }
        }
    }

    fn parse_value_set(&mut self) -> Option<ShapeExpr> {
        let open_pos = self.pos();
        self.bump(); // `[`
        let mut values = Vec::new();
        loop {
            match self.peek() {
                Some(TokenKind::RBracket) => {
                    self.bump();
                    break;
                }
                Some(TokenKind::Pname { .. } | TokenKind::Int(_) | TokenKind::Str(_)) => {
                    if let Some(v) = self.parse_value() {
                        values.push(v);
                    }
                }
                _ => {
                    self.error_here("expected value or `]` in value set");
                    self.recover_to(&[
                        TokenKind::RBracket,
                        TokenKind::Semi,
                        TokenKind::RBrace,
                        TokenKind::QualOpenR,
                        TokenKind::QualClosedR,
                    ]);
                    self.eat(&TokenKind::RBracket);
                    break;
                }
            }
        }
        if values.is_empty() {
            self.diags.push(ParseDiagnostic::new(
                open_pos,
                "value set must contain at least one value",
            ));
            return None;
        }
        Some(ShapeExpr::Cond(NodeConstraint::ValueSet(values)))
    }

    fn parse_value(&mut self) -> Option<Value> {
        let pos = self.pos();
        match self.bump()?.kind {
            TokenKind::Pname { prefix, local } => {
                let id = self.entity_from_pname(&prefix, local.as_deref(), pos)?;
                Some(Value::EntityRef(id))
            }
            TokenKind::Int(n) => {
                Some(Value::Data(DataValue::quantity(n.to_string(), None).expect("digits")))
            }
            TokenKind::Str(s) => {
                let datatype = if self.eat(&TokenKind::Carets) {
                    let dt_pos = self.pos();
                    match self.bump() {
                        Some(Token { kind: TokenKind::Ident(name), .. }) => {
                            match BuiltinDatatype::from_name(&name) {
                                Some(dt) => dt,
                                None => {
                                    self.diags.push(ParseDiagnostic::new(
                                        dt_pos,
                                        format!("unknown datatype `{name}`"),
                                    ));
                                    return None;
                                }
                            }
                        }
                        _ => {
                            self.diags.push(ParseDiagnostic::new(
                                dt_pos,
                                "expected datatype name after `^^`",
                            ));
                            return None;
                        }
                    }
                } else {
                    BuiltinDatatype::String
                };
                match DataValue::simple(datatype, s) {
                    Ok(dv) => Some(Value::Data(dv)),
                    Err(_) => {
                        self.diags
                            .push(ParseDiagnostic::new(pos, "empty literal in value set"));
                        None
                    }
                }
            }
            _ => unreachable!("caller checked the token kind"),
        }
    }

    /// Resolve `prefix:local` to an entity id. Named prefixes must be
    /// declared; the default `:` is always available.
    fn entity_from_pname(
        &mut self,
        prefix: &str,
        local: Option<&str>,
        pos: SourcePosition,
    ) -> Option<EntityId> {
        if !prefix.is_empty() && !self.schema.prefixes().any(|(p, _)| p == prefix) {
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
        match local.parse::<EntityId>() {
            Ok(id) => Some(id),
            Err(_) => {
                self.diags.push(ParseDiagnostic::new(
                    pos,
                    format!("`{local}` is not an entity id (expected Q<n> or P<n>)"),
                ));
                None
            }
        }
    }

    fn parse_shape(&mut self) -> Option<ShapeExpr> {
        let closed = self.eat_keyword("CLOSED");
        if !self.expect(TokenKind::LBrace, "`{`") {
            return None;
        }
        if self.eat(&TokenKind::RBrace) {
            return Some(ShapeExpr::Shape { closed, te: TripleExpr::Empty });
        }
        let te = self.parse_triple_expr().unwrap_or(TripleExpr::Empty);
        self.expect(TokenKind::RBrace, "`}`");
        Some(ShapeExpr::Shape { closed, te })
    }

    fn parse_triple_expr(&mut self) -> Option<TripleExpr> {
        // `|` alternatives fold right: `a | b | c` is OneOf(a, OneOf(b, c)).
        let mut parts = vec![self.parse_each_of()?];
        while self.eat(&TokenKind::Pipe) {
            match self.parse_each_of() {
                Some(te) => parts.push(te),
                None => break,
            }
        }
        Some(fold_right(parts, TripleExpr::one_of))
    }

    fn starts_unary_te(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Pname { .. } | TokenKind::LParen))
    }

    fn parse_each_of(&mut self) -> Option<TripleExpr> {
        // `;` sequences fold right: `a ; b ; c` is EachOf(a, EachOf(b, c)).
        let mut parts = Vec::new();
        loop {
            match self.parse_unary_te() {
                Some(te) => parts.push(te),
                None => {
                    self.recover_to(&[
                        TokenKind::Semi,
                        TokenKind::Pipe,
                        TokenKind::RBrace,
                        TokenKind::RParen,
                        TokenKind::QualOpenR,
                        TokenKind::QualClosedR,
                    ]);
                }
            }
            if self.eat(&TokenKind::Semi) {
                if self.starts_unary_te() {
                    continue;
                }
                break; // trailing `;`
            }
            break;
        }
        if parts.is_empty() {
            None
        } else {
            Some(fold_right(parts, TripleExpr::each_of))
        }
    }

    fn parse_unary_te(&mut self) -> Option<TripleExpr> {
        if self.eat(&TokenKind::LParen) {
            // `( )` is the empty triple expression.
            let te = if self.eat(&TokenKind::RParen) {
                TripleExpr::Empty
            } else {
                let te = self.parse_triple_expr()?;
                self.expect(TokenKind::RParen, "`)`");
                te
            };
            return Some(self.wrap_cardinality(te));
        }
        let pos = self.pos();
        let (prefix, local) = match self.peek() {
            Some(TokenKind::Pname { prefix, local }) => (prefix.clone(), local.clone()),
            _ => {
                self.error_here_expecting("expected triple constraint", &[":P<n>", "("]);
                return None;
            }
        };
        self.bump();
        let predicate = self.property_from_pname(&prefix, local.as_deref(), pos)?;
        let value = self.parse_value_expr()?;
        let qualifiers = self.parse_qualifier_block()?;
        let tc = TripleExpr::tc_with(predicate, value, qualifiers);
        Some(self.wrap_cardinality(tc))
    }

    fn property_from_pname(
        &mut self,
        prefix: &str,
        local: Option<&str>,
        pos: SourcePosition,
    ) -> Option<EntityId> {
        let id = self.entity_from_pname(prefix, local, pos)?;
        if id.is_property() {
            Some(id)
        } else {
            self.diags.push(ParseDiagnostic::new(
                pos,
                format!("`{id}` cannot be a predicate: expected a property (P<n>)"),
            ));
            None
        }
    }

    fn parse_value_expr(&mut self) -> Option<ShapeExpr> {
        if matches!(self.peek(), Some(TokenKind::Pname { .. })) {
            // Common slip: a bare entity where a value set is needed.
            self.error_here_expecting(
                "expected value expression",
                &["@<Label>", "datatype", "[ values ]", ".", "{", "("],
            );
            return None;
        }
        self.parse_shape_atom()
    }

    fn parse_qualifier_block(&mut self) -> Option<QualifierSpec> {
        let (closer, openness) = match self.peek() {
            Some(TokenKind::QualOpenL) => (TokenKind::QualOpenR, false),
            Some(TokenKind::QualClosedL) => (TokenKind::QualClosedR, true),
            _ => return Some(QualifierSpec::default()),
        };
        self.bump();
        let body = if self.peek() == Some(&closer) {
            PropertySpec::EmptyQs
        } else {
            match self.parse_prop_spec(&closer) {
                Some(ps) => ps,
                None => {
                    self.recover_to(&[closer.clone(), TokenKind::RBrace, TokenKind::Semi]);
                    PropertySpec::EmptyQs
                }
            }
        };
        let what = if closer == TokenKind::QualOpenR { "`|}`" } else { "`|]`" };
        self.expect(closer, what);
        Some(if openness {
            QualifierSpec::closed(body)
        } else {
            QualifierSpec::open(body)
        })
    }

    fn parse_prop_spec(&mut self, closer: &TokenKind) -> Option<PropertySpec> {
        let mut parts = vec![self.parse_qs_each_of(closer)?];
        while self.eat(&TokenKind::Pipe) {
            match self.parse_qs_each_of(closer) {
                Some(ps) => parts.push(ps),
                None => break,
            }
        }
        Some(fold_right(parts, PropertySpec::one_of))
    }

    fn parse_qs_each_of(&mut self, closer: &TokenKind) -> Option<PropertySpec> {
        let mut parts = Vec::new();
        loop {
            match self.parse_qs_unary() {
                Some(ps) => parts.push(ps),
                None => {
                    self.recover_to(&[
                        TokenKind::Comma,
                        TokenKind::Pipe,
                        closer.clone(),
                        TokenKind::RBrace,
                        TokenKind::RParen,
                    ]);
                }
            }
            if self.eat(&TokenKind::Comma) {
                if matches!(self.peek(), Some(TokenKind::Pname { .. } | TokenKind::LParen)) {
                    continue;
                }
                break; // trailing `,`
            }
            break;
        }
        if parts.is_empty() {
            None
        } else {
            Some(fold_right(parts, PropertySpec::each_of))
        }
    }

    fn parse_qs_unary(&mut self) -> Option<PropertySpec> {
        if self.eat(&TokenKind::LParen) {
            // `( )` is the empty property specifier.
            let ps = if self.eat(&TokenKind::RParen) {
                PropertySpec::EmptyQs
            } else {
                let ps = self.parse_prop_spec(&TokenKind::RParen)?;
                self.expect(TokenKind::RParen, "`)`");
                ps
            };
            return Some(self.wrap_cardinality_qs(ps));
        }
        let pos = self.pos();
        let (prefix, local) = match self.peek() {
            Some(TokenKind::Pname { prefix, local }) => (prefix.clone(), local.clone()),
            _ => {
                self.error_here_expecting("expected qualifier constraint", &[":P<n>", "("]);
                return None;
            }
        };
        self.bump();
        let property = self.property_from_pname(&prefix, local.as_deref(), pos)?;
        let value = self.parse_value_expr()?;
        let ps = PropertySpec::prop(property, value);
        Some(self.wrap_cardinality_qs(ps))
    }

    // `?`, `*` and `+` have exact core-grammar meanings, so the parser
    // lowers them on the spot; only counted ranges keep a `Repeat`
    // wrapper for desugaring. This makes parse and render mutually
    // inverse: every core operator has exactly one concrete spelling.
    fn wrap_cardinality(&mut self, te: TripleExpr) -> TripleExpr {
        match self.parse_cardinality() {
            None => te,
            Some(Cardinality::ExactlyOne) => te,
            Some(Cardinality::Optional) => TripleExpr::one_of(te, TripleExpr::Empty),
            Some(Cardinality::Star) => TripleExpr::star(te),
            Some(Cardinality::Plus) => TripleExpr::each_of(te.clone(), TripleExpr::star(te)),
            Some(card @ Cardinality::Range { .. }) => TripleExpr::repeat(te, card),
        }
    }

    fn wrap_cardinality_qs(&mut self, ps: PropertySpec) -> PropertySpec {
        match self.parse_cardinality() {
            None => ps,
            Some(Cardinality::ExactlyOne) => ps,
            Some(Cardinality::Optional) => PropertySpec::one_of(ps, PropertySpec::EmptyQs),
            Some(Cardinality::Star) => PropertySpec::star(ps),
            Some(Cardinality::Plus) => PropertySpec::each_of(ps.clone(), PropertySpec::star(ps)),
            Some(card @ Cardinality::Range { .. }) => PropertySpec::repeat(ps, card),
        }
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
}

pub(crate) fn fold_right<T>(parts: Vec<T>, mut join: impl FnMut(T, T) -> T) -> T {
    let mut it = parts.into_iter().rev();
    let mut acc = it.next().expect("fold_right over a non-empty list");
    for p in it {
        acc = join(p, acc);
    }
    acc
}
