//! Pretty-printer for schemas. `parse_schema(render_schema(s))` returns a
//! schema structurally equal to `s` whenever `s` came out of the parser;
//! desugared or hand-built schemas also render (sugar patterns such as
//! `OneOf(x, ε)` print back as `x ?`), with literal payloads normalized
//! to their `(datatype, lexical)` form — the granularity value-set
//! matching uses anyway.

use std::fmt::Write;

use crate::ast::{
    Cardinality, NodeConstraint, Openness, PropertySpec, QualifierSpec, Schema, ShapeExpr,
    TripleConstraint, TripleExpr,
};
use crate::model::{BuiltinDatatype, DataValue, StructuredValue, Value};

/// Render a schema back to compact syntax.
pub fn render_schema(schema: &Schema) -> String {
    let mut out = String::new();
    for (prefix, iri) in schema.prefixes() {
        let _ = writeln!(out, "PREFIX {prefix}: <{iri}>");
    }
    for (i, (label, se)) in schema.shapes().enumerate() {
        if i > 0 || schema.prefixes().next().is_some() {
            out.push('\n');
        }
        let _ = write!(out, "<{label}> ");
        render_decl_body(se, &mut out);
        out.push('\n');
    }
    out
}

/// Declaration bodies get the readable layout: one top-level constraint
/// per line. Everything below that renders inline.
fn render_decl_body(se: &ShapeExpr, out: &mut String) {
    match se {
        ShapeExpr::Shape { closed, te } if *te != TripleExpr::Empty => {
            if *closed {
                out.push_str("CLOSED ");
            }
            out.push_str("{\n");
            let mut te = te;
            // Walk the `;` spine; re-parsing folds it back identically.
            loop {
                match te {
                    TripleExpr::EachOf(a, b) if !is_plus_sugar(a, b) => {
                        out.push_str("  ");
                        render_te(a, PREC_ONEOF + 1, out);
                        out.push_str(" ;\n");
                        te = b;
                    }
                    last => {
                        out.push_str("  ");
                        render_te(last, PREC_ONEOF, out);
                        out.push('\n');
                        break;
                    }
                }
            }
            out.push('}');
        }
        other => render_se(other, PREC_AND, out),
    }
}

const PREC_AND: u8 = 0;
const PREC_SE_ATOM: u8 = 1;

fn render_se(se: &ShapeExpr, min_prec: u8, out: &mut String) {
    match se {
        ShapeExpr::Cond(nc) => render_nc(nc, out),
        ShapeExpr::Ref(label) => {
            let _ = write!(out, "@<{label}>");
        }
        ShapeExpr::And(a, b) => {
            let paren = PREC_AND < min_prec;
            if paren {
                out.push_str("( ");
            }
            render_se(a, PREC_AND, out); // left-associative
            out.push_str(" AND ");
            render_se(b, PREC_SE_ATOM, out);
            if paren {
                out.push_str(" )");
            }
        }
        ShapeExpr::Shape { closed, te } => {
            if *closed {
                out.push_str("CLOSED ");
            }
            if *te == TripleExpr::Empty {
                out.push_str("{ }");
            } else {
                out.push_str("{ ");
                render_te(te, PREC_ONEOF, out);
                out.push_str(" }");
            }
        }
    }
}

fn render_nc(nc: &NodeConstraint, out: &mut String) {
    match nc {
        NodeConstraint::AnyValue => out.push('.'),
        NodeConstraint::Datatype(dt) => out.push_str(dt.name()),
        NodeConstraint::ValueSet(values) => {
            out.push_str("[ ");
            for v in values {
                render_value(v, out);
                out.push(' ');
            }
            out.push(']');
        }
    }
}

fn render_value(v: &Value, out: &mut String) {
    match v {
        Value::EntityRef(id) => {
            let _ = write!(out, ":{id}");
        }
        Value::Data(dv) => render_data_value(dv, out),
    }
}

fn render_data_value(dv: &DataValue, out: &mut String) {
    // Unit-less integer quantities round-trip as bare integers.
    let plain_int = dv.datatype() == BuiltinDatatype::Quantity
        && dv.lexical().parse::<u64>().is_ok()
        && matches!(dv.structured(), None | Some(StructuredValue::Quantity { unit: None, .. }));
    if plain_int {
        out.push_str(dv.lexical());
        return;
    }
    out.push('"');
    for c in dv.lexical().chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    if dv.datatype() != BuiltinDatatype::String {
        let _ = write!(out, "^^{}", dv.datatype().name());
    }
}

const PREC_ONEOF: u8 = 0;
const PREC_EACHOF: u8 = 1;
const PREC_POSTFIX: u8 = 2;
const PREC_ATOM: u8 = 3;

/// Does `EachOf(a, b)` spell `a +` (i.e. `b` is `Star(a)`)?
fn is_plus_sugar(a: &TripleExpr, b: &TripleExpr) -> bool {
    matches!(b, TripleExpr::Star(inner) if **inner == *a)
}

fn render_postfix_te(operand: &TripleExpr, suffix: &str, min_prec: u8, out: &mut String) {
    let paren = PREC_POSTFIX < min_prec;
    if paren {
        out.push_str("( ");
    }
    render_te(operand, PREC_ATOM, out);
    out.push(' ');
    out.push_str(suffix);
    if paren {
        out.push_str(" )");
    }
}

fn render_te(te: &TripleExpr, min_prec: u8, out: &mut String) {
    match te {
        TripleExpr::Empty => out.push_str("( )"),
        TripleExpr::Tc(tc) => render_tc(tc, out),
        TripleExpr::Repeat(x, Cardinality::ExactlyOne) => render_te(x, min_prec, out),
        TripleExpr::Repeat(x, card) => {
            render_postfix_te(x, &card.to_string(), min_prec, out);
        }
        TripleExpr::Star(x) => render_postfix_te(x, "*", min_prec, out),
        TripleExpr::OneOf(a, b) if **b == TripleExpr::Empty => {
            render_postfix_te(a, "?", min_prec, out);
        }
        TripleExpr::EachOf(a, b) if is_plus_sugar(a, b) => {
            render_postfix_te(a, "+", min_prec, out);
        }
        TripleExpr::EachOf(a, b) => {
            let paren = PREC_EACHOF < min_prec;
            if paren {
                out.push_str("( ");
            }
            render_te(a, PREC_EACHOF + 1, out);
            out.push_str(" ; ");
            render_te(b, PREC_EACHOF, out); // right-associative
            if paren {
                out.push_str(" )");
            }
        }
        TripleExpr::OneOf(a, b) => {
            let paren = PREC_ONEOF < min_prec;
            if paren {
                out.push_str("( ");
            }
            render_te(a, PREC_ONEOF + 1, out);
            out.push_str(" | ");
            render_te(b, PREC_ONEOF, out); // right-associative
            if paren {
                out.push_str(" )");
            }
        }
    }
}

fn render_tc(tc: &TripleConstraint, out: &mut String) {
    let _ = write!(out, ":{} ", tc.predicate());
    render_value_expr(tc.value(), out);
    render_qualifiers(tc.qualifiers(), out);
}

/// Value position accepts shape-expression atoms only, so `AND` chains
/// need a parenthesized group there.
fn render_value_expr(se: &ShapeExpr, out: &mut String) {
    render_se(se, PREC_SE_ATOM, out);
}

fn render_qualifiers(qs: &QualifierSpec, out: &mut String) {
    match (qs.openness, &qs.body) {
        // The default: an open spec with no constraints is no block at all.
        (Openness::Open, PropertySpec::EmptyQs) => {}
        (Openness::Open, body) => {
            out.push_str(" {| ");
            render_ps(body, PREC_ONEOF, out);
            out.push_str(" |}");
        }
        (Openness::Closed, PropertySpec::EmptyQs) => out.push_str(" [| |]"),
        (Openness::Closed, body) => {
            out.push_str(" [| ");
            render_ps(body, PREC_ONEOF, out);
            out.push_str(" |]");
        }
    }
}

fn render_postfix_ps(operand: &PropertySpec, suffix: &str, min_prec: u8, out: &mut String) {
    let paren = PREC_POSTFIX < min_prec;
    if paren {
        out.push_str("( ");
    }
    render_ps(operand, PREC_ATOM, out);
    out.push(' ');
    out.push_str(suffix);
    if paren {
        out.push_str(" )");
    }
}

fn is_plus_sugar_ps(a: &PropertySpec, b: &PropertySpec) -> bool {
    matches!(b, PropertySpec::StarQs(inner) if **inner == *a)
}

fn render_ps(ps: &PropertySpec, min_prec: u8, out: &mut String) {
    match ps {
        PropertySpec::EmptyQs => out.push_str("( )"),
        PropertySpec::PropQs { property, value } => {
            let _ = write!(out, ":{property} ");
            render_value_expr(value, out);
        }
        PropertySpec::RepeatQs(x, Cardinality::ExactlyOne) => render_ps(x, min_prec, out),
        PropertySpec::RepeatQs(x, card) => {
            render_postfix_ps(x, &card.to_string(), min_prec, out);
        }
        PropertySpec::StarQs(x) => render_postfix_ps(x, "*", min_prec, out),
        PropertySpec::OneOfQs(a, b) if **b == PropertySpec::EmptyQs => {
            render_postfix_ps(a, "?", min_prec, out);
        }
        PropertySpec::EachOfQs(a, b) if is_plus_sugar_ps(a, b) => {
            render_postfix_ps(a, "+", min_prec, out);
        }
        PropertySpec::EachOfQs(a, b) => {
            let paren = PREC_EACHOF < min_prec;
            if paren {
                out.push_str("( ");
            }
            render_ps(a, PREC_EACHOF + 1, out);
            out.push_str(" , ");
            render_ps(b, PREC_EACHOF, out);
            if paren {
                out.push_str(" )");
            }
        }
        PropertySpec::OneOfQs(a, b) => {
            let paren = PREC_ONEOF < min_prec;
            if paren {
                out.push_str("( ");
            }
            render_ps(a, PREC_ONEOF + 1, out);
            out.push_str(" | ");
            render_ps(b, PREC_ONEOF, out);
            if paren {
                out.push_str(" )");
            }
        }
    }
}
