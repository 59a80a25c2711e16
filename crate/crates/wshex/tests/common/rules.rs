//! The inference-rule checklist: for each rule of the three rule
//! families — shape expressions, triple expressions and qualifier
//! specifiers — one scenario the rule must accept and one it must
//! reject, evaluated against the production engine.
//!
//! `inference_rules.rs` surfaces every entry as an individual test;
//! `acceptance.rs` replays the whole table as one criterion. The rules
//! with a fixed behavioural contract beyond accept/reject (the empty
//! bag under repetition, the empty qualifier set, open-specifier
//! filtering, closed-specifier non-filtering, the literal qualifier
//! conjunction) carry a `pinned` tag so callers can assert they are
//! present.

use wshex::ast::{
    NodeConstraint, PropertySpec, QualifierSpec, Schema, ShapeExpr, ShapeLabel, TripleExpr,
};
use wshex::model::{
    BuiltinDatatype, DataValue, EntityId, Qualifier, Statement, Value, WikibaseGraph,
};
use wshex::validator::{Outcome, Validator, ValidatorOptions};

/// One polarity of one rule, already evaluated against the engine.
pub struct RuleCheck {
    /// "shape", "triple" or "qualifier" — which rule family this is.
    pub family: &'static str,
    pub rule: &'static str,
    /// True for the accepting scenario, false for the rejecting one.
    pub accepting: bool,
    pub scenario: &'static str,
    /// Tag for scenarios whose exact inputs are part of the contract.
    pub pinned: Option<&'static str>,
    /// Did the engine deliver the verdict the rule demands?
    pub holds: bool,
}

const P1: EntityId = EntityId::property(1);
const P2: EntityId = EntityId::property(2);
const START: EntityId = EntityId::property(580);
const END: EntityId = EntityId::property(582);
const COUNTRY: EntityId = EntityId::property(17);
const UNRELATED: EntityId = EntityId::property(999);

fn q(n: u64) -> Value {
    Value::EntityRef(EntityId::item(n))
}

fn a_time(stamp: &str) -> Value {
    Value::Data(DataValue::simple(BuiltinDatatype::Time, stamp).unwrap())
}

fn any() -> ShapeExpr {
    ShapeExpr::Cond(NodeConstraint::AnyValue)
}

fn time_cond() -> ShapeExpr {
    ShapeExpr::Cond(NodeConstraint::Datatype(BuiltinDatatype::Time))
}

fn value_set(values: &[Value]) -> ShapeExpr {
    ShapeExpr::Cond(NodeConstraint::ValueSet(values.to_vec()))
}

fn label(name: &str) -> ShapeLabel {
    ShapeLabel::new(name)
}

fn st(id: &str, property: EntityId, value: Value) -> Statement {
    Statement::new(id, EntityId::item(1), property, value).unwrap()
}

fn qual(property: EntityId, value: Value) -> Qualifier {
    Qualifier::new(property, value).unwrap()
}

fn single_shape(se: ShapeExpr) -> Validator {
    let mut schema = Schema::new();
    schema.define(label("S"), se);
    Validator::new(&schema, ValidatorOptions::default()).unwrap()
}

fn bare(pedantic: bool) -> Validator {
    Validator::new(&Schema::new(), ValidatorOptions { pedantic, ..Default::default() }).unwrap()
}

fn conforms(v: &Validator, graph: &WikibaseGraph, node: EntityId) -> bool {
    v.conforms(graph, node, &label("S")).unwrap() == Outcome::Conforming
}

/// Build and evaluate the whole checklist: fifteen rules, two
/// polarities each.
pub fn checks() -> Vec<RuleCheck> {
    let mut out = Vec::new();
    let mut push = |family, rule, accepting, scenario, pinned, holds| {
        out.push(RuleCheck { family, rule, accepting, scenario, pinned, holds });
    };

    // ---- shape-expression rules ------------------------------------

    {
        let v = single_shape(value_set(&[q(5)]));
        let g = WikibaseGraph::new();
        push(
            "shape",
            "Cond",
            true,
            "a node listed in the value set conforms",
            None,
            conforms(&v, &g, EntityId::item(5)),
        );
        push(
            "shape",
            "Cond",
            false,
            "a node outside the value set does not conform",
            None,
            !conforms(&v, &g, EntityId::item(6)),
        );
    }

    {
        let v = single_shape(ShapeExpr::and(
            ShapeExpr::Cond(NodeConstraint::Datatype(BuiltinDatatype::Item)),
            ShapeExpr::shape(TripleExpr::tc(P1, any())),
        ));
        let mut g = WikibaseGraph::new();
        g.add_statement(st("Q1$a", P1, q(2))).unwrap();
        push(
            "shape",
            "AND",
            true,
            "a node satisfying both conjuncts conforms",
            None,
            conforms(&v, &g, EntityId::item(1)),
        );
        push(
            "shape",
            "AND",
            false,
            "an item without the demanded statement fails the second conjunct",
            None,
            !conforms(&v, &g, EntityId::item(3)),
        );
    }

    {
        let v = single_shape(ShapeExpr::closed_shape(TripleExpr::tc(P1, any())));
        let mut exact = WikibaseGraph::new();
        exact.add_statement(st("Q1$a", P1, q(2))).unwrap();
        let mut extra = WikibaseGraph::new();
        extra.add_statement(st("Q1$a", P1, q(2))).unwrap();
        extra.add_statement(st("Q1$b", P2, q(3))).unwrap();
        push(
            "shape",
            "ClosedShape",
            true,
            "the node's entire neighborhood matches the expression",
            None,
            conforms(&v, &exact, EntityId::item(1)),
        );
        push(
            "shape",
            "ClosedShape",
            false,
            "a statement the expression does not describe breaks conformance",
            None,
            !conforms(&v, &extra, EntityId::item(1)),
        );
    }

    {
        let v = single_shape(ShapeExpr::shape(TripleExpr::tc(P1, value_set(&[q(5)]))));
        let mut ok = WikibaseGraph::new();
        ok.add_statement(st("Q1$a", P1, q(5))).unwrap();
        ok.add_statement(st("Q1$b", P2, q(3))).unwrap();
        let mut bad = WikibaseGraph::new();
        bad.add_statement(st("Q1$a", P1, q(6))).unwrap();
        bad.add_statement(st("Q1$b", P2, q(3))).unwrap();
        push(
            "shape",
            "OpenShape",
            true,
            "statements whose predicate the expression never mentions are invisible",
            None,
            conforms(&v, &ok, EntityId::item(1)),
        );
        push(
            "shape",
            "OpenShape",
            false,
            "a mentioned predicate still has to satisfy its constraint",
            None,
            !conforms(&v, &bad, EntityId::item(1)),
        );
    }

    // ---- triple-expression rules (explicit statement bags) ----------

    let v = bare(false);
    let g = WikibaseGraph::new();
    let te_matches = |bag: &[Statement], te: &TripleExpr| v.matches_te(&g, bag, te).unwrap();

    {
        let te = TripleExpr::each_of(TripleExpr::tc(P1, any()), TripleExpr::tc(P2, any()));
        push(
            "triple",
            "EachOf",
            true,
            "a bag splitting into matches for both operands matches",
            None,
            te_matches(&[st("a", P1, q(2)), st("b", P2, q(3))], &te),
        );
        push(
            "triple",
            "EachOf",
            false,
            "a bag leaving one operand unmatched does not",
            None,
            !te_matches(&[st("a", P1, q(2))], &te),
        );
    }

    {
        let te = TripleExpr::one_of(TripleExpr::tc(P1, any()), TripleExpr::tc(P2, any()));
        push(
            "triple",
            "OneOf",
            true,
            "either alternative alone matches the whole bag",
            None,
            te_matches(&[st("a", P1, q(2))], &te) && te_matches(&[st("b", P2, q(3))], &te),
        );
        push(
            "triple",
            "OneOf",
            false,
            "a bag matching neither single alternative does not",
            None,
            !te_matches(&[st("a", P1, q(2)), st("b", P2, q(3))], &te),
        );
    }

    {
        let te = TripleExpr::star(TripleExpr::tc(P1, any()));
        push(
            "triple",
            "Star",
            true,
            "the empty bag matches te*, and so does a two-piece recombination",
            Some("empty-bag-star"),
            te_matches(&[], &te) && te_matches(&[st("a", P1, q(2)), st("b", P1, q(3))], &te),
        );
        push(
            "triple",
            "Star",
            false,
            "an element no iteration can absorb breaks the repetition",
            None,
            !te_matches(&[st("a", P2, q(3))], &te),
        );
    }

    {
        let te = TripleExpr::tc(P1, value_set(&[q(5)]));
        push(
            "triple",
            "TripleConstraint",
            true,
            "a singleton with the right predicate and value matches",
            None,
            te_matches(&[st("a", P1, q(5))], &te),
        );
        push(
            "triple",
            "TripleConstraint",
            false,
            "a singleton with a different predicate does not",
            None,
            !te_matches(&[st("a", P2, q(5))], &te),
        );
    }

    // ---- qualifier-specifier rules (explicit qualifier sets) --------

    let qs_matches = |quals: &[Qualifier], qs: &QualifierSpec| v.matches_qs(&g, quals, qs).unwrap();
    let t = || a_time("+1980-01-01T00:00:00Z");

    {
        let qs = QualifierSpec::open(PropertySpec::prop(START, time_cond()));
        push(
            "qualifier",
            "OpenQs",
            true,
            "pairs with unmentioned properties are filtered out before matching",
            Some("openqs-filtering"),
            qs_matches(&[qual(START, t()), qual(UNRELATED, q(1))], &qs),
        );
        push(
            "qualifier",
            "OpenQs",
            false,
            "a mentioned property with a non-conforming value still fails",
            None,
            !qs_matches(&[qual(START, q(1))], &qs),
        );
    }

    {
        let qs = QualifierSpec::closed(PropertySpec::prop(START, time_cond()));
        push(
            "qualifier",
            "CloseQs",
            true,
            "the exact qualifier set the specifier describes matches",
            None,
            qs_matches(&[qual(START, t())], &qs),
        );
        push(
            "qualifier",
            "CloseQs",
            false,
            "an extraneous pair is not filtered out and breaks the match",
            Some("closeqs-nonfiltering"),
            !qs_matches(&[qual(START, t()), qual(UNRELATED, q(1))], &qs),
        );
    }

    {
        // The literal conjunction reading: both operands against the
        // whole set, with no partitioning.
        let literal = bare(true);
        let lit_matches =
            |quals: &[Qualifier], qs: &QualifierSpec| literal.matches_qs(&g, quals, qs).unwrap();
        let same_twice = QualifierSpec::closed(PropertySpec::each_of(
            PropertySpec::prop(START, time_cond()),
            PropertySpec::prop(START, time_cond()),
        ));
        let start_and_end = QualifierSpec::closed(PropertySpec::each_of(
            PropertySpec::prop(START, time_cond()),
            PropertySpec::prop(END, time_cond()),
        ));
        push(
            "qualifier",
            "EachOfQs",
            true,
            "a set both operands accept in full satisfies the literal conjunction",
            None,
            lit_matches(&[qual(START, t())], &same_twice),
        );
        push(
            "qualifier",
            "EachOfQs",
            false,
            "{start, end} is unsatisfiable against eachOfQs(start, end) read literally, \
             though the partitioning default accepts it",
            Some("literal-eachofqs"),
            !lit_matches(&[qual(START, t()), qual(END, t())], &start_and_end)
                && qs_matches(&[qual(START, t()), qual(END, t())], &start_and_end),
        );
    }

    {
        let qs = QualifierSpec::closed(PropertySpec::one_of(
            PropertySpec::prop(START, time_cond()),
            PropertySpec::prop(END, time_cond()),
        ));
        push(
            "qualifier",
            "OneOfQs",
            true,
            "either alternative alone matches the whole set",
            None,
            qs_matches(&[qual(START, t())], &qs) && qs_matches(&[qual(END, t())], &qs),
        );
        push(
            "qualifier",
            "OneOfQs",
            false,
            "a set matching neither single alternative does not",
            None,
            !qs_matches(&[qual(START, t()), qual(END, t())], &qs),
        );
    }

    {
        let qs = QualifierSpec::closed(PropertySpec::star(PropertySpec::prop(START, time_cond())));
        push(
            "qualifier",
            "StarQs",
            true,
            "zero and several matching pairs both satisfy the repetition",
            None,
            qs_matches(&[], &qs)
                && qs_matches(
                    &[qual(START, t()), qual(START, a_time("+1990-01-01T00:00:00Z"))],
                    &qs,
                ),
        );
        push(
            "qualifier",
            "StarQs",
            false,
            "a pair no iteration can absorb breaks the repetition",
            None,
            !qs_matches(&[qual(END, t())], &qs),
        );
    }

    {
        let qs = QualifierSpec::closed(PropertySpec::EmptyQs);
        push(
            "qualifier",
            "EmptyQs",
            true,
            "the empty qualifier set matches the empty specifier",
            Some("empty-set-emptyqs"),
            qs_matches(&[], &qs),
        );
        push(
            "qualifier",
            "EmptyQs",
            false,
            "any qualifier at all does not",
            None,
            !qs_matches(&[qual(START, t())], &qs),
        );
    }

    {
        // The qualifier value must conform to the referenced shape —
        // the rule delegates to node conformance.
        let mut schema = Schema::new();
        schema.define(label("Country"), ShapeExpr::shape(TripleExpr::tc(P1, any())));
        let v = Validator::new(&schema, ValidatorOptions::default()).unwrap();
        let mut g = WikibaseGraph::new();
        g.add_statement(Statement::new("Q145$a", EntityId::item(145), P1, q(2)).unwrap()).unwrap();
        g.add_statement(Statement::new("Q99$a", EntityId::item(99), P2, q(3)).unwrap()).unwrap();
        let qs = QualifierSpec::closed(PropertySpec::prop(COUNTRY, ShapeExpr::Ref(label("Country"))));
        push(
            "qualifier",
            "PropertyQs",
            true,
            "a pair whose value conforms to the referenced shape matches",
            None,
            v.matches_qs(&g, &[qual(COUNTRY, q(145))], &qs).unwrap(),
        );
        push(
            "qualifier",
            "PropertyQs",
            false,
            "a pair whose value does not conform does not",
            None,
            !v.matches_qs(&g, &[qual(COUNTRY, q(99))], &qs).unwrap(),
        );
    }

    out
}
