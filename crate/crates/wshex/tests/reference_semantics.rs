//! Pins the reference checker to hand-derived verdicts on the worked
//! example graph, so the production engine has an independently
//! validated baseline to agree with.

mod common;

use common::{reference_conforms, reference_typing};
use wshex::ast::ShapeLabel;
use wshex::model::fixture::*;
use wshex::model::{load_fixture_graph, EntityId, Value, WikibaseGraph};
use wshex::parser::parse_schema;

const STRICT: &str = include_str!("fixtures/fixture_31.wshex");
const LENIENT: &str = include_str!("fixtures/fixture_31_lenient.wshex");
const OPTIONAL: &str = include_str!("fixtures/fixture_31_optional.wshex");

fn conforms(schema_text: &str, pedantic: bool, node: EntityId, label: &str) -> bool {
    let schema = parse_schema(schema_text).expect("fixture schema parses");
    reference_conforms(&load_fixture_graph(), &schema, pedantic, node, &ShapeLabel::new(label))
}

/// The strict person schema: birth date, birth place, fully-dated
/// employers, awards with dated, co-awarded-person qualifiers.
#[test]
fn strict_schema_verdicts() {
    // Hand-derived, in order:
    //  - the empty open shape accepts any node;
    //  - London's country statement satisfies Place;
    //  - the prize's country statement satisfies Award;
    //  - NewHaven has no statements at all, so the required country
    //    constraint has nothing to match;
    //  - the second researcher has no birth date (and an invalid birth
    //    place), so Person fails;
    //  - the first researcher fails Person only through the award's
    //    companion qualifier: it names the second researcher, who is not
    //    a Person.
    let cases = [
        (UK, "Country", true),
        (SPAIN, "Country", true),
        (LONDON, "Place", true),
        (CERN, "Organization", true),
        (PA, "Award", true),
        (NEW_HAVEN, "Place", false),
        (VINT_CERF, "Person", false),
        (TIM_BL, "Person", false),
    ];
    for (node, label, expected) in cases {
        assert_eq!(
            conforms(STRICT, false, node, label),
            expected,
            "{node} @ {label} should be {expected}"
        );
    }
}

/// Dropping the companion qualifier from the award constraint lets the
/// open qualifier specifier filter that pair out, and the first
/// researcher conforms.
#[test]
fn lenient_schema_verdicts() {
    assert!(conforms(LENIENT, false, TIM_BL, "Person"));
    assert!(!conforms(LENIENT, false, VINT_CERF, "Person"), "still no birth date");
}

/// Making birth date, the companion qualifier and the place's country
/// optional resolves the whole reference chain: the second researcher now
/// conforms (statement-less birth place included), and through him the
/// first.
#[test]
fn optional_schema_verdicts() {
    assert!(conforms(OPTIONAL, false, NEW_HAVEN, "Place"));
    assert!(conforms(OPTIONAL, false, VINT_CERF, "Person"));
    assert!(conforms(OPTIONAL, false, TIM_BL, "Person"));
}

/// Under the literal (pedantic) qualifier-conjunction reading, both
/// start and end constraints must match the *same* qualifier set, which
/// a singleton constraint never does on a two-element set — so the
/// employer statements break the otherwise-passing lenient run.
#[test]
fn pedantic_mode_flips_the_lenient_verdict() {
    assert!(conforms(LENIENT, false, TIM_BL, "Person"));
    assert!(!conforms(LENIENT, true, TIM_BL, "Person"));
    // Nodes whose conformance never touches a qualifier conjunction are
    // unaffected by the mode.
    assert!(conforms(LENIENT, true, LONDON, "Place"));
    assert!(conforms(LENIENT, true, PA, "Award"));
}

/// Data values conform to condition-only shapes through references too:
/// the year timestamps are `<Date>`s, strings are not.
#[test]
fn data_values_type_through_references() {
    let schema = parse_schema(STRICT).unwrap();
    let graph = load_fixture_graph();
    let typing = reference_typing(&graph, &schema, false, &[]);
    let date = ShapeLabel::new("Date");
    assert!(typing.contains(&(year(1955), date.clone())));
    assert!(typing.contains(&(year(2013), date.clone())));
    assert!(!typing.contains(&(Value::EntityRef(LONDON), date)));
}

/// Open empty shapes accept everything; closed empty shapes accept only
/// statement-less nodes.
#[test]
fn open_and_closed_empty_shapes() {
    let schema = parse_schema("<Anything> { }\n<Bare> CLOSED { }").unwrap();
    let graph = load_fixture_graph();
    let anything = ShapeLabel::new("Anything");
    let bare = ShapeLabel::new("Bare");
    assert!(reference_conforms(&graph, &schema, false, TIM_BL, &anything));
    assert!(reference_conforms(&graph, &schema, false, UK, &anything));
    assert!(!reference_conforms(&graph, &schema, false, TIM_BL, &bare));
    assert!(reference_conforms(&graph, &schema, false, UK, &bare));
}

/// A self-referential shape with no grounding constraint is satisfied by
/// the greatest fixed point (coinductive reading): a node linking to
/// itself conforms.
#[test]
fn cyclic_references_resolve_greatest_fixed_point() {
    let schema = parse_schema("<Loop> { :P1 @<Loop> }").unwrap();
    let mut graph = WikibaseGraph::new();
    let q1 = EntityId::item(1);
    graph
        .add_statement(
            wshex::model::Statement::new("Q1$a", q1, EntityId::property(1), q1).unwrap(),
        )
        .unwrap();
    assert!(reference_conforms(&graph, &schema, false, q1, &ShapeLabel::new("Loop")));

    // Break the cycle with a second node that lacks the statement: both
    // fail, because the chain bottoms out.
    let q2 = EntityId::item(2);
    let mut graph2 = WikibaseGraph::new();
    graph2
        .add_statement(
            wshex::model::Statement::new("Q1$a", q1, EntityId::property(1), q2).unwrap(),
        )
        .unwrap();
    assert!(!reference_conforms(&graph2, &schema, false, q1, &ShapeLabel::new("Loop")));
    assert!(!reference_conforms(&graph2, &schema, false, q2, &ShapeLabel::new("Loop")));
}
