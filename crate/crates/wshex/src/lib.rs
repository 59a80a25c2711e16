//! WShEx: a schema language for Wikibase graphs.
//!
//! This crate implements the full toolchain around WShEx, a ShEx-inspired
//! language that describes Wikibase entities directly — including statement
//! qualifiers — instead of going through the RDF reification pattern:
//!
//! - [`model`]: the Wikibase graph data model (entities, data values,
//!   qualified statements).
//! - [`ast`]: the WShEx abstract syntax, cardinality desugaring and
//!   well-formedness checks.
//! - [`parser`]: the compact syntax (`{| ... |}` / `[| ... |]` qualifier
//!   blocks) parser and pretty-printer.
//! - [`validator`]: the conformance engine implementing the shape-,
//!   triple- and qualifier-level inference rules with regular-bag-expression
//!   matching and greatest-fixed-point resolution of shape references.
//! - [`dump`]: streaming ingestion of Wikibase JSON entity-document dumps
//!   and line-at-a-time (local) validation.
//! - [`convert`]: conversion of ShEx entity schemas written against the
//!   wdt:/p:/ps:/pq: reification pattern into WShEx.
//!
//! The `wshex` binary exposes `parse`, `validate` and `convert` subcommands
//! on top of these modules.

pub mod ast;
pub mod convert;
pub mod dump;
pub mod model;
pub mod parser;
pub mod validator;
