//! xtq — a pattern-based functional XML query engine.
//!
//! Queries are query-where-construct statements over structured documents.
//! The engine parses a query, derives the matching term of its extraction
//! pattern, plans a restructuring route from that term to the term of the
//! construct clause, matches the documents, filters the resulting binding by
//! the where clause, replays the route on the binding and instantiates the
//! construct pattern.

pub mod bind;
pub mod error;
pub mod extract;
pub mod filter;
pub mod route;
pub mod sxd;
pub mod syntax;
pub mod term;
pub mod transform;

pub use error::{Error, Result};
