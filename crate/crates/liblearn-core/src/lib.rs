//! Core engine for library learning over a typed lambda calculus: terms,
//! types and inference, evaluation, weighted-grammar enumeration, corpus
//! compression, and brute-force oracles for checking both searches.

pub mod compress;
pub mod domains;
pub mod enumerate;
pub mod eval;
pub mod expr;
pub mod infer;
pub mod library;
pub mod oracle;
pub mod task;
#[cfg(test)]
pub(crate) mod testutil;
pub mod ty;
pub mod value;

pub use expr::Expr;
pub use library::Library;
pub use ty::Ty;
