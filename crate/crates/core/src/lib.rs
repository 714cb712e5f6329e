//! A stack-based typed assembly language (T), a functional language (F), and
//! their multi-language combination: syntax, parsing, type checking, an
//! abstract machine with boundary translation, and an equivalence harness.

pub mod parser;
pub mod syntax;
pub mod boundary;
pub mod machine;
pub mod typeck;
pub mod harness;
pub mod corpus;
