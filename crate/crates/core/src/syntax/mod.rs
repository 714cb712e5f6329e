//! Abstract syntax for F, T and the combined language, with binding-aware
//! equality, substitution and printing.

mod pretty;
mod subst;
mod terms;
mod types;

pub use pretty::*;
pub use subst::*;
pub use terms::*;
pub use types::*;
