//! Independent reference computations and synthetic panels used to check
//! the `varcast` library end to end.
//!
//! Nothing here calls into the library's estimators; the oracles are
//! written from the defining formulas so that agreement means something.

pub mod fixtures;
pub mod oracle;
