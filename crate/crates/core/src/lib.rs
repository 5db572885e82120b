//! Raabe's test for series given by a general term.

pub mod classify;
pub mod cli;
pub mod expr;
pub mod float;
pub mod hyperratio;
pub mod numeric;
pub mod oracle;
pub mod poly;
pub mod rules;
