//! Exponential-type Weyl symbols and their exact composition calculus.

mod base;
mod coef;
mod symbol;

pub use base::BaseSymbol;
pub use coef::{CoefficientFn, EvalCtx};
pub use symbol::{APSymbol, XiBox};
