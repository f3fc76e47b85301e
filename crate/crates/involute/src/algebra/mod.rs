//! Exact symbolic layer: variables, polynomials, rational functions,
//! constraint ideals, and the expression parser.

pub mod ideal;
pub mod parse;
pub mod poly;
pub mod ratfunc;
pub mod vars;

pub use ideal::ConstraintIdeal;
pub use parse::{parse_poly, parse_ratfunc, ParseError};
pub use poly::{Monomial, Poly};
pub use ratfunc::RatFunc;
pub use vars::{ExtVar, Var, VarError, VarRegistry};
