//! Scaling and translation symmetries of parametric rational ODE systems,
//! their invariants, and the reduced systems they induce.

pub mod expr;
pub mod linalg;
pub mod num;
pub mod lattice;
pub mod odesys;
pub mod series;
pub mod symfind;
pub mod invar;
pub mod reduce;
