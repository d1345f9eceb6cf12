//! Protocolized concrete index notation: the scheduling IR.
//!
//! A program is a list of tensor declarations plus one statement tree built
//! from `forall` loops, `where` temporaries, and assignments. Every tensor
//! access carries a per-mode *protocol* describing how the loop interacts
//! with that mode's storage: reads either `step` (coiterate stored
//! coordinates) or `locate` (random access), writes either `append`
//! (in-order) or `insert` (random order).

mod ast;
mod parse;
mod print;
mod validate;

pub use ast::{
    Access, AssignOp, Expr, LNode, LStmt, LevelFormat, Program, Protocol, Stmt, TensorDecl,
    TensorKind,
};
pub use parse::{parse, ParseError};
pub use validate::{validate, Diagnostic};
