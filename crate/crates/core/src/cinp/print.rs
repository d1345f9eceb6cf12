//! Canonical pretty-printer. Printing then parsing yields a structurally
//! identical program: loop chains re-merge into `forall i, j:` sugar and
//! parentheses are emitted exactly where the right-associated expression
//! tree requires them.

use std::fmt::{self, Write as _};

use super::ast::{Access, AssignOp, Expr, LevelFormat, Program, Stmt, TensorDecl};

impl fmt::Display for TensorDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tensor {} {{", self.name)?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "}} format (")?;
        for (i, fmt_) in self.formats.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", fmt_.letter())?;
        }
        write!(f, ")")?;
        if !self.has_identity_order() {
            write!(f, " order (")?;
            for (i, m) in self.mode_order.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", m + 1)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tensor)?;
        if self.indices.is_empty() {
            return Ok(());
        }
        write!(f, "[")?;
        for (i, (var, proto)) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if let Some(letter) = proto.letter() {
                write!(f, "{letter} ")?;
            }
            write!(f, "{var}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, false, false)
    }
}

/// `under_mul` parenthesizes additions; `is_left` parenthesizes a same-
/// precedence operator on the left so right-association round-trips.
fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, under_mul: bool, is_left: bool) -> fmt::Result {
    match e {
        Expr::Access(a) => write!(f, "{a}"),
        Expr::Literal(v) => write!(f, "{v}"),
        Expr::Add(l, r) => {
            let parens = under_mul || is_left;
            if parens {
                write!(f, "(")?;
            }
            write_expr(l, f, false, true)?;
            write!(f, " + ")?;
            write_expr(r, f, false, false)?;
            if parens {
                write!(f, ")")?;
            }
            Ok(())
        }
        Expr::Mul(l, r) => {
            let parens = is_left && under_mul;
            if parens {
                write!(f, "(")?;
            }
            write_expr(l, f, true, true)?;
            write!(f, " * ")?;
            write_expr(r, f, true, false)?;
            if parens {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Forall { var, body } => {
                write!(f, "forall {var}")?;
                let mut body = body;
                while let Stmt::Forall { var, body: inner } = body.as_ref() {
                    write!(f, ", {var}")?;
                    body = inner;
                }
                write!(f, ": {body}")
            }
            Stmt::Where { consumer, producer } => {
                write!(f, "({consumer}) where ({producer})")
            }
            Stmt::Assign { lhs, op, rhs } => {
                let op = match op {
                    AssignOp::Overwrite => "=",
                    AssignOp::IncrementAdd => "+=",
                };
                write!(f, "{lhs} {op} {rhs}")
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{d}")?;
        }
        writeln!(f, "{}", self.root)
    }
}

impl fmt::Display for LevelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char(self.letter())
    }
}
