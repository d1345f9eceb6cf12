//! Text-to-AST parser.
//!
//! The concrete syntax, one declaration per line and a single root statement
//! (`#` starts a comment):
//!
//! ```text
//! decl   := "tensor" NAME "{" [DIM ("," DIM)*] "}" "format" "(" [FMT ("," FMT)*] ")"
//!           ["order" "(" INT ("," INT)* ")"]
//! stmt   := "forall" VAR ("," VAR)* ":" stmt
//!         | "(" stmt ")" "where" "(" stmt ")"
//!         | access ("=" | "+=") expr
//! access := NAME "[" idx ("," idx)* "]" | NAME          (bare name: rank 0)
//! idx    := [PROTO] VAR ;  PROTO := "s" | "l" | "a" | "i"  (omitted: unspecified)
//! expr   := term ("+" term)* ; term := factor ("*" factor)*
//! factor := access | NUMBER | "(" expr ")"
//! ```
//!
//! `order` lists, 1-based, the logical mode stored at each level. Tensors
//! must be declared before the statement uses them; empty `{}`/`()` declare a
//! rank-0 scalar.

use std::fmt;

use super::ast::{
    Access, AssignOp, Expr, LevelFormat, Program, Protocol, Stmt, TensorDecl, TensorKind,
};

/// Syntax or reference error with source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Star,
    Plus,
    Eq,
    PlusEq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "`{n}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::PlusEq => write!(f, "`+=`"),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let mut chars = line.char_indices().peekable();
        while let Some(&(i, c)) = chars.peek() {
            let col = i + 1;
            let err = |message: String| ParseError {
                line: line_no,
                col,
                message,
            };
            match c {
                '#' => break,
                c if c.is_whitespace() => {
                    chars.next();
                }
                c if c.is_ascii_alphabetic() || c == '_' || c == '%' => {
                    let mut ident = String::new();
                    while let Some(&(_, c)) = chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' || c == '%' {
                            ident.push(c);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    out.push(Lexed {
                        tok: Tok::Ident(ident),
                        line: line_no,
                        col,
                    });
                }
                c if c.is_ascii_digit() => {
                    let mut num = String::new();
                    while let Some(&(_, c)) = chars.peek() {
                        if c.is_ascii_digit() {
                            num.push(c);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    let value = num
                        .parse::<i64>()
                        .map_err(|_| err(format!("number out of range: {num}")))?;
                    out.push(Lexed {
                        tok: Tok::Number(value),
                        line: line_no,
                        col,
                    });
                }
                '+' => {
                    chars.next();
                    let tok = if let Some(&(_, '=')) = chars.peek() {
                        chars.next();
                        Tok::PlusEq
                    } else {
                        Tok::Plus
                    };
                    out.push(Lexed {
                        tok,
                        line: line_no,
                        col,
                    });
                }
                _ => {
                    let tok = match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        ',' => Tok::Comma,
                        ':' => Tok::Colon,
                        '*' => Tok::Star,
                        '=' => Tok::Eq,
                        other => return Err(err(format!("unexpected character `{other}`"))),
                    };
                    chars.next();
                    out.push(Lexed {
                        tok,
                        line: line_no,
                        col,
                    });
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Lexed>,
    pos: usize,
    decls: Vec<TensorDecl>,
}

/// Parse a complete program; the printed form of the result re-parses to a
/// structurally identical program.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        decls: Vec::new(),
    };
    let mut root: Option<Stmt> = None;
    while !p.at_end() {
        if root.is_some() {
            return Err(p.error_here("expected end of input after the root statement"));
        }
        if p.peek_ident() == Some("tensor") {
            let decl = p.parse_decl()?;
            if p.decls.iter().any(|d| d.name == decl.name) {
                return Err(p.error_here(&format!("tensor `{}` declared twice", decl.name)));
            }
            p.decls.push(decl);
        } else {
            root = Some(p.parse_stmt()?);
        }
    }
    let Some(root) = root else {
        return Err(ParseError {
            line: text.lines().count().max(1),
            col: 1,
            message: "missing root statement".to_string(),
        });
    };
    let mut program = Program {
        decls: p.decls,
        root,
    };
    program.infer_kinds();
    Ok(program)
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|l| &l.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.tokens.get(self.pos + 1).map(|l| &l.tok)
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    fn here(&self) -> (usize, usize) {
        match self.tokens.get(self.pos.min(self.tokens.len().saturating_sub(1))) {
            Some(l) => (l.line, l.col),
            None => (1, 1),
        }
    }

    fn error_here(&self, message: &str) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            message: message.to_string(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&Lexed, ParseError> {
        let lexed = self.tokens.get(self.pos).ok_or_else(|| {
            let (line, col) = self
                .tokens
                .last()
                .map(|l| (l.line, l.col))
                .unwrap_or((1, 1));
            ParseError {
                line,
                col,
                message: format!("unexpected end of input, expected {what}"),
            }
        })?;
        self.pos += 1;
        Ok(lexed)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let found = self.next(&format!("{tok}"))?;
        if found.tok == tok {
            Ok(())
        } else {
            Err(ParseError {
                line: found.line,
                col: found.col,
                message: format!("expected {tok}, found {}", found.tok),
            })
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        let found = self.next(what)?;
        match &found.tok {
            Tok::Ident(s) => Ok(s.clone()),
            other => Err(ParseError {
                line: found.line,
                col: found.col,
                message: format!("expected {what}, found {other}"),
            }),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_decl(&mut self) -> Result<TensorDecl, ParseError> {
        self.expect(Tok::Ident("tensor".to_string()))?;
        let name = self.expect_ident("tensor name")?;
        self.expect(Tok::LBrace)?;
        let mut dims = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                dims.push(self.expect_ident("dimension name")?);
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        self.expect(Tok::Ident("format".to_string()))?;
        self.expect(Tok::LParen)?;
        let mut formats = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let word = self.expect_ident("level format (u, c, or h)")?;
                let mut letters = word.chars();
                let fmt = letters
                    .next()
                    .and_then(LevelFormat::from_letter)
                    .filter(|_| letters.next().is_none())
                    .ok_or_else(|| self.error_here(&format!("unknown level format `{word}`")))?;
                formats.push(fmt);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        if formats.len() != dims.len() {
            return Err(self.error_here(&format!(
                "tensor `{name}`: {} dimensions but {} level formats",
                dims.len(),
                formats.len()
            )));
        }
        let mode_order = if self.peek_ident() == Some("order") {
            self.pos += 1;
            self.expect(Tok::LParen)?;
            let mut order = Vec::new();
            loop {
                let found = self.next("mode number")?;
                let (line, col) = (found.line, found.col);
                match found.tok {
                    Tok::Number(n) if n >= 1 && (n as usize) <= dims.len() => {
                        order.push(n as usize - 1);
                    }
                    ref other => {
                        return Err(ParseError {
                            line,
                            col,
                            message: format!(
                                "expected a mode number between 1 and {}, found {other}",
                                dims.len()
                            ),
                        })
                    }
                }
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
            let mut seen = vec![false; dims.len()];
            for &m in &order {
                if seen[m] {
                    return Err(self.error_here(&format!(
                        "tensor `{name}`: order repeats mode {}",
                        m + 1
                    )));
                }
                seen[m] = true;
            }
            if order.len() != dims.len() {
                return Err(
                    self.error_here(&format!("tensor `{name}`: order must list every mode"))
                );
            }
            order
        } else {
            (0..dims.len()).collect()
        };
        Ok(TensorDecl {
            name,
            dims,
            formats,
            mode_order,
            kind: TensorKind::Input,
        })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.peek_ident() == Some("forall") {
            self.pos += 1;
            let mut vars = Vec::new();
            loop {
                let var = self.expect_ident("index variable")?;
                if vars.contains(&var) {
                    return Err(self.error_here(&format!("duplicate binding of `{var}`")));
                }
                vars.push(var);
                if self.eat(&Tok::Colon) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
            let mut stmt = self.parse_stmt()?;
            for var in vars.into_iter().rev() {
                stmt = Stmt::Forall {
                    var,
                    body: Box::new(stmt),
                };
            }
            Ok(stmt)
        } else if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let consumer = self.parse_stmt()?;
            self.expect(Tok::RParen)?;
            let kw = self.expect_ident("`where`")?;
            if kw != "where" {
                return Err(self.error_here(&format!("expected `where`, found `{kw}`")));
            }
            self.expect(Tok::LParen)?;
            let producer = self.parse_stmt()?;
            self.expect(Tok::RParen)?;
            Ok(Stmt::Where {
                consumer: Box::new(consumer),
                producer: Box::new(producer),
            })
        } else {
            let lhs = self.parse_access(true)?;
            let found = self.next("`=` or `+=`")?;
            let op = match found.tok {
                Tok::Eq => AssignOp::Overwrite,
                Tok::PlusEq => AssignOp::IncrementAdd,
                ref other => {
                    return Err(ParseError {
                        line: found.line,
                        col: found.col,
                        message: format!("expected `=` or `+=`, found {other}"),
                    })
                }
            };
            let rhs = self.parse_expr()?;
            Ok(Stmt::Assign { lhs, op, rhs })
        }
    }

    fn parse_access(&mut self, write: bool) -> Result<Access, ParseError> {
        let tensor = self.expect_ident("tensor name")?;
        let decl_rank = match self.decls.iter().find(|d| d.name == tensor) {
            Some(d) => d.rank(),
            None => return Err(self.error_here(&format!("unknown tensor `{tensor}`"))),
        };
        let mut indices = Vec::new();
        if self.eat(&Tok::LBracket) {
            loop {
                indices.push(self.parse_idx(write)?);
                if self.eat(&Tok::RBracket) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        if indices.len() != decl_rank {
            return Err(self.error_here(&format!(
                "tensor `{tensor}` has rank {decl_rank} but is accessed with {} indices",
                indices.len()
            )));
        }
        Ok(Access { tensor, indices })
    }

    fn parse_idx(&mut self, write: bool) -> Result<(String, Protocol), ParseError> {
        // A protocol letter is recognized only when another identifier
        // follows, so `B[s]` reads the variable `s` while `B[s i]` steps `i`.
        let protocol = match (self.peek(), self.peek2()) {
            (Some(Tok::Ident(first)), Some(Tok::Ident(_))) if first.len() == 1 => {
                first.chars().next().and_then(Protocol::from_letter)
            }
            _ => None,
        };
        let protocol = match protocol {
            Some(p) => {
                self.pos += 1;
                let (line, col) = self.here();
                let position_error = |kind: &str| ParseError {
                    line,
                    col,
                    message: format!(
                        "{kind} protocol on a {}",
                        if write { "write" } else { "read" }
                    ),
                };
                if write && !p.is_write() {
                    let kind = if p == Protocol::Step { "step" } else { "locate" };
                    return Err(position_error(kind));
                }
                if !write && !p.is_read() {
                    let kind = if p == Protocol::Append {
                        "append"
                    } else {
                        "insert"
                    };
                    return Err(position_error(kind));
                }
                p
            }
            None => Protocol::Unspecified,
        };
        let var = self.expect_ident("index variable")?;
        Ok((var, protocol))
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.parse_term()?];
        while self.eat(&Tok::Plus) {
            terms.push(self.parse_term()?);
        }
        Ok(fold_right(terms, Expr::Add))
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.parse_factor()?];
        while self.eat(&Tok::Star) {
            factors.push(self.parse_factor()?);
        }
        Ok(fold_right(factors, Expr::Mul))
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Number(_)) => {
                let found = self.next("number")?;
                match found.tok {
                    Tok::Number(n) => Ok(Expr::Literal(n)),
                    _ => unreachable!(),
                }
            }
            _ => Ok(Expr::Access(self.parse_access(false)?)),
        }
    }
}

fn fold_right(mut items: Vec<Expr>, op: fn(Box<Expr>, Box<Expr>) -> Expr) -> Expr {
    let mut acc = items.pop().expect("at least one operand");
    while let Some(item) = items.pop() {
        acc = op(Box::new(item), Box::new(acc));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::super::ast::*;
    use super::*;

    #[test]
    fn smallest_program() {
        let p = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] += b[s i]\n",
        )
        .unwrap();
        assert_eq!(p.decls.len(), 2);
        let Stmt::Forall { var, body } = &p.root else {
            panic!("expected forall root");
        };
        assert_eq!(var, "i");
        let Stmt::Assign { lhs, op, rhs } = body.as_ref() else {
            panic!("expected assignment body");
        };
        assert_eq!(lhs.tensor, "a");
        assert_eq!(lhs.indices, vec![("i".to_string(), Protocol::Append)]);
        assert_eq!(*op, AssignOp::IncrementAdd);
        assert_eq!(
            *rhs,
            Expr::Access(Access {
                tensor: "b".to_string(),
                indices: vec![("i".to_string(), Protocol::Step)],
            })
        );
        assert_eq!(p.decl("a").unwrap().kind, TensorKind::Output);
        assert_eq!(p.decl("b").unwrap().kind, TensorKind::Input);
    }

    #[test]
    fn row_major_workspace_product() {
        // The `i` in `w[i j]` is the insert protocol, not an index variable.
        let p = parse(
            "tensor A {I, J} format (c, c)\n\
             tensor B {I, K} format (c, c)\n\
             tensor C {K, J} format (c, c)\n\
             tensor w {J} format (h)\n\
             forall i: (forall j: A[a i, a j] = w[s j]) where (forall k, j: w[i j] += B[s i, s k] * C[s k, s j])\n",
        )
        .unwrap();
        let Stmt::Forall { var, body } = &p.root else {
            panic!("expected forall root");
        };
        assert_eq!(var, "i");
        let Stmt::Where { consumer, producer } = body.as_ref() else {
            panic!("expected where under the forall");
        };
        assert!(matches!(consumer.as_ref(), Stmt::Forall { var, .. } if var == "j"));
        // `forall k, j:` desugars into two nested loops.
        let Stmt::Forall { var: k, body: inner } = producer.as_ref() else {
            panic!("expected forall producer");
        };
        assert_eq!(k, "k");
        let Stmt::Forall { var: j, body: assign } = inner.as_ref() else {
            panic!("expected nested loop");
        };
        assert_eq!(j, "j");
        let Stmt::Assign { lhs, .. } = assign.as_ref() else {
            panic!("expected assignment");
        };
        assert_eq!(lhs.indices, vec![("j".to_string(), Protocol::Insert)]);
        assert_eq!(p.decl("w").unwrap().kind, TensorKind::Workspace);
        assert_eq!(p.decl("A").unwrap().kind, TensorKind::Output);
    }

    #[test]
    fn append_read_rejected() {
        let err = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] += b[a i]\n",
        )
        .unwrap_err();
        assert!(err.message.contains("append protocol on a read"), "{err}");
    }

    #[test]
    fn step_write_rejected() {
        let err = parse(
            "tensor a {I} format (c)\n\
             tensor b {I} format (c)\n\
             forall i: a[s i] += b[s i]\n",
        )
        .unwrap_err();
        assert!(err.message.contains("step protocol on a write"), "{err}");
    }

    #[test]
    fn mode_order_round_trips() {
        let text = "tensor Bt {K, I} format (c, c) order (2, 1)\n\
                    tensor a {K} format (u)\n\
                    forall k, i: a[a k] += Bt[s k, s i]\n";
        let p = parse(text).unwrap();
        assert_eq!(p.decl("Bt").unwrap().mode_order, vec![1, 0]);
        assert_eq!(p.to_string(), text);
    }

    #[test]
    fn rank_zero_scalar() {
        let p = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             tensor w {} format ()\n\
             forall i: (a[a i] += w) where (w += b[l i])\n",
        )
        .unwrap();
        assert_eq!(p.decl("w").unwrap().rank(), 0);
        assert_eq!(p.decl("w").unwrap().kind, TensorKind::Workspace);
    }

    #[test]
    fn duplicate_binding_in_group() {
        let err = parse(
            "tensor a {I} format (u)\n\
             forall i, i: a[a i] += 1\n",
        )
        .unwrap_err();
        assert!(err.message.contains("duplicate binding"), "{err}");
    }

    #[test]
    fn unknown_tensor_and_arity() {
        let err = parse("forall i: a[a i] += 1\n").unwrap_err();
        assert!(err.message.contains("unknown tensor"), "{err}");
        let err = parse(
            "tensor a {I, J} format (u, u)\n\
             forall i: a[a i] += 1\n",
        )
        .unwrap_err();
        assert!(err.message.contains("rank 2"), "{err}");
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse("tensor a {I} format (u)\nforall : a[i] += 1\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.col > 1);
    }

    #[test]
    fn expression_precedence_and_associativity() {
        let p = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             tensor c {I} format (u)\n\
             tensor d {I} format (u)\n\
             forall i: a[a i] += b[l i] * (c[l i] + d[l i]) * 2\n",
        )
        .unwrap();
        let Stmt::Forall { body, .. } = &p.root else {
            panic!();
        };
        let Stmt::Assign { rhs, .. } = body.as_ref() else {
            panic!();
        };
        // b * ((c + d) * 2), right-associated.
        let Expr::Mul(l, r) = rhs else { panic!() };
        assert!(matches!(l.as_ref(), Expr::Access(a) if a.tensor == "b"));
        let Expr::Mul(l, r) = r.as_ref() else {
            panic!()
        };
        assert!(matches!(l.as_ref(), Expr::Add(_, _)));
        assert!(matches!(r.as_ref(), Expr::Literal(2)));
    }

    #[test]
    fn print_parse_round_trip() {
        let texts = [
            "tensor a {I} format (u)\ntensor b {I} format (c)\nforall i: a[a i] += b[s i]\n",
            "tensor A {I, J} format (c, c)\ntensor B {I, K} format (c, c)\ntensor Ct {J, K} format (c, c)\nforall i, j, k: A[a i, a j] += B[s i, s k] * Ct[s j, s k]\n",
            "tensor A {I, J} format (c, c)\ntensor B {I, K} format (c, c)\ntensor C {K, J} format (c, c)\ntensor w {J} format (h)\nforall i: (forall j: A[a i, a j] = w[s j]) where (forall k, j: w[i j] += B[s i, s k] * C[s k, s j])\n",
        ];
        for text in texts {
            let p = parse(text).unwrap();
            let printed = p.to_string();
            assert_eq!(printed, text);
            let reparsed = parse(&printed).unwrap();
            assert_eq!(reparsed, p);
        }
    }
}
