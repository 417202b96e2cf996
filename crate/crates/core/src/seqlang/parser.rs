use super::ast::{Axis, BinOp, Dim, Expr, Param, ParamType, Pattern, Phase, SeqProgram, Statement, Unit};
use super::lexer::{tokenize, Tok, Token};
use super::{ErrorKind, ParseError, Pos};

const RESERVED: &[&str] = &["seq", "pulse", "delay", "repeat", "flip", "inverse", "x", "y", "xy8", "cp"];

/// Programs deeper than this are rejected instead of risking the stack.
const MAX_DEPTH: usize = 64;
/// Operator count limit for a single expression, for the same reason.
const MAX_OPERATORS: usize = 512;

struct Parser {
    toks: Vec<Token>,
    at: usize,
    params: Vec<Param>,
    depth: usize,
    /// Number of enclosing repeats that carry a phase pattern.
    patterns: usize,
    operators: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, pos: Pos, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(ErrorKind::Syntax, pos, msg))
    }

    fn expect(&mut self, want: Tok) -> PResult<Pos> {
        let t = self.peek().clone();
        if t.tok == want {
            self.next();
            Ok(t.pos)
        } else {
            self.syntax(t.pos, format!("expected {}, found {}", want.describe(), t.tok.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.pos)),
            other => self.syntax(t.pos, format!("expected {what}, found {}", other.describe())),
        }
    }

    fn enter(&mut self, pos: Pos) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.syntax(pos, "nesting is too deep");
        }
        Ok(())
    }

    fn count_operator(&mut self, pos: Pos) -> PResult<()> {
        self.operators += 1;
        if self.operators > MAX_OPERATORS {
            return self.syntax(pos, "expression is too long");
        }
        Ok(())
    }

    fn program(&mut self) -> PResult<SeqProgram> {
        let (kw, pos) = self.ident("`seq`")?;
        if kw != "seq" {
            return self.syntax(pos, format!("expected `seq`, found identifier `{kw}`"));
        }
        let (name, _) = self.ident("program name")?;
        self.expect(Tok::LParen)?;
        if self.peek().tok != Tok::RParen {
            loop {
                self.param()?;
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        let end = self.peek().clone();
        if end.tok != Tok::Eof {
            return self.syntax(end.pos, format!("expected end of input, found {}", end.tok.describe()));
        }
        Ok(SeqProgram { name, params: std::mem::take(&mut self.params), body })
    }

    fn param(&mut self) -> PResult<()> {
        let (name, pos) = self.ident("parameter name")?;
        if RESERVED.contains(&name.as_str()) || Unit::parse(&name).is_some() {
            return self.syntax(pos, format!("`{name}` is reserved"));
        }
        if self.params.iter().any(|p| p.name == name) {
            return Err(ParseError::new(ErrorKind::DuplicateParameter, pos, format!("parameter `{name}` is declared twice")));
        }
        self.expect(Tok::Colon)?;
        let (ty, tpos) = self.ident("parameter type")?;
        let ty = match ty.as_str() {
            "time" => ParamType::Time,
            "angle" => ParamType::Angle,
            "count" => ParamType::Count,
            other => return self.syntax(tpos, format!("unknown parameter type `{other}` (time, angle or count)")),
        };
        self.params.push(Param { name, ty });
        Ok(())
    }

    fn block(&mut self) -> PResult<Vec<Statement>> {
        let open = self.expect(Tok::LBrace)?;
        self.enter(open)?;
        let mut body = Vec::new();
        while self.peek().tok != Tok::RBrace {
            if self.peek().tok == Tok::Eof {
                return self.syntax(self.peek().pos, "expected `}`, found end of input");
            }
            body.push(self.statement()?);
        }
        self.next();
        self.depth -= 1;
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Statement> {
        let (kw, pos) = self.ident("a statement")?;
        match kw.as_str() {
            "pulse" => {
                self.expect(Tok::LParen)?;
                let angle = self.typed_expr(Dim::Angle, "pulse angle")?;
                self.expect(Tok::Comma)?;
                let phase = self.phase()?;
                let duration = if self.peek().tok == Tok::Comma {
                    self.next();
                    Some(self.typed_expr(Dim::Time, "pulse duration")?)
                } else {
                    None
                };
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(Statement::Pulse { angle, phase, duration })
            }
            "delay" => {
                self.expect(Tok::LParen)?;
                let e = self.typed_expr(Dim::Time, "delay")?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(Statement::Delay(e))
            }
            "flip" => {
                self.expect(Tok::Semi)?;
                Ok(Statement::Flip)
            }
            "repeat" => {
                self.expect(Tok::LParen)?;
                let count = self.typed_expr(Dim::Scalar, "repeat count")?;
                let pattern = if self.peek().tok == Tok::Comma {
                    self.next();
                    Some(self.pattern()?)
                } else {
                    None
                };
                self.expect(Tok::RParen)?;
                let scoped = usize::from(pattern.is_some());
                self.patterns += scoped;
                let body = self.block()?;
                self.patterns -= scoped;
                Ok(Statement::Repeat { count, pattern, body })
            }
            "inverse" => Ok(Statement::Inverse(self.block()?)),
            other => self.syntax(pos, format!("unknown statement `{other}`")),
        }
    }

    fn axis(&mut self) -> Option<Axis> {
        let here = &self.toks[self.at].tok;
        let neg = *here == Tok::Minus;
        let name_at = if neg { self.at + 1 } else { self.at };
        let axis = match (&self.toks.get(name_at)?.tok, neg) {
            (Tok::Ident(s), false) if s == "x" => Axis::X,
            (Tok::Ident(s), false) if s == "y" => Axis::Y,
            (Tok::Ident(s), true) if s == "x" => Axis::MinusX,
            (Tok::Ident(s), true) if s == "y" => Axis::MinusY,
            _ => return None,
        };
        self.next();
        if neg {
            self.next();
        }
        Some(axis)
    }

    fn phase(&mut self) -> PResult<Phase> {
        if self.peek().tok == Tok::PatternRef {
            let pos = self.next().pos;
            if self.patterns == 0 {
                return Err(ParseError::new(
                    ErrorKind::UnknownIdentifier,
                    pos,
                    "`@pattern` used outside a repeat with a phase pattern",
                ));
            }
            return Ok(Phase::Pattern);
        }
        if let Some(a) = self.axis() {
            return Ok(Phase::Axis(a));
        }
        Ok(Phase::Expr(self.typed_expr(Dim::Angle, "pulse phase")?))
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == "xy8" => Ok(Pattern::Xy8),
            Tok::Ident(s) if s == "cp" => Ok(Pattern::Cp),
            Tok::LBracket => {
                let mut axes = Vec::new();
                while self.peek().tok != Tok::RBracket {
                    let pos = self.peek().pos;
                    match self.axis() {
                        Some(a) => axes.push(a),
                        None => return self.syntax(pos, format!("expected x, y, -x or -y, found {}", self.peek().tok.describe())),
                    }
                }
                let close = self.next().pos;
                if axes.is_empty() {
                    return self.syntax(close, "phase pattern is empty");
                }
                Ok(Pattern::List(axes))
            }
            other => self.syntax(t.pos, format!("expected xy8, cp or `[`, found {}", other.describe())),
        }
    }

    fn typed_expr(&mut self, want: Dim, what: &str) -> PResult<Expr> {
        let pos = self.peek().pos;
        self.operators = 0;
        let (e, dim) = self.expr()?;
        if dim != want {
            return Err(ParseError::new(ErrorKind::UnitMismatch, pos, format!("{what} must be {want}, found {dim}")));
        }
        Ok(e)
    }

    fn expr(&mut self) -> PResult<(Expr, Dim)> {
        let (mut lhs, mut dim) = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok((lhs, dim)),
            };
            let pos = self.next().pos;
            self.count_operator(pos)?;
            let (rhs, rdim) = self.term()?;
            dim = combine(op, dim, rdim, pos)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<(Expr, Dim)> {
        let (mut lhs, mut dim) = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok((lhs, dim)),
            };
            let pos = self.next().pos;
            self.count_operator(pos)?;
            let (rhs, rdim) = self.unary()?;
            dim = combine(op, dim, rdim, pos)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<(Expr, Dim)> {
        if self.peek().tok == Tok::Minus {
            let pos = self.next().pos;
            self.count_operator(pos)?;
            let (e, d) = self.unary()?;
            return Ok((Expr::Neg(Box::new(e)), d));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<(Expr, Dim)> {
        let t = self.next();
        match t.tok {
            Tok::Number { value, unit } => match unit {
                None => Ok((Expr::Number { value, unit: None }, Dim::Scalar)),
                Some(u) => match Unit::parse(&u) {
                    Some(unit) => Ok((Expr::Number { value, unit: Some(unit) }, unit.dim())),
                    None => Err(ParseError::new(ErrorKind::UnknownUnit, t.pos, format!("unknown unit `{u}`"))),
                },
            },
            Tok::Ident(name) => match self.params.iter().find(|p| p.name == name) {
                Some(p) => {
                    let dim = p.ty.dim();
                    Ok((Expr::Ident(name), dim))
                }
                None => Err(ParseError::new(ErrorKind::UnknownIdentifier, t.pos, format!("unknown identifier `{name}`"))),
            },
            Tok::LParen => {
                self.enter(t.pos)?;
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                self.depth -= 1;
                Ok(inner)
            }
            other => self.syntax(t.pos, format!("expected an expression, found {}", other.describe())),
        }
    }
}

fn combine(op: BinOp, a: Dim, b: Dim, pos: Pos) -> PResult<Dim> {
    let out = match op {
        BinOp::Add | BinOp::Sub if a == b => Some(a),
        BinOp::Mul if a == Dim::Scalar => Some(b),
        BinOp::Mul if b == Dim::Scalar => Some(a),
        BinOp::Div if b == Dim::Scalar => Some(a),
        BinOp::Div if a == b => Some(Dim::Scalar),
        _ => None,
    };
    out.ok_or_else(|| ParseError::new(ErrorKind::UnitMismatch, pos, format!("cannot combine {a} and {b} here")))
}

pub fn parse(text: &str) -> Result<SeqProgram, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0, params: Vec::new(), depth: 0, patterns: 0, operators: 0 };
    p.program()
}
