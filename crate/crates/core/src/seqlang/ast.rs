use std::f64::consts::PI;
use std::fmt::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamType {
    Time,
    Angle,
    Count,
}

impl ParamType {
    pub fn keyword(&self) -> &'static str {
        match self {
            Self::Time => "time",
            Self::Angle => "angle",
            Self::Count => "count",
        }
    }

    pub(crate) fn dim(&self) -> Dim {
        match self {
            Self::Time => Dim::Time,
            Self::Angle => Dim::Angle,
            Self::Count => Dim::Scalar,
        }
    }
}

/// Physical dimension of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Time,
    Angle,
    Scalar,
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Time => "time",
            Self::Angle => "angle",
            Self::Scalar => "dimensionless",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    S,
    Ms,
    Us,
    Ns,
    Ps,
    Deg,
    Rad,
}

impl Unit {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "s" => Self::S,
            "ms" => Self::Ms,
            "us" => Self::Us,
            "ns" => Self::Ns,
            "ps" => Self::Ps,
            "deg" => Self::Deg,
            "rad" => Self::Rad,
            _ => return None,
        })
    }

    pub fn suffix(&self) -> &'static str {
        match self {
            Self::S => "s",
            Self::Ms => "ms",
            Self::Us => "us",
            Self::Ns => "ns",
            Self::Ps => "ps",
            Self::Deg => "deg",
            Self::Rad => "rad",
        }
    }

    /// Factor to seconds or radians.
    pub fn scale(&self) -> f64 {
        match self {
            Self::S => 1.0,
            Self::Ms => 1e-3,
            Self::Us => 1e-6,
            Self::Ns => 1e-9,
            Self::Ps => 1e-12,
            Self::Deg => PI / 180.0,
            Self::Rad => 1.0,
        }
    }

    pub fn dim(&self) -> Dim {
        match self {
            Self::Deg | Self::Rad => Dim::Angle,
            _ => Dim::Time,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(&self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Self::Add | Self::Sub => 1,
            Self::Mul | Self::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Non-negative literal as written, with its unit.
    Number { value: f64, unit: Option<Unit> },
    Ident(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn number(value: f64, unit: Option<Unit>) -> Self {
        if value < 0.0 {
            Expr::Neg(Box::new(Expr::Number { value: -value, unit }))
        } else {
            Expr::Number { value, unit }
        }
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    MinusX,
    MinusY,
}

impl Axis {
    pub fn phase(&self) -> f64 {
        match self {
            Self::X => 0.0,
            Self::Y => 0.5 * PI,
            Self::MinusX => PI,
            Self::MinusY => 1.5 * PI,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::X => "x",
            Self::Y => "y",
            Self::MinusX => "-x",
            Self::MinusY => "-y",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Phase {
    Axis(Axis),
    /// Next entry of the innermost enclosing repeat's pattern.
    Pattern,
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    Xy8,
    Cp,
    List(Vec<Axis>),
}

impl Pattern {
    pub fn axes(&self) -> Vec<Axis> {
        use Axis::*;
        match self {
            Self::Xy8 => vec![X, Y, X, Y, Y, X, Y, X],
            Self::Cp => vec![X],
            Self::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Pulse { angle: Expr, phase: Phase, duration: Option<Expr> },
    Delay(Expr),
    Repeat { count: Expr, pattern: Option<Pattern>, body: Vec<Statement> },
    /// Instantaneous electron π about x within a free-evolution period.
    Flip,
    /// Time-reversed propagator of the enclosed block.
    Inverse(Vec<Statement>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: ParamType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeqProgram {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Statement>,
}

fn write_expr(out: &mut String, e: &Expr, parent: u8, right_child: bool) {
    match e {
        Expr::Number { value, unit } => {
            let _ = write!(out, "{value}");
            if let Some(u) = unit {
                out.push_str(u.suffix());
            }
        }
        Expr::Ident(name) => out.push_str(name),
        Expr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, 3, false);
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            // Operators are left-associative, so an equal-precedence right operand
            // needs parentheses to keep its grouping.
            let paren = p < parent || (p == parent && right_child);
            if paren {
                out.push('(');
            }
            write_expr(out, a, p, false);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p, true);
            if paren {
                out.push(')');
            }
        }
    }
}

pub(crate) fn expr_text(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0, false);
    s
}

fn write_block(out: &mut String, body: &[Statement], depth: usize) {
    out.push_str("{\n");
    for st in body {
        write_statement(out, st, depth + 1);
    }
    out.push_str(&"    ".repeat(depth));
    out.push('}');
}

fn write_statement(out: &mut String, st: &Statement, depth: usize) {
    out.push_str(&"    ".repeat(depth));
    match st {
        Statement::Pulse { angle, phase, duration } => {
            let phase = match phase {
                Phase::Axis(a) => a.name().to_string(),
                Phase::Pattern => "@pattern".to_string(),
                Phase::Expr(e) => expr_text(e),
            };
            let _ = write!(out, "pulse({}, {phase}", expr_text(angle));
            if let Some(d) = duration {
                let _ = write!(out, ", {}", expr_text(d));
            }
            out.push_str(");\n");
        }
        Statement::Delay(e) => {
            let _ = writeln!(out, "delay({});", expr_text(e));
        }
        Statement::Flip => out.push_str("flip;\n"),
        Statement::Repeat { count, pattern, body } => {
            let _ = write!(out, "repeat({}", expr_text(count));
            match pattern {
                None => {}
                Some(Pattern::Xy8) => out.push_str(", xy8"),
                Some(Pattern::Cp) => out.push_str(", cp"),
                Some(Pattern::List(axes)) => {
                    let names: Vec<&str> = axes.iter().map(|a| a.name()).collect();
                    let _ = write!(out, ", [{}]", names.join(" "));
                }
            }
            out.push_str(") ");
            write_block(out, body, depth);
            out.push('\n');
        }
        Statement::Inverse(body) => {
            out.push_str("inverse ");
            write_block(out, body, depth);
            out.push('\n');
        }
    }
}

/// Canonical text of a program: four-space indentation, one statement per
/// line, minimal parentheses, literals written as parsed.
pub fn format(prog: &SeqProgram) -> String {
    let mut out = String::new();
    let params: Vec<String> = prog.params.iter().map(|p| format!("{}: {}", p.name, p.ty.keyword())).collect();
    let _ = write!(out, "seq {}({}) ", prog.name, params.join(", "));
    write_block(&mut out, &prog.body, 0);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_parentheses() {
        let tau = || Expr::Ident("tau".into());
        let two = || Expr::Number { value: 2.0, unit: None };
        let e = Expr::binary(BinOp::Div, Expr::binary(BinOp::Sub, tau(), Expr::Ident("tp".into())), two());
        assert_eq!(expr_text(&e), "(tau - tp) / 2");
        let e = Expr::binary(BinOp::Sub, tau(), Expr::binary(BinOp::Sub, tau(), two()));
        assert_eq!(expr_text(&e), "tau - (tau - 2)");
        let e = Expr::binary(BinOp::Add, Expr::binary(BinOp::Add, tau(), tau()), Expr::Neg(Box::new(two())));
        assert_eq!(expr_text(&e), "tau + tau + -2");
        let e = Expr::binary(BinOp::Add, tau(), Expr::binary(BinOp::Add, tau(), two()));
        assert_eq!(expr_text(&e), "tau + (tau + 2)");
        assert_eq!(expr_text(&Expr::number(-1.5e-7, Some(Unit::S))), "-0.00000015s");
    }
}
