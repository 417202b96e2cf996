use std::collections::BTreeMap;

use super::ast::{BinOp, Expr, ParamType, Phase, SeqProgram, Statement, Unit};
use super::BindError;
use crate::dynamics::{Element, Pulse, PulseSequence};

/// Parameter values in SI units: seconds, radians, plain numbers for counts.
pub type Args = BTreeMap<String, f64>;

/// Upper bound on the number of expanded elements.
pub const MAX_ELEMENTS: usize = 10_000_000;

/// Counts within this relative distance of an integer are accepted.
const COUNT_SNAP: f64 = 1e-9;

fn eval(e: &Expr, args: &Args) -> Result<f64, BindError> {
    Ok(match e {
        Expr::Number { value, unit } => value * unit.map_or(1.0, |u| u.scale()),
        Expr::Ident(name) => *args.get(name).ok_or_else(|| BindError::Unbound(name.clone()))?,
        Expr::Neg(inner) => -eval(inner, args)?,
        Expr::Binary(op, a, b) => {
            let (a, b) = (eval(a, args)?, eval(b, args)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        }
    })
}

fn count(e: &Expr, args: &Args, what: &str) -> Result<u64, BindError> {
    let v = eval(e, args)?;
    let r = v.round();
    if !v.is_finite() || (v - r).abs() > COUNT_SNAP * r.abs().max(1.0) {
        return Err(BindError::NonIntegerCount { what: what.to_string(), value: v });
    }
    if r < 1.0 {
        return Err(BindError::NonPositiveCount { what: what.to_string(), value: v });
    }
    Ok(r as u64)
}

fn duration(e: &Expr, args: &Args, what: &str) -> Result<f64, BindError> {
    let v = eval(e, args)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(BindError::NegativeDuration { what: what.to_string(), value: v });
    }
    Ok(v)
}

struct Expander<'a> {
    args: &'a Args,
    /// Innermost pattern last: its phases and the index of its next use.
    patterns: Vec<(Vec<f64>, usize)>,
    emitted: usize,
}

impl Expander<'_> {
    fn push(&mut self, out: &mut Vec<Element>, e: Element) -> Result<(), BindError> {
        self.emitted += 1;
        if self.emitted > MAX_ELEMENTS {
            return Err(BindError::TooLarge(MAX_ELEMENTS));
        }
        out.push(e);
        Ok(())
    }

    fn block(&mut self, body: &[Statement], out: &mut Vec<Element>) -> Result<(), BindError> {
        for st in body {
            match st {
                Statement::Delay(e) => {
                    let t = duration(e, self.args, "delay")?;
                    self.push(out, Element::Delay(t))?;
                }
                Statement::Flip => self.push(out, Element::Flip)?,
                Statement::Pulse { angle, phase, duration: d } => {
                    let angle = eval(angle, self.args)?;
                    let phase = match phase {
                        Phase::Axis(a) => a.phase(),
                        Phase::Expr(e) => eval(e, self.args)?,
                        Phase::Pattern => {
                            let (phases, next) = self.patterns.last_mut().ok_or(BindError::PatternOutsideRepeat)?;
                            let ph = phases[*next % phases.len()];
                            *next += 1;
                            ph
                        }
                    };
                    let d = match d {
                        Some(e) => duration(e, self.args, "pulse duration")?,
                        None => 0.0,
                    };
                    let p = Pulse::new(angle, phase, d, 0.0).map_err(|e| BindError::InvalidPulse(e.to_string()))?;
                    self.push(out, Element::Pulse(p))?;
                }
                Statement::Repeat { count: c, pattern, body } => {
                    let n = count(c, self.args, "repeat count")?;
                    if let Some(p) = pattern {
                        self.patterns.push((p.axes().iter().map(|a| a.phase()).collect(), 0));
                    }
                    for _ in 0..n {
                        self.block(body, out)?;
                    }
                    if pattern.is_some() {
                        self.patterns.pop();
                    }
                }
                Statement::Inverse(body) => {
                    let mut inner = Vec::new();
                    self.block(body, &mut inner)?;
                    self.push(out, Element::Inverse(inner))?;
                }
            }
        }
        Ok(())
    }
}

fn check_args(prog: &SeqProgram, args: &Args) -> Result<(), BindError> {
    for (name, value) in args {
        let Some(p) = prog.params.iter().find(|p| &p.name == name) else {
            return Err(BindError::UnknownParameter(name.clone()));
        };
        if !value.is_finite() {
            return Err(BindError::NonFinite(name.clone()));
        }
        if p.ty == ParamType::Count && (value - value.round()).abs() > COUNT_SNAP * value.abs().max(1.0) {
            return Err(BindError::NonIntegerCount { what: name.clone(), value: *value });
        }
    }
    Ok(())
}

/// Resolves every parameter, unrolls repeats and patterns, and returns the
/// flat sequence.
pub fn bind_and_expand(prog: &SeqProgram, args: &Args) -> Result<PulseSequence, BindError> {
    check_args(prog, args)?;
    if let Some(p) = prog.params.iter().find(|p| !args.contains_key(&p.name)) {
        return Err(BindError::Unbound(p.name.clone()));
    }
    let mut ex = Expander { args, patterns: Vec::new(), emitted: 0 };
    let mut elements = Vec::new();
    ex.block(&prog.body, &mut elements)?;
    Ok(PulseSequence { elements })
}

fn subst_expr(e: &Expr, prog: &SeqProgram, args: &Args) -> Expr {
    match e {
        Expr::Ident(name) => match (args.get(name), prog.params.iter().find(|p| &p.name == name)) {
            (Some(v), Some(p)) => {
                let unit = match p.ty {
                    ParamType::Time => Some(Unit::S),
                    ParamType::Angle => Some(Unit::Rad),
                    ParamType::Count => None,
                };
                Expr::number(*v, unit)
            }
            _ => e.clone(),
        },
        Expr::Number { .. } => e.clone(),
        Expr::Neg(inner) => Expr::Neg(Box::new(subst_expr(inner, prog, args))),
        Expr::Binary(op, a, b) => Expr::binary(*op, subst_expr(a, prog, args), subst_expr(b, prog, args)),
    }
}

fn subst_block(body: &[Statement], prog: &SeqProgram, args: &Args) -> Vec<Statement> {
    let s = |e: &Expr| subst_expr(e, prog, args);
    body.iter()
        .map(|st| match st {
            Statement::Pulse { angle, phase, duration } => Statement::Pulse {
                angle: s(angle),
                phase: match phase {
                    Phase::Expr(e) => Phase::Expr(s(e)),
                    other => other.clone(),
                },
                duration: duration.as_ref().map(s),
            },
            Statement::Delay(e) => Statement::Delay(s(e)),
            Statement::Flip => Statement::Flip,
            Statement::Repeat { count, pattern, body } => Statement::Repeat {
                count: s(count),
                pattern: pattern.clone(),
                body: subst_block(body, prog, args),
            },
            Statement::Inverse(body) => Statement::Inverse(subst_block(body, prog, args)),
        })
        .collect()
}

/// Partially binds a program: the given parameters are replaced by SI
/// literals and dropped from the parameter list.
pub fn substitute(prog: &SeqProgram, args: &Args) -> Result<SeqProgram, BindError> {
    check_args(prog, args)?;
    Ok(SeqProgram {
        name: prog.name.clone(),
        params: prog.params.iter().filter(|p| !args.contains_key(&p.name)).cloned().collect(),
        body: subst_block(&prog.body, prog, args),
    })
}

/// One row of a flattened, timed schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleRow {
    pub t_start: f64,
    pub kind: &'static str,
    pub angle: f64,
    pub phase: f64,
    pub duration: f64,
}

/// Timed listing of a resolved sequence. Elements inside an inverse block
/// are listed in the order they act (reversed) with an `_inv` suffix.
pub fn schedule(seq: &PulseSequence) -> Vec<ScheduleRow> {
    fn walk(es: &[Element], inverted: bool, t: &mut f64, out: &mut Vec<ScheduleRow>) {
        let ordered: Vec<&Element> = if inverted { es.iter().rev().collect() } else { es.iter().collect() };
        for e in ordered {
            let row = |kind_fwd: &'static str, kind_inv: &'static str, angle: f64, phase: f64, duration: f64| {
                ScheduleRow { t_start: *t, kind: if inverted { kind_inv } else { kind_fwd }, angle, phase, duration }
            };
            match e {
                Element::Pulse(p) => {
                    out.push(row("pulse", "pulse_inv", p.angle, p.phase, p.duration));
                    *t += p.duration;
                }
                Element::Delay(d) => {
                    out.push(row("delay", "delay_inv", 0.0, 0.0, *d));
                    *t += d;
                }
                Element::Flip => out.push(row("flip", "flip_inv", std::f64::consts::PI, 0.0, 0.0)),
                Element::Inverse(inner) => walk(inner, !inverted, t, out),
            }
        }
    }
    let mut out = Vec::new();
    walk(&seq.elements, false, &mut 0.0, &mut out);
    out
}
