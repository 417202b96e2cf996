use super::*;
use crate::dynamics::{Element, Pulse};
use crate::protocols::{fid_protocol, measure_sequence, protocol_2d, AcquisitionGrid, CpParams, PhasePattern};
use crate::spinsys::{FreeHamiltonianKind, Isotope, Nucleus, SpinSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn args(pairs: &[(&str, f64)]) -> Args {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn err(text: &str) -> ParseError {
    parse(text).unwrap_err()
}

#[test]
fn echo_program() {
    let p = parse("seq echo(tau: time) { pulse(90deg, x); delay(tau); pulse(180deg, y); delay(tau); pulse(90deg, x); }")
        .unwrap();
    assert_eq!(p.name, "echo");
    assert_eq!(p.body.len(), 5);
    let seq = bind_and_expand(&p, &args(&[("tau", 1e-6)])).unwrap();
    assert_eq!(seq.elements[2], Element::Pulse(Pulse::ideal(PI, 0.5 * PI)));
    assert!((seq.duration() - 2e-6).abs() < 1e-18);
}

#[test]
fn xy8_pattern_phases() {
    let p = parse("seq t(N: count, tau: time) { repeat(N, xy8) { delay(tau/2); pulse(180deg, @pattern); delay(tau/2); } }")
        .unwrap();
    let seq = bind_and_expand(&p, &args(&[("N", 8.0), ("tau", 1e-7)])).unwrap();
    let phases: Vec<f64> = seq
        .elements
        .iter()
        .filter_map(|e| match e {
            Element::Pulse(p) => Some(p.phase),
            _ => None,
        })
        .collect();
    assert_eq!(phases, PhasePattern::Xy8.phases().to_vec());
    let h = 0.5 * PI;
    assert_eq!(phases, vec![0.0, h, 0.0, h, h, 0.0, h, 0.0]);
}

#[test]
fn explicit_pattern_cycles_across_iterations_and_nesting() {
    let p = parse(
        "seq t() { repeat(3, [x -y]) { pulse(180deg, @pattern); repeat(2) { pulse(90deg, @pattern); } } }",
    )
    .unwrap();
    let seq = bind_and_expand(&p, &Args::new()).unwrap();
    let phases: Vec<f64> = seq
        .elements
        .iter()
        .map(|e| match e {
            Element::Pulse(p) => p.phase,
            _ => unreachable!(),
        })
        .collect();
    let (x, my) = (0.0, 1.5 * PI);
    assert_eq!(phases, vec![x, my, x, my, x, my, x, my, x]);
}

#[test]
fn missing_semicolon_position() {
    let e = err("seq a(t: time) {\n    delay(t)\n    flip;\n}");
    assert_eq!(e.kind, ErrorKind::Syntax);
    assert_eq!(e.pos, Pos { line: 3, col: 5 });
    assert_eq!(e.to_string(), "3:5: syntax error: expected `;`, found identifier `flip`");
}

#[test]
fn error_kinds_and_positions() {
    let e = err("seq a() { delay(tau); }");
    assert_eq!((e.kind, e.pos), (ErrorKind::UnknownIdentifier, Pos { line: 1, col: 17 }));
    let e = err("seq a() { delay(5fs); }");
    assert_eq!((e.kind, e.pos), (ErrorKind::UnknownUnit, Pos { line: 1, col: 17 }));
    let e = err("seq a(t: time, t: angle) { }");
    assert_eq!((e.kind, e.pos), (ErrorKind::DuplicateParameter, Pos { line: 1, col: 16 }));
    let e = err("seq a(t: time) { delay(t + 3deg); }");
    assert_eq!((e.kind, e.pos), (ErrorKind::UnitMismatch, Pos { line: 1, col: 26 }));
    let e = err("seq a(t: time) { pulse(t, x); }");
    assert_eq!((e.kind, e.pos), (ErrorKind::UnitMismatch, Pos { line: 1, col: 24 }));
    let e = err("seq a() { delay(1us) ; } ?");
    assert_eq!((e.kind, e.pos), (ErrorKind::Lexical, Pos { line: 1, col: 26 }));
    let e = err("seq a() { pulse(90deg, @pattern); }");
    assert_eq!(e.kind, ErrorKind::UnknownIdentifier);
    assert_eq!(err("seq a(x: time) { }").kind, ErrorKind::Syntax);
    assert_eq!(err("seq a() { wait(1us); }").kind, ErrorKind::Syntax);
    assert_eq!(err("seq a() { repeat(2, [x z]) { } }").kind, ErrorKind::Syntax);
    assert_eq!(err("seq a() {").pos, Pos { line: 1, col: 10 });
    assert_eq!(err("").kind, ErrorKind::Syntax);
    let deep = format!("seq a() {{ delay({}1us{}); }}", "(".repeat(200), ")".repeat(200));
    assert_eq!(err(&deep).kind, ErrorKind::Syntax);
    let long = format!("seq a() {{ delay(1us{}); }}", " + 1us".repeat(600));
    assert_eq!(err(&long).message, "expression is too long");
}

#[test]
fn dimension_algebra() {
    assert!(parse("seq a(t: time, n: count) { repeat(t / 1us) { delay(n * t - 2 * 1ns); } }").is_ok());
    assert_eq!(err("seq a(t: time) { delay(t * t); }").kind, ErrorKind::UnitMismatch);
    assert_eq!(err("seq a(t: time) { delay(2 / t); }").kind, ErrorKind::UnitMismatch);
    assert!(parse("seq a(p: angle) { pulse(2 * p, p - 1rad, 10ns); }").is_ok());
}

#[test]
fn binding_errors() {
    let p = parse("seq a(t: time, n: count) { repeat(n) { delay(t - 1us); } }").unwrap();
    assert_eq!(bind_and_expand(&p, &args(&[("t", 2e-6)])), Err(BindError::Unbound("n".into())));
    assert!(matches!(
        bind_and_expand(&p, &args(&[("t", 2e-6), ("n", 2.5)])),
        Err(BindError::NonIntegerCount { .. })
    ));
    assert!(matches!(
        bind_and_expand(&p, &args(&[("t", 0.5e-6), ("n", 2.0)])),
        Err(BindError::NegativeDuration { .. })
    ));
    assert!(matches!(
        bind_and_expand(&p, &args(&[("t", 2e-6), ("n", 0.0)])),
        Err(BindError::NonPositiveCount { .. })
    ));
    assert_eq!(
        bind_and_expand(&p, &args(&[("t", 2e-6), ("n", 1.0), ("q", 1.0)])),
        Err(BindError::UnknownParameter("q".into()))
    );
    let p = parse("seq a(n: count) { repeat(n / 2) { flip; } }").unwrap();
    assert!(matches!(bind_and_expand(&p, &args(&[("n", 3.0)])), Err(BindError::NonIntegerCount { .. })));
    let p = parse("seq a(n: count) { repeat(n) { repeat(n) { flip; } } }").unwrap();
    assert_eq!(bind_and_expand(&p, &args(&[("n", 1e5)])), Err(BindError::TooLarge(MAX_ELEMENTS)));
    let p = parse("seq a() { pulse(0deg, x); }").unwrap();
    assert!(matches!(bind_and_expand(&p, &Args::new()), Err(BindError::InvalidPulse(_))));
}

#[test]
fn single_repeat_of_a_delay() {
    let p = parse("seq a() { repeat(1) { delay(250ns); } }").unwrap();
    let seq = bind_and_expand(&p, &Args::new()).unwrap();
    assert_eq!(seq.elements, vec![Element::Delay(250.0 * 1e-9)]);
}

#[test]
fn library_round_trips() {
    for (name, text) in LIBRARY {
        let p = parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let f = format(&p);
        assert_eq!(&f, text, "{name} is not in canonical form");
        assert_eq!(parse(&f).unwrap(), p);
        assert_eq!(format(&parse(&f).unwrap()), f);
        assert!(library(name).is_some());
    }
    assert!(library("nope").is_none());
}

#[test]
fn xy8_schedule() {
    let p = library("xy8").unwrap();
    let tau = 121.8e-9;
    let seq = bind_and_expand(&p, &args(&[("n", 8.0), ("tau", tau)])).unwrap();
    let rows = schedule(&seq);
    assert_eq!(rows.iter().filter(|r| r.kind == "pulse").count(), 8);
    assert_eq!(rows.iter().filter(|r| r.kind == "delay").count(), 16);
    let last = rows.last().unwrap();
    assert!((last.t_start + last.duration - 8.0 * tau).abs() < 1e-20);
}

#[test]
fn inverse_schedule_runs_backwards() {
    let p = parse("seq a() { inverse { pulse(90deg, y); delay(1us); } }").unwrap();
    let rows = schedule(&bind_and_expand(&p, &Args::new()).unwrap());
    assert_eq!(rows.iter().map(|r| r.kind).collect::<Vec<_>>(), vec!["delay_inv", "pulse_inv"]);
}

fn fig4() -> SpinSystem {
    let c13 = Isotope::lookup("13C").unwrap();
    SpinSystem::new(2.09321 / c13.gamma, vec![Nucleus::new(c13, 4.02350e6, 251.35e3).unwrap()], 2e-4, 1e-5).unwrap()
}

#[test]
fn library_fids_match_engine() {
    let sys = fig4();
    let tau = sys.resonance_tau(0);
    for (tp, n) in [(0.0, 16), (25e-9, 24)] {
        let cp = CpParams::new(n, tau, PhasePattern::Xy8, tp).unwrap();
        let t1 = 1.32e-6;
        let grid = AcquisitionGrid::new(t1, 1e-7, 2).unwrap();
        let base = [("n", n as f64), ("tau", tau), ("tp", tp)];

        let h2 = fid_protocol(&sys, &cp, FreeHamiltonianKind::H2, &grid, false).unwrap();
        let mut a = args(&base);
        a.insert("t1".into(), t1);
        let p = measure_sequence(&sys, &bind_and_expand(&library("fid_h2").unwrap(), &a).unwrap()).unwrap();
        assert!((p - h2.values[0]).abs() < 1e-12, "fid_h2: {p} vs {}", h2.values[0]);

        let h1 = fid_protocol(&sys, &cp, FreeHamiltonianKind::H1, &grid, false).unwrap();
        let p = measure_sequence(&sys, &bind_and_expand(&library("fid_h1").unwrap(), &a).unwrap()).unwrap();
        assert!((p - h1.values[0]).abs() < 1e-12);

        let period = 2.0 * tau;
        let kind = FreeHamiltonianKind::h3_with_lead(period, 0.3 * period).unwrap();
        let grid3 = AcquisitionGrid::new(5.0 * period, period, 2).unwrap();
        let h3 = fid_protocol(&sys, &cp, kind, &grid3, false).unwrap();
        let mut a3 = args(&base);
        a3.extend(args(&[("m", 5.0), ("period", period), ("lead", 0.3 * period)]));
        let p = measure_sequence(&sys, &bind_and_expand(&library("fid_h3").unwrap(), &a3).unwrap()).unwrap();
        assert!((p - h3.values[0]).abs() < 1e-12);

        let g2 = AcquisitionGrid::point(3.0 * period, period).unwrap();
        let s2 = protocol_2d(&sys, &cp, &grid, &g2, FreeHamiltonianKind::h3(period).unwrap(), false).unwrap();
        let mut a2 = args(&base);
        a2.extend(args(&[("t1", t1), ("m", 3.0), ("period", period), ("lead", period)]));
        let p = measure_sequence(&sys, &bind_and_expand(&library("2d").unwrap(), &a2).unwrap()).unwrap();
        assert!((p - s2.get(0, 0)).abs() < 1e-12);
    }
}

/// Random well-typed programs for the round-trip law.
struct Gen {
    rng: ChaCha8Rng,
    params: Vec<Param>,
}

impl Gen {
    fn number(&mut self, dim: Dim) -> Expr {
        let value = match self.rng.gen_range(0..4) {
            0 => self.rng.gen_range(0..1000) as f64,
            1 => self.rng.gen::<f64>() * 10f64.powi(self.rng.gen_range(-12..12)),
            2 => 0.0,
            _ => self.rng.gen_range(1..20) as f64 * 0.125,
        };
        let unit = match dim {
            Dim::Scalar => None,
            Dim::Time => Some([Unit::S, Unit::Ms, Unit::Us, Unit::Ns, Unit::Ps][self.rng.gen_range(0..5)]),
            Dim::Angle => Some([Unit::Deg, Unit::Rad][self.rng.gen_range(0..2)]),
        };
        Expr::Number { value, unit }
    }

    fn expr(&mut self, dim: Dim, depth: u32) -> Expr {
        let leaf = depth == 0 || self.rng.gen_bool(0.35);
        if leaf {
            let want = match dim {
                Dim::Time => ParamType::Time,
                Dim::Angle => ParamType::Angle,
                Dim::Scalar => ParamType::Count,
            };
            let names: Vec<String> = self.params.iter().filter(|p| p.ty == want).map(|p| p.name.clone()).collect();
            if !names.is_empty() && self.rng.gen_bool(0.5) {
                return Expr::Ident(names[self.rng.gen_range(0..names.len())].clone());
            }
            return self.number(dim);
        }
        match self.rng.gen_range(0..5) {
            0 => Expr::Neg(Box::new(self.expr(dim, depth - 1))),
            1 => Expr::binary(BinOp::Add, self.expr(dim, depth - 1), self.expr(dim, depth - 1)),
            2 => Expr::binary(BinOp::Sub, self.expr(dim, depth - 1), self.expr(dim, depth - 1)),
            3 => Expr::binary(BinOp::Mul, self.expr(Dim::Scalar, depth - 1), self.expr(dim, depth - 1)),
            _ => {
                if dim == Dim::Scalar && self.rng.gen_bool(0.5) {
                    Expr::binary(BinOp::Div, self.expr(Dim::Time, depth - 1), self.expr(Dim::Time, depth - 1))
                } else {
                    Expr::binary(BinOp::Div, self.expr(dim, depth - 1), self.expr(Dim::Scalar, depth - 1))
                }
            }
        }
    }

    fn axis(&mut self) -> Axis {
        [Axis::X, Axis::Y, Axis::MinusX, Axis::MinusY][self.rng.gen_range(0..4)]
    }

    fn block(&mut self, depth: u32, in_pattern: bool) -> Vec<Statement> {
        let n = self.rng.gen_range(0..4);
        (0..n).map(|_| self.statement(depth, in_pattern)).collect()
    }

    fn statement(&mut self, depth: u32, in_pattern: bool) -> Statement {
        let nested = depth > 0;
        match self.rng.gen_range(0..if nested { 6 } else { 3 }) {
            0 => {
                let phase = match self.rng.gen_range(0..3) {
                    0 => Phase::Axis(self.axis()),
                    1 if in_pattern => Phase::Pattern,
                    _ => Phase::Expr(self.expr(Dim::Angle, 2)),
                };
                let duration = self.rng.gen_bool(0.5).then(|| self.expr(Dim::Time, 2));
                Statement::Pulse { angle: self.expr(Dim::Angle, 2), phase, duration }
            }
            1 => Statement::Delay(self.expr(Dim::Time, 3)),
            2 => Statement::Flip,
            3 | 4 => {
                let pattern = match self.rng.gen_range(0..4) {
                    0 => None,
                    1 => Some(Pattern::Xy8),
                    2 => Some(Pattern::Cp),
                    _ => Some(Pattern::List((0..self.rng.gen_range(1..5)).map(|_| self.axis()).collect())),
                };
                let scoped = in_pattern || pattern.is_some();
                Statement::Repeat { count: self.expr(Dim::Scalar, 2), pattern, body: self.block(depth - 1, scoped) }
            }
            _ => Statement::Inverse(self.block(depth - 1, in_pattern)),
        }
    }

    fn program(seed: u64) -> SeqProgram {
        let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), params: Vec::new() };
        for i in 0..g.rng.gen_range(0..5) {
            let ty = [ParamType::Time, ParamType::Angle, ParamType::Count][g.rng.gen_range(0..3)];
            g.params.push(Param { name: format!("p{i}"), ty });
        }
        let body = g.block(3, false);
        SeqProgram { name: format!("prog{}", seed % 97), params: g.params.clone(), body }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_programs_round_trip(seed in any::<u64>()) {
        let p = Gen::program(seed);
        let text = format(&p);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(format(&back), text);
    }

    #[test]
    fn parser_never_panics_on_noise(s in "\\PC{0,200}") {
        if let Err(e) = parse(&s) {
            prop_assert!(e.pos.line >= 1 && e.pos.col >= 1);
            prop_assert!(!e.to_string().contains('\n'));
        }
    }

    #[test]
    fn parser_never_panics_on_mutated_programs(idx in 0usize..6, cut in 0usize..2000, junk in "[{}();,@\\[\\]a-z0-9 .+*/-]{0,8}") {
        let text = LIBRARY[idx].1;
        let at = text.char_indices().map(|(i, _)| i).nth(cut % text.chars().count()).unwrap_or(0);
        let mutated = format!("{}{}{}", &text[..at], junk, &text[at..]);
        if let Err(e) = parse(&mutated) {
            prop_assert!(e.pos.line >= 1 && e.pos.col >= 1);
        }
    }

    #[test]
    fn partial_binding_commutes_with_expansion(
        tau in 10e-9f64..1e-6,
        tp in 0.0f64..10e-9,
        t1 in 0.0f64..5e-6,
        n in 1u32..24,
        mask in 0u8..16,
    ) {
        let prog = library("fid_h2").unwrap();
        let all = args(&[("n", n as f64), ("tau", tau), ("tp", tp), ("t1", t1)]);
        let (first, rest): (Args, Args) = all.clone().into_iter().enumerate().fold(
            (Args::new(), Args::new()),
            |(mut a, mut b), (i, (k, v))| {
                if mask & (1 << i) != 0 { a.insert(k, v); } else { b.insert(k, v); }
                (a, b)
            },
        );
        let direct = bind_and_expand(&prog, &all).unwrap();
        let partial = substitute(&prog, &first).unwrap();
        prop_assert_eq!(parse(&format(&partial)).unwrap(), partial.clone());
        prop_assert_eq!(bind_and_expand(&partial, &rest).unwrap(), direct);
    }
}
