use super::{ErrorKind, ParseError, Pos};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Numeric literal with the unit suffix written directly after it.
    Number { value: f64, unit: Option<String> },
    PatternRef,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number { .. } => "number".into(),
            Tok::PatternRef => "`@pattern`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool, out: &mut String) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { chars: text.chars().peekable(), pos: Pos { line: 1, col: 1 } };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '/' && text_has_comment(&cur) {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let pos = cur.pos;
        let Some(c) = cur.peek() else {
            out.push(Token { tok: Tok::Eof, pos });
            return Ok(out);
        };
        let tok = if is_ident_start(c) {
            let mut s = String::new();
            cur.take_while(is_ident_char, &mut s);
            Tok::Ident(s)
        } else if c.is_ascii_digit() || c == '.' {
            number(&mut cur, pos)?
        } else if c == '@' {
            cur.bump();
            let mut s = String::new();
            cur.take_while(is_ident_char, &mut s);
            if s != "pattern" {
                return Err(ParseError::new(ErrorKind::Lexical, pos, format!("unknown reference `@{s}`")));
            }
            Tok::PatternRef
        } else {
            cur.bump();
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                other => {
                    return Err(ParseError::new(ErrorKind::Lexical, pos, format!("unexpected character {other:?}")))
                }
            }
        };
        out.push(Token { tok, pos });
    }
}

fn text_has_comment(cur: &Cursor) -> bool {
    let mut ahead = cur.chars.clone();
    ahead.next() == Some('/') && ahead.next() == Some('/')
}

fn number(cur: &mut Cursor, pos: Pos) -> Result<Tok, ParseError> {
    let mut s = String::new();
    cur.take_while(|c| c.is_ascii_digit(), &mut s);
    if cur.peek() == Some('.') {
        s.push('.');
        cur.bump();
        cur.take_while(|c| c.is_ascii_digit(), &mut s);
    }
    // An exponent needs a digit after the optional sign; otherwise the `e`
    // would start a unit suffix.
    let mut ahead = cur.chars.clone();
    if matches!(ahead.next(), Some('e' | 'E')) {
        let mut next = ahead.next();
        if matches!(next, Some('+' | '-')) {
            next = ahead.next();
        }
        if next.is_some_and(|c| c.is_ascii_digit()) {
            s.push(cur.bump().unwrap_or('e'));
            if matches!(cur.peek(), Some('+' | '-')) {
                s.push(cur.bump().unwrap_or('+'));
            }
            cur.take_while(|c| c.is_ascii_digit(), &mut s);
        }
    }
    let value: f64 =
        s.parse().map_err(|_| ParseError::new(ErrorKind::Lexical, pos, format!("malformed number `{s}`")))?;
    if !value.is_finite() {
        return Err(ParseError::new(ErrorKind::Lexical, pos, format!("number `{s}` is out of range")));
    }
    let mut unit = String::new();
    cur.take_while(is_ident_char, &mut unit);
    Ok(Tok::Number { value, unit: (!unit.is_empty()).then_some(unit) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_units() {
        assert_eq!(
            toks("1.5e-3ns 2 90deg 3e"),
            vec![
                Tok::Number { value: 1.5e-3, unit: Some("ns".into()) },
                Tok::Number { value: 2.0, unit: None },
                Tok::Number { value: 90.0, unit: Some("deg".into()) },
                Tok::Number { value: 3.0, unit: Some("e".into()) },
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_and_comments() {
        let t = tokenize("seq a // note\n  ( )").unwrap();
        assert_eq!(t[2].pos, Pos { line: 2, col: 3 });
        assert_eq!(t[3].pos, Pos { line: 2, col: 5 });
        let e = tokenize("seq $").unwrap_err();
        assert_eq!((e.kind, e.pos), (ErrorKind::Lexical, Pos { line: 1, col: 5 }));
        assert!(tokenize("@foo").is_err());
        assert!(tokenize(".").is_err());
    }
}
