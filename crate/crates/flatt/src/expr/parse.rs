//! Recursive-descent parser for the expression grammar (docs/grammar.txt).
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' factor)?            -- '^' right-associative
//! base   := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! Errors carry the byte offset of the offending token.

use super::Expr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(&'static str),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("variable index {index} out of range 1..={n}")]
    VarIndexOutOfRange { index: usize, n: usize },
    #[error("malformed number literal")]
    InvalidNumber,
}

/// Parse `text` over the coordinates `x1…xn`.
pub fn parse_expr(text: &str, n: usize) -> Result<Expr, ParseError> {
    Parser::new(text, Vars::Indexed(n)).run()
}

/// Parse `text` where the variables are exactly `names` (1-based in the
/// resulting [`Expr::Var`] indices). Used for path expressions in the single
/// parameter `t`.
pub fn parse_expr_named(text: &str, names: &[&str]) -> Result<Expr, ParseError> {
    Parser::new(text, Vars::Named(names)).run()
}

enum Vars<'a> {
    /// `x1…xn`.
    Indexed(usize),
    Named(&'a [&'a str]),
}

type FnCtor = fn(Expr) -> Expr;

const FUNCTIONS: [(&str, FnCtor); 8] = [
    ("sin", Expr::sin),
    ("cos", Expr::cos),
    ("tan", Expr::tan),
    ("exp", Expr::exp),
    ("log", Expr::log),
    ("sqrt", Expr::sqrt),
    ("sinh", Expr::sinh),
    ("cosh", Expr::cosh),
];

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: Vars<'a>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, vars: Vars<'a>) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            vars,
        }
    }

    fn run(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        self.skip_ws();
        match self.peek() {
            None => Ok(e),
            Some(c) => Err(self.err_here(ParseErrorKind::UnexpectedChar(c))),
        }
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.pos,
            kind,
        }
    }

    fn err_at(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.pos < self.bytes.len() && self.bytes[self.pos] == c {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                e = e + self.term()?;
            } else if self.eat(b'-') {
                e = e - self.term()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.factor()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                e = e * self.factor()?;
            } else if self.eat(b'/') {
                e = e / self.factor()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        self.skip_ws();
        if self.eat(b'^') {
            let exponent = self.factor()?;
            Ok(base.pow(exponent))
        } else {
            Ok(base)
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err_here(ParseErrorKind::UnexpectedEnd("an expression"))),
            Some('-') => {
                self.pos += 1;
                Ok(-self.base()?)
            }
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if self.eat(b')') {
                    Ok(e)
                } else if self.peek().is_none() {
                    Err(self.err_here(ParseErrorKind::UnexpectedEnd("')'")))
                } else {
                    Err(self.err_here(ParseErrorKind::Expected("')'")))
                }
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.err_here(ParseErrorKind::UnexpectedChar(c))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.eat(b'.') {
            let digits = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                return Err(self.err_at(start, ParseErrorKind::InvalidNumber));
            }
        }
        if self.pos < self.bytes.len() && (self.bytes[self.pos] | 0x20) == b'e' {
            self.pos += 1;
            if self.pos < self.bytes.len()
                && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                return Err(self.err_at(start, ParseErrorKind::InvalidNumber));
            }
        }
        let value: f64 = self.text[start..self.pos]
            .parse()
            .map_err(|_| self.err_at(start, ParseErrorKind::InvalidNumber))?;
        if !value.is_finite() {
            return Err(self.err_at(start, ParseErrorKind::InvalidNumber));
        }
        Ok(Expr::constant(value))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];

        if let Vars::Named(names) = self.vars {
            if let Some(i) = names.iter().position(|v| *v == name) {
                return Ok(Expr::var(i + 1));
            }
        }

        self.skip_ws();
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'(' {
            let ctor = FUNCTIONS
                .iter()
                .find(|(fname, _)| *fname == name)
                .map(|(_, ctor)| *ctor)
                .ok_or_else(|| {
                    self.err_at(start, ParseErrorKind::UnknownFunction(name.to_string()))
                })?;
            self.pos += 1; // '('
            let arg = self.expr()?;
            self.skip_ws();
            if self.eat(b')') {
                Ok(ctor(arg))
            } else if self.peek().is_none() {
                Err(self.err_here(ParseErrorKind::UnexpectedEnd("')'")))
            } else {
                Err(self.err_here(ParseErrorKind::Expected("')'")))
            }
        } else if let Vars::Indexed(n) = self.vars {
            let digits = &name[1..];
            if name.starts_with('x')
                && !digits.is_empty()
                && digits.bytes().all(|b| b.is_ascii_digit())
            {
                let index: usize = digits
                    .parse()
                    .map_err(|_| self.err_at(start, ParseErrorKind::InvalidNumber))?;
                if (1..=n).contains(&index) {
                    Ok(Expr::var(index))
                } else {
                    Err(self.err_at(start, ParseErrorKind::VarIndexOutOfRange { index, n }))
                }
            } else {
                Err(self.err_at(start, ParseErrorKind::UnknownIdentifier(name.to_string())))
            }
        } else {
            Err(self.err_at(start, ParseErrorKind::UnknownIdentifier(name.to_string())))
        }
    }
}
