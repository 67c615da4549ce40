//! Text format for piecewise-linear programs.
//!
//! ```text
//! max min(
//!   (m + n)/2 - 1,
//!   max((n - m - 1)/2, (n - m - 1)/4),
//!   if(m + n1 <= 1, 1/4 - n1/2, 10)
//! ) st
//!   m >= 0;
//!   n1 + n2 == n
//! ```
//!
//! Affine expressions admit `+ - * / ( )` with products constant on at
//! least one side and divisors constant; `max`, `min`, `if` and `st`
//! are reserved words. The `if` guard compares two affine forms with
//! `<=` and the fallback arm must be a rational constant. Constraints
//! are affine-vs-affine with `<=`, `>=` or `==`, separated by `;`.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;

use super::simplex::Relation;
use super::{Constraint, LinForm, PLExpr, PiecewiseProgram, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Semi,
    Le,
    Ge,
    EqEq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::EqEq => write!(f, "`==`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn error(&self, message: String) -> ParseError {
        ParseError { line: self.line, col: self.col, message }
    }

    fn next_token(&mut self) -> Result<Spanned, ParseError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
        let (line, col) = (self.line, self.col);
        let spanned = |tok| Spanned { tok, line, col };
        let c = match self.peek() {
            None => return Ok(spanned(Tok::Eof)),
            Some(c) => c,
        };
        let tok = match c {
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'-' => {
                self.bump();
                Tok::Minus
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'/' => {
                self.bump();
                Tok::Slash
            }
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b';' => {
                self.bump();
                Tok::Semi
            }
            b'<' | b'>' | b'=' => {
                self.bump();
                if self.peek() != Some(b'=') {
                    return Err(self.error(format!("expected `=` after `{}`", c as char)));
                }
                self.bump();
                match c {
                    b'<' => Tok::Le,
                    b'>' => Tok::Ge,
                    _ => Tok::EqEq,
                }
            }
            b'0'..=b'9' => {
                let mut s = String::new();
                while let Some(d) = self.peek() {
                    if d.is_ascii_digit() {
                        s.push(self.bump() as char);
                    } else {
                        break;
                    }
                }
                Tok::Number(s)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut s = String::new();
                while let Some(d) = self.peek() {
                    if d.is_ascii_alphanumeric() || d == b'_' {
                        s.push(self.bump() as char);
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => {
                return Err(self.error(format!("unexpected character `{}`", other as char)));
            }
        };
        Ok(spanned(tok))
    }
}

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
    variables: Vec<String>,
}

const RESERVED: [&str; 4] = ["max", "min", "if", "st"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn error_here(&self, message: String) -> ParseError {
        let s = &self.toks[self.at];
        ParseError { line: s.line, col: s.col, message }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {want}, found {}", self.peek())))
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == word => {
                self.bump();
                Ok(())
            }
            other => Err(self.error_here(format!("expected `{word}`, found {other}"))),
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn register_variable(&mut self, name: &str) {
        if !self.variables.iter().any(|v| v == name) {
            self.variables.push(name.to_string());
        }
    }

    /// affine := term { (+|-) term }
    fn affine(&mut self) -> Result<LinForm, ParseError> {
        let mut acc = self.mul_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.mul_term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.mul_term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    /// term := factor { (*|/) factor }
    fn mul_term(&mut self) -> Result<LinForm, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.factor()?;
                    acc = if let Some(c) = rhs.as_constant() {
                        acc.scale(&c)
                    } else if let Some(c) = acc.as_constant() {
                        rhs.scale(&c)
                    } else {
                        return Err(self.error_here(
                            "product of two non-constant expressions is not affine".into(),
                        ));
                    };
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.factor()?;
                    let c = rhs.as_constant().ok_or_else(|| {
                        self.error_here("divisor must be a nonzero constant".into())
                    })?;
                    if c.is_zero() {
                        return Err(self.error_here("division by zero".into()));
                    }
                    acc = acc.scale(&(Rat::from_integer(1.into()) / c));
                }
                _ => return Ok(acc),
            }
        }
    }

    /// factor := NUMBER | IDENT | ( affine ) | - factor
    fn factor(&mut self) -> Result<LinForm, ParseError> {
        match self.peek().clone() {
            Tok::Number(s) => {
                self.bump();
                let n = BigRational::from_str(&s).expect("lexer produced digits");
                Ok(LinForm::constant(n))
            }
            Tok::Ident(name) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(
                        self.error_here(format!("`{name}` is reserved and not a variable"))
                    );
                }
                self.bump();
                self.register_variable(&name);
                Ok(LinForm::variable(&name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.affine()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Tok::Minus => {
                self.bump();
                Ok(self.factor()?.neg())
            }
            other => Err(self.error_here(format!("expected an expression, found {other}"))),
        }
    }

    /// plexpr := max(...) | min(...) | if(affine <= affine, plexpr, RAT) | affine
    fn plexpr(&mut self) -> Result<PLExpr, ParseError> {
        if self.at_keyword("max") || self.at_keyword("min") {
            let is_max = self.at_keyword("max");
            self.bump();
            self.expect(&Tok::LParen)?;
            let mut items = vec![self.plexpr()?];
            while self.peek() == &Tok::Comma {
                self.bump();
                items.push(self.plexpr()?);
            }
            self.expect(&Tok::RParen)?;
            if items.len() < 2 {
                return Err(self.error_here(format!(
                    "`{}` needs at least two arguments",
                    if is_max { "max" } else { "min" }
                )));
            }
            return Ok(if is_max { PLExpr::Max(items) } else { PLExpr::Min(items) });
        }
        if self.at_keyword("if") {
            self.bump();
            self.expect(&Tok::LParen)?;
            let lhs = self.affine()?;
            self.expect(&Tok::Le)?;
            let rhs = self.affine()?;
            self.expect(&Tok::Comma)?;
            let then = Box::new(self.plexpr()?);
            self.expect(&Tok::Comma)?;
            let fb_form = self.affine()?;
            let fallback = fb_form.as_constant().ok_or_else(|| {
                self.error_here("the `if` fallback must be a rational constant".into())
            })?;
            self.expect(&Tok::RParen)?;
            return Ok(PLExpr::Guarded { guard: lhs.sub(&rhs), then, fallback });
        }
        Ok(PLExpr::Lin(self.affine()?))
    }

    fn constraint(&mut self) -> Result<Constraint, ParseError> {
        let lhs = self.affine()?;
        let rel = match self.bump() {
            Tok::Le => Relation::Le,
            Tok::Ge => Relation::Ge,
            Tok::EqEq => Relation::Eq,
            other => {
                return Err(self.error_here(format!(
                    "expected `<=`, `>=` or `==` in a constraint, found {other}"
                )))
            }
        };
        let rhs = self.affine()?;
        Ok(Constraint { lhs: lhs.sub(&rhs), rel })
    }

    fn program(&mut self) -> Result<PiecewiseProgram, ParseError> {
        self.expect_keyword("max")?;
        self.expect_keyword("min")?;
        self.expect(&Tok::LParen)?;
        let mut objective = vec![self.plexpr()?];
        while self.peek() == &Tok::Comma {
            self.bump();
            objective.push(self.plexpr()?);
        }
        self.expect(&Tok::RParen)?;
        self.expect_keyword("st")?;
        let mut constraints = vec![self.constraint()?];
        while self.peek() == &Tok::Semi {
            self.bump();
            if self.peek() == &Tok::Eof {
                break;
            }
            constraints.push(self.constraint()?);
        }
        self.expect(&Tok::Eof)?;
        Ok(PiecewiseProgram {
            variables: std::mem::take(&mut self.variables),
            objective,
            constraints,
        })
    }
}

pub fn parse_program(text: &str) -> Result<PiecewiseProgram, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    loop {
        let s = lexer.next_token()?;
        let done = s.tok == Tok::Eof;
        toks.push(s);
        if done {
            break;
        }
    }
    Parser { toks, at: 0, variables: Vec::new() }.program()
}

fn write_rat(f: &mut fmt::Formatter<'_>, r: &Rat) -> fmt::Result {
    write!(f, "{r}")
}

impl fmt::Display for LinForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use num_traits::{One, Signed};
        let mut first = true;
        for (name, coeff) in &self.coeffs {
            if coeff.is_zero() {
                continue;
            }
            let mag = coeff.abs();
            if first {
                if coeff.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if coeff.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if mag.is_one() {
                write!(f, "{name}")?;
            } else {
                write_rat(f, &mag)?;
                write!(f, "*{name}")?;
            }
        }
        if !self.constant.is_zero() || first {
            let mag = self.constant.abs();
            if first {
                if self.constant.is_negative() {
                    write!(f, "-")?;
                }
            } else if self.constant.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write_rat(f, &mag)?;
        }
        Ok(())
    }
}

impl fmt::Display for PLExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PLExpr::Lin(l) => write!(f, "{l}"),
            PLExpr::Max(items) | PLExpr::Min(items) => {
                let word = if matches!(self, PLExpr::Max(_)) { "max" } else { "min" };
                write!(f, "{word}(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
            PLExpr::Guarded { guard, then, fallback } => {
                write!(f, "if({guard} <= 0, {then}, ")?;
                write_rat(f, fallback)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.rel {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "==",
        };
        write!(f, "{} {op} 0", self.lhs)
    }
}

impl fmt::Display for PiecewiseProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "max min(")?;
        for (i, term) in self.objective.iter().enumerate() {
            let sep = if i + 1 < self.objective.len() { "," } else { "" };
            writeln!(f, "  {term}{sep}")?;
        }
        writeln!(f, ") st")?;
        for (i, c) in self.constraints.iter().enumerate() {
            let sep = if i + 1 < self.constraints.len() { ";" } else { "" };
            writeln!(f, "  {c}{sep}")?;
        }
        Ok(())
    }
}
