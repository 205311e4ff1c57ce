//! Concrete syntax for programs (`.mcap` files).
//!
//! ```text
//! program := choice
//! choice  := par ("+" par)*
//! par     := seq ("||" seq)*
//! seq     := atom (";" atom)*
//! atom    := "eps" | "any" | action
//!          | "?" "(" query ")" "{" program "}"
//!          | "!?" "(" query ")" "{" program "}"
//!          | "while" "(" query ")" "{" program "}"
//!          | "(" program ")"
//! action  := ident ["(" term ("," term)* ")"]
//! term    := ident | Variable | integer
//! query   := literal ("&" literal)*
//! literal := ["!"] ident ["(" term ("," term)* ")"] | "true"
//! ```
//!
//! `;` binds tightest, then `||`, then `+`. Line comments start with `//`.

use std::fmt;

use thiserror::Error;

use crate::program::{canonicalize, Atom, Literal, Program, Query, Term};

const KEYWORDS: &[&str] = &["eps", "any", "while", "true"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Lower(String),
    Upper(String),
    Int(i64),
    Semi,
    Plus,
    Bar2,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Question,
    BangQuestion,
    Bang,
    Amp,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Lower(s) | Tok::Upper(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Bar2 => f.write_str("`||`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Question => f.write_str("`?`"),
            Tok::BangQuestion => f.write_str("`!?`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: l, column: col });
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(ParseError {
                        line: l,
                        column: col,
                        expected: "`//` comment".into(),
                        found: "`/`".into(),
                    });
                }
            }
            ';' | '+' | '(' | ')' | '{' | '}' | '?' | '&' | ',' => {
                bump!();
                push(
                    &mut out,
                    match c {
                        ';' => Tok::Semi,
                        '+' => Tok::Plus,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '?' => Tok::Question,
                        '&' => Tok::Amp,
                        _ => Tok::Comma,
                    },
                );
            }
            '|' => {
                bump!();
                if chars.peek() == Some(&'|') {
                    bump!();
                    push(&mut out, Tok::Bar2);
                } else {
                    return Err(ParseError {
                        line: l,
                        column: col,
                        expected: "`||`".into(),
                        found: "`|`".into(),
                    });
                }
            }
            '!' => {
                bump!();
                if chars.peek() == Some(&'?') {
                    bump!();
                    push(&mut out, Tok::BangQuestion);
                } else {
                    push(&mut out, Tok::Bang);
                }
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut text = String::new();
                text.push(c);
                bump!();
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    text.push(d);
                    bump!();
                }
                match text.parse::<i64>() {
                    Ok(v) => push(&mut out, Tok::Int(v)),
                    Err(_) => {
                        return Err(ParseError {
                            line: l,
                            column: col,
                            expected: "integer".into(),
                            found: format!("`{text}`"),
                        })
                    }
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_alphanumeric() || d == '_') {
                        break;
                    }
                    text.push(d);
                    bump!();
                }
                if c.is_uppercase() {
                    push(&mut out, Tok::Upper(text));
                } else {
                    push(&mut out, Tok::Lower(text));
                }
            }
            other => {
                return Err(ParseError {
                    line: l,
                    column: col,
                    expected: "a program token".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let here = &self.toks[self.pos];
        ParseError {
            line: here.line,
            column: here.column,
            expected: expected.to_string(),
            found: here.tok.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(&tok.to_string()))
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut items = vec![self.par()?];
        while *self.peek() == Tok::Plus {
            self.next();
            items.push(self.par()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Program::choice(items)
        })
    }

    fn par(&mut self) -> Result<Program, ParseError> {
        let mut items = vec![self.seq()?];
        while *self.peek() == Tok::Bar2 {
            self.next();
            items.push(self.seq()?);
        }
        Ok(items
            .into_iter()
            .rev()
            .reduce(|rest, p| Program::par(p, rest))
            .unwrap())
    }

    fn seq(&mut self) -> Result<Program, ParseError> {
        let mut items = vec![self.atom()?];
        while *self.peek() == Tok::Semi {
            self.next();
            items.push(self.atom()?);
        }
        Ok(Program::sequence(items))
    }

    fn atom(&mut self) -> Result<Program, ParseError> {
        match self.peek().clone() {
            Tok::Lower(name) => match name.as_str() {
                "eps" => {
                    self.next();
                    Ok(Program::Epsilon)
                }
                "any" => {
                    self.next();
                    Ok(Program::AnyAction)
                }
                "while" => {
                    self.next();
                    let q = self.paren_query()?;
                    let body = self.block()?;
                    Ok(Program::while_loop(q, body))
                }
                "true" => Err(self.error("a program")),
                _ => Ok(Program::Act(self.compound()?)),
            },
            Tok::Question => {
                self.next();
                let q = self.paren_query()?;
                Ok(Program::cond(q, self.block()?))
            }
            Tok::BangQuestion => {
                self.next();
                let q = self.paren_query()?;
                Ok(Program::neg_cond(q, self.block()?))
            }
            Tok::LParen => {
                self.next();
                let p = self.program()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            _ => Err(self.error("a program")),
        }
    }

    fn block(&mut self) -> Result<Program, ParseError> {
        self.expect(Tok::LBrace)?;
        let p = self.program()?;
        self.expect(Tok::RBrace)?;
        Ok(p)
    }

    fn paren_query(&mut self) -> Result<Query, ParseError> {
        self.expect(Tok::LParen)?;
        let q = self.query()?;
        self.expect(Tok::RParen)?;
        Ok(q)
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let mut lits = Vec::new();
        loop {
            match self.peek() {
                Tok::Lower(n) if n == "true" => {
                    self.next();
                }
                Tok::Bang => {
                    self.next();
                    lits.push(Literal::neg(self.compound()?));
                }
                _ => lits.push(Literal::pos(self.compound()?)),
            }
            if *self.peek() != Tok::Amp {
                break;
            }
            self.next();
        }
        Ok(Query::new(lits))
    }

    /// `ident ["(" term ("," term)* ")"]`, not a keyword.
    fn compound(&mut self) -> Result<Atom, ParseError> {
        let name = match self.peek() {
            Tok::Lower(n) if !KEYWORDS.contains(&n.as_str()) => n.clone(),
            _ => return Err(self.error("an identifier")),
        };
        self.next();
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            loop {
                args.push(self.term()?);
                match self.next() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("`,` or `)`"));
                    }
                }
            }
        }
        Ok(Atom::new(&name, args))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Lower(n) if !KEYWORDS.contains(&n.as_str()) => {
                self.next();
                Ok(Term::constant(&n))
            }
            Tok::Upper(n) => {
                self.next();
                Ok(Term::var(&n))
            }
            Tok::Int(i) => {
                self.next();
                Ok(Term::Int(i))
            }
            _ => Err(self.error("a term")),
        }
    }
}

/// Parses a complete program.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let prog = p.program()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("`+`, `||`, `;` or end of input"));
    }
    Ok(prog)
}

/// Parses a standalone query such as `at_safe & carrying(V)`.
pub fn parse_query(src: &str) -> Result<Query, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let q = p.query()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("`&` or end of input"));
    }
    Ok(q)
}

/// Canonical, fully parenthesized text.
pub fn format_program(p: &Program) -> String {
    canonicalize(p).to_string()
}
