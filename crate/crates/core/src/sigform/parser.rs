//! Recursive-descent parser for the textual formula grammar.
//!
//! ```text
//! formula := rational | atom | "half(" formula ")" | "not(" formula ")"
//!          | ("sub"|"add"|"min"|"max"|"absdiff") "(" formula "," formula ")"
//!          | ("sup"|"inf") ident ":" ident "." formula
//! atom    := "d(" term "," term ")" | ident "(" term ("," term)* ")"
//! term    := ident | ident "(" term ("," term)* ")"
//! ```
//!
//! Identifiers may carry a bracketed parameter (`lam[3/2]`). In term
//! position numerals such as `1` name constant symbols.

use super::formula::{BinOp, Expr, Formula, Quantifier, Term};
use super::signature::{Signature, SortId};
use crate::real::{parse_rational, Rational};
use crate::Error;

pub const KEYWORDS: [&str; 10] = ["d", "half", "not", "sub", "add", "min", "max", "absdiff", "sup", "inf"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, Error> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let done = t.1 == Tok::End;
            out.push(t);
            if done {
                return Ok(out);
            }
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek_char() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), Error> {
        self.eat_while(char::is_whitespace);
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok((start, Tok::End));
        };
        let single = |t| Ok((start, t));
        match c {
            '(' | ')' | ',' | ':' | '.' => {
                self.pos += 1;
                match c {
                    '(' => single(Tok::LParen),
                    ')' => single(Tok::RParen),
                    ',' => single(Tok::Comma),
                    ':' => single(Tok::Colon),
                    _ => single(Tok::Dot),
                }
            }
            c if c.is_ascii_digit() => {
                self.eat_while(|c| c.is_ascii_digit());
                let rest = &self.src[self.pos..];
                if rest.starts_with('.') && rest[1..].starts_with(|c: char| c.is_ascii_digit()) {
                    self.pos += 1;
                    self.eat_while(|c| c.is_ascii_digit());
                } else if rest.starts_with('/') {
                    self.pos += 1;
                    let before = self.pos;
                    self.eat_while(|c| c.is_ascii_digit());
                    if self.pos == before {
                        return Err(Error::Parse {
                            pos: self.pos,
                            msg: "expected digits after `/`".into(),
                        });
                    }
                }
                Ok((start, Tok::Number(self.src[start..self.pos].to_string())))
            }
            c if c.is_alphabetic() || c == '_' => {
                self.eat_while(|c| c.is_alphanumeric() || c == '_' || c == '\'');
                if self.peek_char() == Some('[') {
                    match self.src[self.pos..].find(']') {
                        Some(close) => self.pos += close + 1,
                        None => {
                            return Err(Error::Parse {
                                pos: self.pos,
                                msg: "unterminated `[` in identifier".into(),
                            })
                        }
                    }
                }
                Ok((start, Tok::Word(self.src[start..self.pos].to_string())))
            }
            other => Err(Error::Parse {
                pos: start,
                msg: format!("unexpected character `{other}`"),
            }),
        }
    }
}

struct Parser<'s> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    sig: &'s Signature,
    bound: Vec<String>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, Error> {
        Err(Error::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), Error> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, Error> {
        match self.peek().clone() {
            Tok::Word(w) if !w.contains('[') => {
                self.bump();
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn formula(&mut self) -> Result<Expr, Error> {
        match self.peek().clone() {
            Tok::Number(text) => {
                let q = parse_rational(&text).ok_or_else(|| Error::Parse {
                    pos: self.pos(),
                    msg: format!("bad rational `{text}`"),
                })?;
                self.bump();
                Ok(Expr::Const(q))
            }
            Tok::Word(w) => {
                let q = match w.as_str() {
                    "sup" => Some(Quantifier::Sup),
                    "inf" => Some(Quantifier::Inf),
                    _ => None,
                };
                if let Some(q) = q {
                    if matches!(self.peek2(), Tok::Word(_)) {
                        self.bump();
                        return self.quantifier(q);
                    }
                }
                self.bump();
                if *self.peek() != Tok::LParen {
                    return self.err(format!("expected `(` after `{w}`"));
                }
                self.bump();
                let e = match w.as_str() {
                    "half" => Expr::Half(Box::new(self.formula()?)),
                    "not" => Expr::Not(Box::new(self.formula()?)),
                    "d" => {
                        let a = self.term()?;
                        self.expect(Tok::Comma, "`,` in d(_, _)")?;
                        let b = self.term()?;
                        Expr::Dist(a, b)
                    }
                    kw => match BinOp::from_keyword(kw) {
                        Some(op) => {
                            let a = self.formula()?;
                            if *self.peek() != Tok::Comma {
                                return self.err(format!("`{kw}` takes 2 arguments"));
                            }
                            self.bump();
                            let b = self.formula()?;
                            Expr::bin(op, a, b)
                        }
                        None => {
                            if !self.sig.has_symbol(kw) {
                                return self.err(format!("unknown predicate `{kw}`"));
                            }
                            Expr::Atom(kw.to_string(), self.term_list()?)
                        }
                    },
                };
                if *self.peek() != Tok::RParen {
                    let what = match &e {
                        Expr::Half(_) | Expr::Not(_) => format!("`{w}` takes 1 argument"),
                        _ => "expected `)`".to_string(),
                    };
                    return self.err(what);
                }
                self.bump();
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            _ => self.err("expected a formula"),
        }
    }

    fn quantifier(&mut self, q: Quantifier) -> Result<Expr, Error> {
        let var = self.ident("a variable name")?;
        self.expect(Tok::Colon, "`:` after the bound variable")?;
        let sort = self.ident("a sort name")?;
        if self.sig.sort_id(&sort).is_none() {
            return self.err(format!("unknown sort `{sort}`"));
        }
        self.expect(Tok::Dot, "`.` after the binder")?;
        self.bound.push(var.clone());
        let body = self.formula();
        self.bound.pop();
        Ok(Expr::Quant(q, var, sort, Box::new(body?)))
    }

    fn term_list(&mut self) -> Result<Vec<Term>, Error> {
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.term()?);
        }
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, Error> {
        let name = match self.peek().clone() {
            Tok::Word(w) | Tok::Number(w) => w,
            _ => return self.err("expected a term"),
        };
        let numeral = matches!(self.peek(), Tok::Number(_));
        self.bump();
        if *self.peek() == Tok::LParen {
            if !self.sig.has_symbol(&name) {
                return self.err(format!("unknown function `{name}`"));
            }
            self.bump();
            let args = self.term_list()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Term::App(name, args));
        }
        if self.bound.contains(&name) {
            return Ok(Term::Var(name));
        }
        if self.sig.is_constant(&name) {
            return Ok(Term::App(name, Vec::new()));
        }
        if numeral || name.contains('[') {
            return self.err(format!("unknown constant `{name}`"));
        }
        Ok(Term::Var(name))
    }
}

/// Parses and sort-checks with cap `C = 1`.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, Error> {
    parse_formula_with(text, sig, Rational::from_integer(1), &[])
}

pub fn parse_formula_with(text: &str, sig: &Signature, cap: Rational, declared: &[(&str, SortId)]) -> Result<Formula, Error> {
    let expr = parse_expr(text, sig)?;
    Formula::with_free(expr, sig, cap, declared)
}

/// Parses without sort checking.
pub fn parse_expr(text: &str, sig: &Signature) -> Result<Expr, Error> {
    let mut p = Parser {
        toks: Lexer::tokens(text)?,
        at: 0,
        sig,
        bound: Vec::new(),
    };
    let e = p.formula()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input after formula");
    }
    Ok(e)
}
