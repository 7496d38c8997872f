//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' INTEGER)*
//! primary := NUMBER | VAR | 'pi' | FUNC '(' expr ')' | '(' expr ')'
//! ```

use super::{BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok<'a> {
    Num(f64, &'a str),
    Ident(&'a str),
    Op(char),
    LParen,
    RParen,
}

fn error(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok<'_>)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Tok::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| error(start, format!("malformed number '{lit}'")))?;
                out.push((start, Tok::Num(v, lit)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(&text[start..i])));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(error(i, format!("unexpected character '{ch}'")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while let Some(Tok::Op('^')) = self.peek() {
            self.bump();
            let at = self.offset();
            match self.bump() {
                Some(Tok::Num(_, lit)) if lit.bytes().all(|b| b.is_ascii_digit()) => {
                    let n: u32 = lit
                        .parse()
                        .map_err(|_| error(at, format!("exponent '{lit}' too large")))?;
                    base = Expr::pow(base, n);
                }
                _ => return Err(error(at, "exponent must be a nonnegative integer literal")),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Num(v, _)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen(at)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => match name {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "t" => Ok(Expr::Var(Var::T)),
                "u" => Ok(Expr::Var(Var::U)),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                _ => {
                    let Some(func) = Func::from_name(name) else {
                        return Err(error(at, format!("unknown identifier '{name}'")));
                    };
                    let open = self.offset();
                    if self.bump() != Some(Tok::LParen) {
                        return Err(error(open, format!("expected '(' after '{name}'")));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen(open)?;
                    Ok(Expr::call(func, arg))
                }
            },
            Some(Tok::RParen) => Err(error(at, "unbalanced ')'")),
            Some(Tok::Op(c)) => Err(error(at, format!("unexpected operator '{c}'"))),
            None => Err(error(at, "unexpected end of input")),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<()> {
        match self.bump() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(error(open, "unbalanced '('")),
        }
    }
}

/// Parse expression text. Errors carry the byte offset of the problem.
pub fn parse(text: &str) -> Result<Expr> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(error(0, "empty expression"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        let at = p.offset();
        return Err(match p.peek() {
            Some(Tok::RParen) => error(at, "unbalanced ')'"),
            _ => error(at, "unexpected trailing input"),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Env;

    fn at(s: &str, x: f64) -> f64 {
        parse(s).unwrap().eval(&Env::new().with(Var::X, x)).unwrap()
    }

    fn offset(s: &str) -> usize {
        match parse(s) {
            Err(Error::Parse { offset, .. }) => offset,
            other => panic!("expected parse error for {s:?}, got {other:?}"),
        }
    }

    #[test]
    fn precedence() {
        assert_eq!(at("2+3*4", 0.0), 14.0);
        assert!((at("sin(pi*x)", 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(at("-x^2", 2.0), -4.0);
        assert_eq!(at("2*-x", 3.0), -6.0);
        assert_eq!(at("8/2/2", 0.0), 2.0);
        assert_eq!(at("8-2-2", 0.0), 4.0);
        assert_eq!(at("x^2^3", 2.0), 64.0);
        assert_eq!(at(" ( 1 +2 ) *\t3 ", 0.0), 9.0);
        assert_eq!(at("1.5e1 + .5", 0.0), 15.5);
    }

    #[test]
    fn errors_with_offsets() {
        assert_eq!(offset(""), 0);
        assert_eq!(offset("   "), 0);
        assert_eq!(offset("foo + 1"), 0);
        assert_eq!(offset("1 + z"), 4);
        assert_eq!(offset("(1 + 2"), 0);
        assert_eq!(offset("1 + 2)"), 5);
        assert_eq!(offset("x^2.5"), 2);
        assert_eq!(offset("x^-1"), 2);
        assert_eq!(offset("x^y"), 2);
        assert_eq!(offset("sin x"), 4);
        assert_eq!(offset("1 $ 2"), 2);
        assert_eq!(offset("2 3"), 2);
    }
}
