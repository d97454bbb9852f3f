//! Tiny arithmetic expression grammar for config-defined scalar fields:
//! +, -, *, /, ^, parentheses, the names x, y, t, and the functions
//! sin, cos, exp, sqrt.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    T,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::T => t,
            Expr::Neg(e) => -e.eval(x, y, t),
            Expr::Add(a, b) => a.eval(x, y, t) + b.eval(x, y, t),
            Expr::Sub(a, b) => a.eval(x, y, t) - b.eval(x, y, t),
            Expr::Mul(a, b) => a.eval(x, y, t) * b.eval(x, y, t),
            Expr::Div(a, b) => a.eval(x, y, t) / b.eval(x, y, t),
            Expr::Pow(a, b) => a.eval(x, y, t).powf(b.eval(x, y, t)),
            Expr::Sin(e) => e.eval(x, y, t).sin(),
            Expr::Cos(e) => e.eval(x, y, t).cos(),
            Expr::Exp(e) => e.eval(x, y, t).exp(),
            Expr::Sqrt(e) => e.eval(x, y, t).sqrt(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Config(format!(
            "expression parse error at byte {}: {msg}",
            self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        self.unary()
    }

    // Unary minus binds looser than ^, so -x^2 = -(x^2).
    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // Right-associative exponentiation; the exponent may carry a sign.
    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .src
                    .get(self.pos + 1)
                    .map(|&d| d.is_ascii_digit() || d == b'+' || d == b'-')
                    .unwrap_or(false)
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.error(&format!("bad number '{text}'")))
    }

    fn name(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "x" => Ok(Expr::X),
            "y" => Ok(Expr::Y),
            "t" => Ok(Expr::T),
            "sin" | "cos" | "exp" | "sqrt" => {
                if self.peek() != Some(b'(') {
                    return Err(self.error(&format!("function '{name}' needs '('")));
                }
                self.pos += 1;
                let arg = Box::new(self.expr()?);
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(match name {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    "exp" => Expr::Exp(arg),
                    _ => Expr::Sqrt(arg),
                })
            }
            other => Err(self.error(&format!("unknown name '{other}'"))),
        }
    }
}

/// Parse a value expression.
pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_precedence() {
        let e = parse("1 + 2 * 3").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 7.0);
        let e = parse("(1 + 2) * 3 - 4 / 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 7.0);
        let e = parse("2 ^ 3 ^ 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 512.0);
        let e = parse("-x^2 + y*t").unwrap();
        assert_eq!(e.eval(3.0, 2.0, 5.0), -9.0 + 10.0);
    }

    #[test]
    fn functions() {
        let e = parse("sin(x) * cos(y) + exp(0) + sqrt(4)").unwrap();
        assert!((e.eval(0.0, 0.0, 0.0) - 3.0).abs() < 1e-15);
        let e = parse("exp(-(x - 0.5)^2)").unwrap();
        assert!((e.eval(0.5, 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scientific_numbers() {
        assert_eq!(parse("1e-3").unwrap().eval(0.0, 0.0, 0.0), 1e-3);
        assert_eq!(parse("2.5E+2").unwrap().eval(0.0, 0.0, 0.0), 250.0);
    }

    #[test]
    fn errors_carry_positions() {
        for bad in ["1 +", "sin x", "foo(2)", "(1", "1 2"] {
            match parse(bad) {
                Err(Error::Config(msg)) => assert!(msg.contains("byte"), "{msg}"),
                other => panic!("expected parse error for {bad:?}, got {other:?}"),
            }
        }
    }
}
