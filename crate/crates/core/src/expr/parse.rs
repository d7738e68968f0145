//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-r^2` is `(-r)^2`. A minus sign
//! directly in front of a number literal produces a negative literal.

use num_bigint::BigInt;
use num_traits::Zero;

use super::{Expr, ExprError, Func, Node, Var};
use crate::Rational;

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
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

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = lhs * self.factor()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = lhs / self.factor()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(base.pow(&exponent));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                let q = self.number()?;
                return Ok(Expr::rational(-q));
            }
            let inner = self.unary()?;
            return Ok(-inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::rational(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
                if self.peek() == Some(b'(') {
                    let func = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction { name: name.to_string(), offset: start })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::new(Node::Func(func, arg)));
                }
                Ok(match name {
                    "r" => Expr::var(Var::R),
                    "z" => Expr::var(Var::Z),
                    _ => Expr::param(name),
                })
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    /// Decimal literal with optional fraction and exponent, converted exactly.
    fn number(&mut self) -> Result<Rational, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len: i64 = 0;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_digit() {
                digits.push(c as char);
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while let Some(&c) = self.src.get(self.pos) {
                if c.is_ascii_digit() {
                    digits.push(c as char);
                    frac_len += 1;
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        if digits.is_empty() {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        let mut exponent: i64 = 0;
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            match self.src.get(self.pos) {
                Some(b'+') => self.pos += 1,
                Some(b'-') => {
                    sign = -1;
                    self.pos += 1;
                }
                _ => {}
            }
            let exp_start = self.pos;
            while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if exp_start == self.pos {
                // `2e` is a literal followed by an identifier, which the
                // caller rejects as trailing input.
                self.pos = save;
            } else {
                let text = std::str::from_utf8(&self.src[exp_start..self.pos]).expect("ascii");
                exponent = sign * text.parse::<i64>().map_err(|_| self.error("exponent out of range"))?;
            }
        }
        let mantissa: BigInt = digits.parse().expect("digit string");
        let scale = exponent - frac_len;
        if scale.unsigned_abs() > 4096 {
            return Err(self.error("exponent out of range"));
        }
        let ten = BigInt::from(10u32);
        let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
        Ok(if scale >= 0 {
            Rational::from_integer(mantissa * pow)
        } else if mantissa.is_zero() {
            Rational::zero()
        } else {
            Rational::new(mantissa, pow)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BinOp;

    fn num(n: i64) -> Expr {
        Expr::num(n)
    }

    #[test]
    fn polynomial_structure() {
        let e = parse("r^2 - 2*z^2").unwrap();
        let expected = Expr::r().pow(&num(2)) - num(2) * Expr::z().pow(&num(2));
        assert_eq!(e, expected);
    }

    #[test]
    fn function_call() {
        assert_eq!(parse("ln(r)").unwrap(), Expr::r().ln());
    }

    #[test]
    fn nested_reciprocal_sqrt() {
        let e = parse("1/sqrt(r^2+z^2)").unwrap();
        let inner = Expr::r().pow(&num(2)) + Expr::z().pow(&num(2));
        assert_eq!(e, num(1) / inner.sqrt());
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("r^2^3").unwrap();
        assert_eq!(e, Expr::r().pow(&num(2).pow(&num(3))));
    }

    #[test]
    fn unary_minus_binds_tighter_than_power() {
        let e = parse("-r^2").unwrap();
        assert_eq!(e, (-Expr::r()).pow(&num(2)));
        let lit = parse("-2^2").unwrap();
        assert_eq!(lit, num(-2).pow(&num(2)));
    }

    #[test]
    fn decimals_are_exact() {
        let e = parse("0.1").unwrap();
        assert_eq!(e, Expr::frac(1, 10));
        assert_eq!(parse("2.5e-3").unwrap(), Expr::frac(1, 400));
        assert_eq!(parse("1E2").unwrap(), num(100));
    }

    #[test]
    fn identifiers_become_parameters() {
        let e = parse("C1_x*r").unwrap();
        match e.node() {
            Node::Binary(BinOp::Mul, a, _) => assert_eq!(a, &Expr::param("C1_x")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("r + * z") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse("(r + z") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("unexpected {other:?}"),
        }
        match parse("sin(r)") {
            Err(ExprError::UnknownFunction { name, offset }) => {
                assert_eq!(name, "sin");
                assert_eq!(offset, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("").is_err());
        assert!(parse("r z").is_err());
    }
}
