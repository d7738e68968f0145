//! Printing in the parser's grammar with minimal parentheses.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::{BinOp, Expr, Node};
use crate::Rational;

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;
const UNARY: u8 = 4;
const ATOM: u8 = 5;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Num(q) if q.is_negative() => UNARY,
        Node::Num(_) => ATOM,
        Node::Var(_) | Node::Param(_) | Node::Func(..) => ATOM,
        Node::Neg(_) => UNARY,
        Node::Binary(op, ..) => match op {
            BinOp::Add | BinOp::Sub => SUM,
            BinOp::Mul | BinOp::Div => PRODUCT,
            BinOp::Pow => POWER,
        },
    }
}

fn write_child(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if precedence(e) < min {
        f.write_str("(")?;
        write_expr(e, f)?;
        f.write_str(")")
    } else {
        write_expr(e, f)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Num(q) => write_number(q, f),
        Node::Var(v) => f.write_str(v.name()),
        Node::Param(p) => f.write_str(p),
        Node::Func(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_expr(arg, f)?;
            f.write_str(")")
        }
        Node::Neg(a) => {
            f.write_str("-")?;
            // `-2` would read back as a negative literal rather than a negation.
            let literal = matches!(a.node(), Node::Num(q) if !q.is_negative());
            if literal {
                f.write_str("(")?;
                write_expr(a, f)?;
                f.write_str(")")
            } else {
                write_child(a, UNARY, f)
            }
        }
        Node::Binary(op, a, b) => {
            let (sym, left, right) = match op {
                BinOp::Add => (" + ", SUM, PRODUCT),
                BinOp::Sub => (" - ", SUM, PRODUCT),
                BinOp::Mul => ("*", PRODUCT, POWER),
                BinOp::Div => ("/", PRODUCT, POWER),
                BinOp::Pow => ("^", ATOM, POWER),
            };
            write_child(a, left, f)?;
            f.write_str(sym)?;
            write_child(b, right, f)
        }
    }
}

fn write_number(q: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match decimal_digits(q) {
        Some(text) => f.write_str(&text),
        None => write!(f, "({}/{})", q.numer(), q.denom()),
    }
}

/// Exact decimal expansion when the denominator has only factors 2 and 5.
fn decimal_digits(q: &Rational) -> Option<String> {
    let mut den = q.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den != BigInt::from(1) {
        return None;
    }
    let places = twos.max(fives);
    let scaled = q.numer() * num_traits::pow(BigInt::from(10), places) / q.denom();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if places == 0 {
        out.push_str(&digits);
    } else if digits.len() <= places {
        out.push_str("0.");
        out.push_str(&"0".repeat(places - digits.len()));
        out.push_str(&digits);
    } else {
        let (int, frac) = digits.split_at(digits.len() - places);
        out.push_str(int);
        out.push('.');
        out.push_str(frac);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Expr};

    fn roundtrip(text: &str) -> String {
        parse(text).unwrap().to_string()
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(roundtrip("r^2 - 2*z^2"), "r^2 - 2*z^2");
        assert_eq!(roundtrip("(r+z)*(r-z)"), "(r + z)*(r - z)");
        assert_eq!(roundtrip("r - (z - 1)"), "r - (z - 1)");
        assert_eq!(roundtrip("(r - z) - 1"), "r - z - 1");
        assert_eq!(roundtrip("r/(z*C)"), "r/(z*C)");
        assert_eq!(roundtrip("(r^2)^3"), "(r^2)^3");
        assert_eq!(roundtrip("r^2^3"), "r^2^3");
        assert_eq!(roundtrip("-(r^2)"), "-(r^2)");
        // a negated base is bracketed so it cannot be misread as -(r^2)
        assert_eq!(roundtrip("-r^2"), "(-r)^2");
        assert_eq!(roundtrip("(-2)^2"), "(-2)^2");
    }

    #[test]
    fn literals() {
        assert_eq!(Expr::frac(1, 4).to_string(), "0.25");
        assert_eq!(Expr::frac(-3, 40).to_string(), "-0.075");
        assert_eq!(Expr::frac(1, 3).to_string(), "(1/3)");
        assert_eq!((-Expr::num(2)).to_string(), "-(2)");
        assert_eq!(roundtrip("--2"), "--2");
    }
}
