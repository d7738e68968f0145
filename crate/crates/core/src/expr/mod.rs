//! Immutable symbolic expressions in the coordinates `r`, `z` and named
//! parameters.
//!
//! Nodes are reference counted, so derivatives share subtrees with their
//! source expression. Differentiation and folding memoize on node identity,
//! and [`Tape`] compilation eliminates common subexpressions, which keeps
//! third derivatives of the ansatz family cheap to evaluate.

mod diff;
mod eval;
mod fold;
mod parse;
mod print;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::Rational;

pub use eval::{EvalError, Params, Point, Tape};
pub use parse::parse;

/// Coordinate variables. Every other identifier is a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    R,
    Z,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::R => "r",
            Var::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Ln,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "ln" => Some(Func::Ln),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Num(Rational),
    Var(Var),
    Param(Arc<str>),
    Neg(Expr),
    Binary(BinOp, Expr, Expr),
    Func(Func, Expr),
}

/// Shared handle to an immutable expression node.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn num(n: i64) -> Self {
        Expr::rational(Rational::from_integer(BigInt::from(n)))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Expr::rational(Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn rational(q: Rational) -> Self {
        Expr::new(Node::Num(q))
    }

    /// Exact rational image of a finite double.
    pub fn from_f64(x: f64) -> Option<Self> {
        Rational::from_float(x).map(Expr::rational)
    }

    pub fn zero() -> Self {
        Expr::num(0)
    }

    pub fn one() -> Self {
        Expr::num(1)
    }

    pub fn r() -> Self {
        Expr::new(Node::Var(Var::R))
    }

    pub fn z() -> Self {
        Expr::new(Node::Var(Var::Z))
    }

    pub fn var(v: Var) -> Self {
        Expr::new(Node::Var(v))
    }

    pub fn param(name: &str) -> Self {
        Expr::new(Node::Param(Arc::from(name)))
    }

    fn binary(op: BinOp, a: &Expr, b: &Expr) -> Self {
        Expr::new(Node::Binary(op, a.clone(), b.clone()))
    }

    fn func(f: Func, a: &Expr) -> Self {
        Expr::new(Node::Func(f, a.clone()))
    }

    pub fn pow(&self, exponent: &Expr) -> Self {
        Expr::binary(BinOp::Pow, self, exponent)
    }

    pub fn powi(&self, n: i64) -> Self {
        self.pow(&Expr::num(n))
    }

    pub fn ln(&self) -> Self {
        Expr::func(Func::Ln, self)
    }

    pub fn exp(&self) -> Self {
        Expr::func(Func::Exp, self)
    }

    pub fn sqrt(&self) -> Self {
        Expr::func(Func::Sqrt, self)
    }

    pub fn abs(&self) -> Self {
        Expr::func(Func::Abs, self)
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_rational().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(One::is_one)
    }

    /// Symbolic partial derivative. The result is not folded; see [`Expr::d`].
    pub fn diff(&self, var: Var) -> Expr {
        diff::diff(self, var)
    }

    pub fn fold(&self) -> Expr {
        fold::fold(self)
    }

    /// Folded partial derivative, the form every higher-level operator uses.
    pub fn d(&self, var: Var) -> Expr {
        self.diff(var).fold()
    }

    pub fn dr(&self) -> Expr {
        self.d(Var::R)
    }

    pub fn dz(&self) -> Expr {
        self.d(Var::Z)
    }

    /// Evaluates at a point with all parameters bound.
    pub fn eval<T: crate::Real>(&self, params: &Params, pt: Point<T>) -> Result<T, EvalError> {
        Tape::compile(self, params)?.eval(pt)
    }

    pub fn compile(&self, params: &Params) -> Result<Tape, EvalError> {
        Tape::compile(self, params)
    }

    /// Replaces parameters bound in `params` by exact literals.
    pub fn bind(&self, params: &Params) -> Expr {
        let mut memo = std::collections::HashMap::new();
        bind_rec(self, params, &mut memo)
    }

    /// Names of all parameters appearing in the expression, sorted.
    pub fn params(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.node() {
                Node::Param(p) => {
                    out.insert(p.to_string());
                }
                Node::Neg(a) | Node::Func(_, a) => stack.push(a.clone()),
                Node::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Node::Num(_) | Node::Var(_) => {}
            }
        }
        out.into_iter().collect()
    }

    /// Number of distinct nodes (shared subtrees counted once).
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.node() {
                Node::Neg(a) | Node::Func(_, a) => stack.push(a.clone()),
                Node::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Node::Num(_) | Node::Var(_) | Node::Param(_) => {}
            }
        }
        seen.len()
    }

    /// Sum of a list of expressions; empty sums are zero.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut iter = terms.into_iter();
        match iter.next() {
            None => Expr::zero(),
            Some(first) => iter.fold(first, |acc, t| &acc + &t),
        }
    }
}

fn bind_rec(e: &Expr, params: &Params, memo: &mut std::collections::HashMap<usize, Expr>) -> Expr {
    if let Some(done) = memo.get(&e.id()) {
        return done.clone();
    }
    let out = match e.node() {
        Node::Param(name) => match params.get(name).ok().and_then(Expr::from_f64) {
            Some(lit) => lit,
            None => e.clone(),
        },
        Node::Num(_) | Node::Var(_) => e.clone(),
        Node::Neg(a) => -&bind_rec(a, params, memo),
        Node::Func(f, a) => Expr::func(*f, &bind_rec(a, params, memo)),
        Node::Binary(op, a, b) => {
            let a = bind_rec(a, params, memo);
            let b = bind_rec(b, params, memo);
            Expr::binary(*op, &a, &b)
        }
    };
    memo.insert(e.id(), out.clone());
    out
}

pub(crate) fn rational_to_f64(q: &Rational) -> f64 {
    if let Some(x) = q.to_f64() {
        return x;
    }
    // Fall back for ratios whose parts overflow f64 individually.
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let (n, d) = (q.numer().abs(), q.denom().clone());
    let shift = n.bits() as i64 - d.bits() as i64;
    let scaled = if shift > 0 { Rational::new(n, d << (shift as usize)) } else { Rational::new(n << ((-shift) as usize), d) };
    sign * scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl std::ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, &self, &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, &self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, &rhs)
            }
        }
        impl std::ops::$trait<i64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                Expr::binary($op, self, &Expr::num(rhs))
            }
        }
        impl std::ops::$trait<i64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                Expr::binary($op, &self, &Expr::num(rhs))
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Neg(self.clone()))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Neg(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// `r² + z²`, used throughout.
pub fn rho2() -> Expr {
    Expr::r().powi(2) + Expr::z().powi(2)
}

/// `√(r² + z²)`.
pub fn rho() -> Expr {
    rho2().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_collected_sorted() {
        let e = parse("C1*r + K/C - kappa").unwrap();
        assert_eq!(e.params(), vec!["C", "C1", "K", "kappa"]);
    }

    #[test]
    fn bind_substitutes_exactly() {
        let e = parse("C*r").unwrap();
        let p = Params::new().with("C", 0.5);
        assert_eq!(e.bind(&p).to_string(), "0.5*r");
    }

    #[test]
    fn huge_rationals_convert() {
        let q = Rational::new(BigInt::from(10).pow(400u32), BigInt::from(10).pow(399u32));
        assert!((rational_to_f64(&q) - 10.0).abs() < 1e-12);
    }
}
