//! Point evaluation through a compiled, deduplicated instruction tape.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{rational_to_f64, BinOp, Expr, Func, Node, Var};
use crate::Real;

/// Parameter bindings. Every parameter of an evaluated expression must be bound.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64, EvalError> {
        self.0.get(name).copied().ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Bindings of `other` override those of `self`.
    pub fn merged(&self, other: &Params) -> Params {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }
}

/// A point `(r, z)` of the meridian half-plane, `r > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T = f64> {
    pub r: T,
    pub z: T,
}

impl<T: Real> Point<T> {
    pub fn new(r: T, z: T) -> Self {
        Point { r, z }
    }

    pub fn is_valid(&self) -> bool {
        self.r > T::zero() && self.r.is_finite() && self.z.is_finite()
    }

    pub fn to_f64(self) -> Point<f64> {
        Point { r: self.r.to_f64_lossy(), z: self.z.to_f64_lossy() }
    }

    pub fn cast<U: Real>(self) -> Point<U> {
        Point { r: U::lit(self.r.to_f64_lossy()), z: U::lit(self.z.to_f64_lossy()) }
    }
}

impl<T: fmt::Display> fmt::Display for Point<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.r, self.z)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error("point {0} is off the half-plane r > 0")]
    OffDomain(Point<f64>),
    #[error("{op} undefined at {point}")]
    Domain { op: &'static str, point: Point<f64> },
    #[error("non-finite value at {0}")]
    NonFinite(Point<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Const(u64),
    R,
    Z,
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    PowI(u32, i32),
    Pow(u32, u32),
    Ln(u32),
    Exp(u32),
    Sqrt(u32),
    Abs(u32),
}

/// Straight-line program for an expression with parameters substituted.
///
/// Structurally identical subexpressions are computed once.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
}

const MAX_POWI: i64 = 64;

impl Tape {
    pub fn compile(e: &Expr, params: &Params) -> Result<Tape, EvalError> {
        let mut b = Builder { ops: Vec::new(), by_op: HashMap::new(), by_node: HashMap::new(), params };
        b.emit(e)?;
        Ok(Tape { ops: b.ops })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Evaluates the program; undefined operations and non-finite results are errors.
    pub fn eval<T: Real>(&self, pt: Point<T>) -> Result<T, EvalError> {
        if !pt.is_valid() {
            return Err(EvalError::OffDomain(pt.to_f64()));
        }
        let mut slots: Vec<T> = Vec::with_capacity(self.ops.len());
        let fail = |op: &'static str| EvalError::Domain { op, point: pt.to_f64() };
        for op in &self.ops {
            let at = |i: &u32| slots[*i as usize];
            let v = match op {
                Op::Const(bits) => T::lit(f64::from_bits(*bits)),
                Op::R => pt.r,
                Op::Z => pt.z,
                Op::Neg(a) => -at(a),
                Op::Add(a, b) => at(a) + at(b),
                Op::Sub(a, b) => at(a) - at(b),
                Op::Mul(a, b) => at(a) * at(b),
                Op::Div(a, b) => {
                    let d = at(b);
                    if d == T::zero() {
                        return Err(fail("division"));
                    }
                    at(a) / d
                }
                Op::PowI(a, n) => {
                    let x = at(a);
                    if x == T::zero() && *n < 0 {
                        return Err(fail("negative power of zero"));
                    }
                    x.powi(*n)
                }
                Op::Pow(a, b) => {
                    let (x, y) = (at(a), at(b));
                    let yi = y.round();
                    if y == yi && yi.abs() <= T::lit(MAX_POWI as f64) {
                        let n = yi.to_i32().expect("bounded integer exponent");
                        if x == T::zero() && n < 0 {
                            return Err(fail("negative power of zero"));
                        }
                        x.powi(n)
                    } else if x > T::zero() {
                        (y * x.ln()).exp()
                    } else {
                        return Err(fail("real power of non-positive base"));
                    }
                }
                Op::Ln(a) => {
                    let x = at(a);
                    if x <= T::zero() {
                        return Err(fail("logarithm of non-positive argument"));
                    }
                    x.ln()
                }
                Op::Exp(a) => at(a).exp(),
                Op::Sqrt(a) => {
                    let x = at(a);
                    if x < T::zero() {
                        return Err(fail("square root of negative argument"));
                    }
                    x.sqrt()
                }
                Op::Abs(a) => at(a).abs(),
            };
            if !v.is_finite() {
                return Err(EvalError::NonFinite(pt.to_f64()));
            }
            slots.push(v);
        }
        slots.last().copied().ok_or(EvalError::NonFinite(pt.to_f64()))
    }
}

struct Builder<'p> {
    ops: Vec<Op>,
    by_op: HashMap<Op, u32>,
    by_node: HashMap<usize, u32>,
    params: &'p Params,
}

impl Builder<'_> {
    fn push(&mut self, op: Op) -> u32 {
        if let Some(&slot) = self.by_op.get(&op) {
            return slot;
        }
        let slot = self.ops.len() as u32;
        self.ops.push(op);
        self.by_op.insert(op, slot);
        slot
    }

    fn constant(&mut self, x: f64) -> u32 {
        self.push(Op::Const(x.to_bits()))
    }

    fn emit(&mut self, e: &Expr) -> Result<u32, EvalError> {
        if let Some(&slot) = self.by_node.get(&e.id()) {
            return Ok(slot);
        }
        let slot = match e.node() {
            Node::Num(q) => self.constant(rational_to_f64(q)),
            Node::Var(Var::R) => self.push(Op::R),
            Node::Var(Var::Z) => self.push(Op::Z),
            Node::Param(name) => {
                let v = self.params.get(name)?;
                self.constant(v)
            }
            Node::Neg(a) => {
                let a = self.emit(a)?;
                self.push(Op::Neg(a))
            }
            Node::Func(f, a) => {
                let a = self.emit(a)?;
                self.push(match f {
                    Func::Ln => Op::Ln(a),
                    Func::Exp => Op::Exp(a),
                    Func::Sqrt => Op::Sqrt(a),
                    Func::Abs => Op::Abs(a),
                })
            }
            Node::Binary(BinOp::Pow, a, b) => {
                let base = self.emit(a)?;
                match b.as_rational().filter(|q| q.is_integer()) {
                    Some(q) if q.to_integer().to_i64().is_some_and(|n| n.abs() <= MAX_POWI) => {
                        let n = q.to_integer().to_i64().expect("checked") as i32;
                        self.push(Op::PowI(base, n))
                    }
                    _ => {
                        let exp = self.emit(b)?;
                        self.push(Op::Pow(base, exp))
                    }
                }
            }
            Node::Binary(op, a, b) => {
                let a = self.emit(a)?;
                let b = self.emit(b)?;
                self.push(match op {
                    BinOp::Add => Op::Add(a, b),
                    BinOp::Sub => Op::Sub(a, b),
                    BinOp::Mul => Op::Mul(a, b),
                    BinOp::Div => Op::Div(a, b),
                    BinOp::Pow => unreachable!("handled above"),
                })
            }
        };
        self.by_node.insert(e.id(), slot);
        Ok(slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn log_at_e() {
        let e = parse("ln(r)").unwrap();
        let v = e.eval(&Params::new(), Point::<f64>::new(std::f64::consts::E, 0.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ansatz_potential_at_unit_point() {
        let e = parse("-8*C/(r^2+z^2+C)^2").unwrap();
        let v = e.eval(&Params::new().with("C", 1.0), Point::<f64>::new(1.0, 1.0)).unwrap();
        assert!((v + 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_passthrough() {
        let v = parse("r").unwrap().eval(&Params::new(), Point::<f64>::new(0.5, 7.0)).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn errors() {
        let p = Params::new();
        let pt = Point::<f64>::new(1.0, 0.0);
        assert_eq!(parse("K*r").unwrap().eval(&p, pt), Err(EvalError::Unbound("K".into())));
        assert!(matches!(parse("1/z").unwrap().eval(&p, pt), Err(EvalError::Domain { .. })));
        assert!(matches!(parse("ln(z)").unwrap().eval(&p, pt), Err(EvalError::Domain { .. })));
        assert!(matches!(parse("sqrt(z-1)").unwrap().eval(&p, pt), Err(EvalError::Domain { .. })));
        assert!(matches!(parse("(z-1)^0.5").unwrap().eval(&p, pt), Err(EvalError::Domain { .. })));
        assert!(matches!(parse("exp(1000*r)").unwrap().eval(&p, pt), Err(EvalError::NonFinite(_))));
        assert!(matches!(parse("r").unwrap().eval(&p, Point::<f64>::new(0.0, 1.0)), Err(EvalError::OffDomain(_))));
    }

    #[test]
    fn integer_valued_parameter_exponent_allows_negative_base() {
        let e = parse("(z - 2)^n").unwrap();
        let v = e.eval(&Params::new().with("n", 3.0), Point::<f64>::new(1.0, 0.0)).unwrap();
        assert_eq!(v, -8.0);
    }

    #[test]
    fn tape_shares_common_subexpressions() {
        let a = parse("(r^2+z^2)*(r^2+z^2) + sqrt(r^2+z^2)").unwrap();
        let tape = a.compile(&Params::new()).unwrap();
        // r, 2-power, z, 2-power, add, mul, sqrt, add
        assert_eq!(tape.len(), 8);
    }

    #[test]
    fn single_precision() {
        let e = parse("z/sqrt(r^2+z^2)").unwrap();
        let v: f32 = e.eval(&Params::new(), Point::new(1.0f32, 1.0f32)).unwrap();
        assert!((v - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }
}
