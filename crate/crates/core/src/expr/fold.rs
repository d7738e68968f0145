//! Constant folding and exact algebraic identities.
//!
//! Only rewrites that hold exactly are applied: rational arithmetic on
//! literals, neutral and absorbing elements, sign pulling, and merging of
//! literal coefficients. There is no canonical form.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use std::sync::Arc;

use super::{BinOp, Expr, Func, Node, Var};
use crate::Rational;

pub(super) fn fold(e: &Expr) -> Expr {
    Folder::default().go(e)
}

#[derive(PartialEq, Eq, Hash)]
enum Key {
    Num(Rational),
    Var(Var),
    Param(Arc<str>),
    Unary(u8, usize),
    Binary(BinOp, usize, usize),
}

#[derive(Default)]
struct Folder {
    memo: HashMap<usize, Expr>,
    interned: HashMap<Key, Expr>,
}

const MAX_POW_BITS: u64 = 4096;

impl Folder {
    fn go(&mut self, e: &Expr) -> Expr {
        if let Some(done) = self.memo.get(&e.id()) {
            return done.clone();
        }
        let out = match e.node() {
            Node::Num(_) | Node::Var(_) | Node::Param(_) => self.leaf(e.clone()),
            Node::Neg(a) => {
                let a = self.go(a);
                self.neg(a)
            }
            Node::Func(f, a) => {
                let a = self.go(a);
                self.func(*f, a)
            }
            Node::Binary(op, a, b) => {
                let a = self.go(a);
                let b = self.go(b);
                self.binary(*op, a, b)
            }
        };
        let out = self.leaf(out);
        self.memo.insert(e.id(), out.clone());
        out
    }

    fn intern(&mut self, key: Key, build: impl FnOnce() -> Expr) -> Expr {
        self.interned.entry(key).or_insert_with(build).clone()
    }

    /// Shares leaves so that structurally equal subtrees built separately
    /// end up pointer-equal within one fold.
    fn leaf(&mut self, e: Expr) -> Expr {
        let key = match e.node() {
            Node::Num(q) => Key::Num(q.clone()),
            Node::Var(v) => Key::Var(*v),
            Node::Param(name) => Key::Param(name.clone()),
            _ => return e,
        };
        self.intern(key, || e)
    }

    fn neg(&mut self, a: Expr) -> Expr {
        match a.node() {
            Node::Num(q) => Expr::rational(-q),
            Node::Neg(inner) => inner.clone(),
            _ => {
                let a = self.leaf(a);
                self.intern(Key::Unary(0, a.id()), || -&a)
            }
        }
    }

    fn func(&mut self, f: Func, a: Expr) -> Expr {
        if let Some(q) = a.as_rational() {
            match f {
                Func::Ln if q.is_one() => return Expr::zero(),
                Func::Exp if q.is_zero() => return Expr::one(),
                Func::Abs => return Expr::rational(q.abs()),
                Func::Sqrt if !q.is_negative() => {
                    if let Some(root) = exact_sqrt(q) {
                        return Expr::rational(root);
                    }
                }
                _ => {}
            }
        }
        let tag = match f {
            Func::Ln => 1,
            Func::Exp => 2,
            Func::Sqrt => 3,
            Func::Abs => 4,
        };
        let a = self.leaf(a);
        self.intern(Key::Unary(tag, a.id()), || Expr::new(Node::Func(f, a.clone())))
    }

    fn raw(&mut self, op: BinOp, a: Expr, b: Expr) -> Expr {
        let (a, b) = (self.leaf(a), self.leaf(b));
        let (x, y) = (a.id(), b.id());
        // operand order of the first occurrence is kept; the key is symmetric
        let key = match op {
            BinOp::Add | BinOp::Mul => Key::Binary(op, x.min(y), x.max(y)),
            _ => Key::Binary(op, x, y),
        };
        self.intern(key, || Expr::new(Node::Binary(op, a.clone(), b.clone())))
    }

    fn binary(&mut self, op: BinOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinOp::Add => self.add(a, b),
            BinOp::Sub => self.sub(a, b),
            BinOp::Mul => self.mul(a, b),
            BinOp::Div => self.div(a, b),
            BinOp::Pow => self.pow(a, b),
        }
    }

    fn add(&mut self, a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_rational(), b.as_rational()) {
            return Expr::rational(x + y);
        }
        if let Node::Neg(y) = b.node() {
            return self.sub(a, y.clone());
        }
        if let Node::Neg(x) = a.node() {
            return self.sub(b, x.clone());
        }
        self.raw(BinOp::Add, a, b)
    }

    fn sub(&mut self, a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return self.neg(b);
        }
        if a.ptr_eq(&b) {
            return Expr::zero();
        }
        if let (Some(x), Some(y)) = (a.as_rational(), b.as_rational()) {
            return Expr::rational(x - y);
        }
        if let Node::Neg(y) = b.node() {
            return self.add(a, y.clone());
        }
        self.raw(BinOp::Sub, a, b)
    }

    fn mul(&mut self, a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        match (a.as_rational(), b.as_rational()) {
            (Some(x), Some(y)) => return Expr::rational(x * y),
            // literal coefficients go first so they can merge
            (None, Some(_)) => return self.mul(b, a),
            _ => {}
        }
        if let Some(x) = a.as_rational() {
            if (-x).is_one() {
                return self.neg(b);
            }
            if let Node::Binary(BinOp::Mul, c, rest) = b.node() {
                if let Some(y) = c.as_rational() {
                    let coeff = Expr::rational(x * y);
                    return self.mul(coeff, rest.clone());
                }
            }
        }
        if let Node::Neg(x) = a.node() {
            let inner = self.mul(x.clone(), b);
            return self.neg(inner);
        }
        if let Node::Neg(y) = b.node() {
            let inner = self.mul(a, y.clone());
            return self.neg(inner);
        }
        self.raw(BinOp::Mul, a, b)
    }

    fn div(&mut self, a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        if let Some(y) = b.as_rational() {
            if (-y).is_one() {
                return self.neg(a);
            }
            if let Some(x) = a.as_rational() {
                if !y.is_zero() {
                    return Expr::rational(x / y);
                }
            }
        }
        if let Node::Neg(x) = a.node() {
            let inner = self.div(x.clone(), b);
            return self.neg(inner);
        }
        if let Node::Neg(y) = b.node() {
            let inner = self.div(a, y.clone());
            return self.neg(inner);
        }
        self.raw(BinOp::Div, a, b)
    }

    fn pow(&mut self, a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if b.is_zero() {
            return Expr::one();
        }
        if a.is_one() {
            return Expr::one();
        }
        if let (Some(x), Some(y)) = (a.as_rational(), b.as_rational()) {
            if let Some(q) = exact_pow(x, y) {
                return Expr::rational(q);
            }
        }
        self.raw(BinOp::Pow, a, b)
    }
}

fn exact_pow(base: &Rational, exponent: &Rational) -> Option<Rational> {
    if !exponent.is_integer() {
        return None;
    }
    let n = exponent.to_integer().to_i32()?;
    if base.is_zero() && n < 0 {
        return None;
    }
    let bits = base.numer().bits().max(base.denom().bits()).max(1);
    if bits.saturating_mul(n.unsigned_abs() as u64) > MAX_POW_BITS {
        return None;
    }
    Some(num_traits::pow::Pow::pow(base, n))
}

fn exact_sqrt(q: &Rational) -> Option<Rational> {
    let root = |n: &BigInt| {
        let s = n.sqrt();
        (&s * &s == *n).then_some(s)
    };
    Some(Rational::new(root(q.numer())?, root(q.denom())?))
}
