//! Random expression strategies shared by the property tests and the
//! acceptance run.
#![allow(dead_code)]

use axisym_darboux::expr::{BinOp, Func, Node};
use axisym_darboux::Expr;
use proptest::prelude::*;

fn small_number() -> impl Strategy<Value = Expr> {
    prop_oneof![(-3i64..=3).prop_map(Expr::num), (-8i64..=8).prop_map(|n| Expr::frac(n, 4))]
}

/// Arbitrary trees over every node kind, for print/parse round trips.
pub fn any_expr(depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::r()),
        Just(Expr::z()),
        small_number(),
        prop::sample::select(vec!["C", "C1", "K", "kappa"]).prop_map(Expr::param),
    ];
    leaf.prop_recursive(depth, 64, 2, |inner| {
        let ops = prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]);
        let funcs = prop::sample::select(vec![Func::Ln, Func::Exp, Func::Sqrt, Func::Abs]);
        prop_oneof![
            (ops, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::new(Node::Binary(op, a, b))),
            (funcs, inner.clone()).prop_map(|(f, a)| Expr::new(Node::Func(f, a))),
            inner.prop_map(|a| -a),
        ]
    })
}

/// `1 + e²`, positive and bounded below.
fn cushion(e: &Expr) -> Expr {
    Expr::one() + e.powi(2)
}

/// Smooth, finite trees on `r > 0`: divisors, logarithm and root arguments
/// are kept away from zero and exponents of `exp` bounded, so central
/// differences stay well conditioned.
pub fn smooth_expr(depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![3 => Just(Expr::r()), 3 => Just(Expr::z()), 2 => small_number()];
    leaf.prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / cushion(&b)),
            inner.clone().prop_map(|a| cushion(&a).ln()),
            inner.clone().prop_map(|a| cushion(&a).sqrt()),
            inner.clone().prop_map(|a| (&a / cushion(&a)).exp()),
            inner.clone().prop_map(|a| Expr::r().pow(&(&a / cushion(&a)))),
            inner.prop_map(|a| -a),
        ]
    })
}

/// Tree depth, counting leaves as depth 0.
pub fn depth(e: &Expr) -> usize {
    match e.node() {
        Node::Num(_) | Node::Var(_) | Node::Param(_) => 0,
        Node::Neg(a) | Node::Func(_, a) => 1 + depth(a),
        Node::Binary(_, a, b) => 1 + depth(a).max(depth(b)),
    }
}
