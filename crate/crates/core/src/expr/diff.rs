use std::collections::HashMap;

use super::{BinOp, Expr, Func, Node, Var};

pub(super) fn diff(e: &Expr, var: Var) -> Expr {
    let mut cx = Diff { var, memo: HashMap::new(), varying: HashMap::new() };
    cx.go(e)
}

struct Diff {
    var: Var,
    memo: HashMap<usize, Expr>,
    varying: HashMap<usize, bool>,
}

impl Diff {
    fn depends(&mut self, e: &Expr) -> bool {
        if let Some(&known) = self.varying.get(&e.id()) {
            return known;
        }
        let out = match e.node() {
            Node::Var(_) => true,
            Node::Num(_) | Node::Param(_) => false,
            Node::Neg(a) | Node::Func(_, a) => self.depends(a),
            Node::Binary(_, a, b) => self.depends(a) || self.depends(b),
        };
        self.varying.insert(e.id(), out);
        out
    }

    fn go(&mut self, e: &Expr) -> Expr {
        if let Some(done) = self.memo.get(&e.id()) {
            return done.clone();
        }
        let out = match e.node() {
            Node::Num(_) | Node::Param(_) => Expr::zero(),
            Node::Var(v) => {
                if *v == self.var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => -self.go(a),
            Node::Binary(op, a, b) => {
                let da = self.go(a);
                match op {
                    BinOp::Add => da + self.go(b),
                    BinOp::Sub => da - self.go(b),
                    BinOp::Mul => {
                        let db = self.go(b);
                        da * b + a * db
                    }
                    BinOp::Div => {
                        let db = self.go(b);
                        (da * b - a * db) / b.powi(2)
                    }
                    BinOp::Pow => {
                        if self.depends(b) {
                            // a^b (b' ln a + b a'/a)
                            let db = self.go(b);
                            e * (db * a.ln() + b * da / a)
                        } else {
                            b * a.pow(&(b - 1)) * da
                        }
                    }
                }
            }
            Node::Func(f, a) => {
                let da = self.go(a);
                match f {
                    Func::Ln => da / a,
                    Func::Exp => e * da,
                    Func::Sqrt => da / (Expr::num(2) * e),
                    Func::Abs => a / e * da,
                }
            }
        };
        self.memo.insert(e.id(), out.clone());
        out
    }
}
