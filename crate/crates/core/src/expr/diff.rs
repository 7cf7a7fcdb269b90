use super::{BinOp, Expr, Func};

impl Expr {
    /// Exact partial derivative with respect to variable `i` (zero-based).
    ///
    /// `abs` differentiates to `sign`, which refuses to evaluate at 0.
    pub fn differentiate(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(k) => Expr::Const(if *k == i { 1.0 } else { 0.0 }),
            Expr::Unary(func, a) => {
                let da = a.differentiate(i);
                if da.as_const() == Some(0.0) {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                let outer = match func {
                    Func::Exp => Expr::apply(Func::Exp, a),
                    Func::Log => Expr::div(Expr::Const(1.0), a),
                    Func::Sqrt => Expr::div(
                        Expr::Const(1.0),
                        Expr::mul(Expr::Const(2.0), Expr::apply(Func::Sqrt, a)),
                    ),
                    Func::Abs => Expr::apply(Func::Sign, a),
                    Func::Neg => return Expr::neg(da),
                    // sign is locally constant wherever it is defined
                    Func::Sign => return Expr::Const(0.0),
                };
                Expr::mul(outer, da)
            }
            Expr::Binary(op, a, b) => {
                let da = a.differentiate(i);
                let db = b.differentiate(i);
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinOp::Add => Expr::add(da, db),
                    BinOp::Sub => Expr::sub(da, db),
                    BinOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                    BinOp::Div => {
                        // (a'b - ab') / b^2
                        let num = Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db));
                        Expr::div(num, Expr::pow(b, Expr::Const(2.0)))
                    }
                    BinOp::Pow => pow_derivative(a, b, da, db),
                }
            }
        }
    }
}

fn pow_derivative(base: Expr, exp: Expr, dbase: Expr, dexp: Expr) -> Expr {
    if exp.is_constant() {
        // n f^(n-1) f'
        let lowered = Expr::sub(exp.clone(), Expr::Const(1.0));
        return Expr::mul(Expr::mul(exp, Expr::pow(base, lowered)), dbase);
    }
    let whole = Expr::pow(base.clone(), exp.clone());
    if base.is_constant() {
        // c^g ln(c) g'
        return Expr::mul(Expr::mul(whole, Expr::apply(Func::Log, base)), dexp);
    }
    // f^g (g' ln f + g f'/f)
    let inner = Expr::add(
        Expr::mul(dexp, Expr::apply(Func::Log, base.clone())),
        Expr::div(Expr::mul(exp, dbase), base),
    );
    Expr::mul(whole, inner)
}
