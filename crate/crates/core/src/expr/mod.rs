//! Symbolic expressions over `x1..xm` (or a caller-supplied variable list).
//!
//! Expressions are immutable trees. They are parsed from a small infix
//! language, evaluated at points of ℝ^m and differentiated exactly; no
//! simplification beyond constant folding is performed, so correctness of a
//! derivative is checked by evaluation rather than by normal forms.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | variable | constant | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sqrt | abs | neg | sign
//! ```
//!
//! There is no implicit multiplication: `2x1` is a syntax error.

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

pub use parse::{parse, parse_with, ParseError, ParseErrorKind};

/// Unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Neg,
    /// Derivative of `abs`; undefined (non-smooth) at 0.
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Neg => "neg",
            Func::Sign => "sign",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "neg" => Func::Neg,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index (`x1` is `Var(0)`).
    Var(usize),
    Unary(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Evaluation failure, naming the offending subexpression.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{op} undefined at argument {arg} in `{node}`")]
    Domain {
        op: &'static str,
        arg: f64,
        node: String,
    },
    #[error("non-smooth point: `{node}` evaluated at its kink")]
    NonSmooth { node: String },
    #[error("variable x{index} not supplied (point has dimension {dim})")]
    MissingVariable { index: usize, dim: usize },
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    /// Largest variable index referenced plus one (0 for closed expressions).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Unary(_, a) => a.arity(),
            Expr::Binary(_, a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.arity() == 0
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Evaluates at `x`. Deterministic: the same tree and point always give
    /// the bit-identical result.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var(i) => x.get(*i).copied().ok_or(EvalError::MissingVariable {
                index: i + 1,
                dim: x.len(),
            }),
            Expr::Unary(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Exp => Ok(v.exp()),
                    Func::Log if v > 0.0 => Ok(v.ln()),
                    Func::Sqrt if v >= 0.0 => Ok(v.sqrt()),
                    Func::Log | Func::Sqrt => Err(self.domain(f.name(), v)),
                    Func::Abs => Ok(v.abs()),
                    Func::Neg => Ok(-v),
                    Func::Sign if v > 0.0 => Ok(1.0),
                    Func::Sign if v < 0.0 => Ok(-1.0),
                    Func::Sign if v == 0.0 => Err(EvalError::NonSmooth {
                        node: a.to_string(),
                    }),
                    Func::Sign => Err(self.domain("sign", v)),
                }
            }
            Expr::Binary(op, a, b) => {
                let u = a.eval(x)?;
                let v = b.eval(x)?;
                match op {
                    BinOp::Add => Ok(u + v),
                    BinOp::Sub => Ok(u - v),
                    BinOp::Mul => Ok(u * v),
                    BinOp::Div if v == 0.0 => Err(self.domain("division", v)),
                    BinOp::Div => Ok(u / v),
                    BinOp::Pow => {
                        if u < 0.0 && v.fract() != 0.0 {
                            return Err(self.domain("pow (negative base)", u));
                        }
                        if u == 0.0 && v < 0.0 {
                            return Err(self.domain("pow (zero base)", v));
                        }
                        Ok(u.powf(v))
                    }
                }
            }
        }
    }

    fn domain(&self, op: &'static str, arg: f64) -> EvalError {
        EvalError::Domain {
            op,
            arg,
            node: self.to_string(),
        }
    }

    /// Renders with custom variable names (`names[k]` for variable `k`).
    pub fn display_with<'a>(&'a self, names: &'a [&'a str]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: &[&str]) -> fmt::Result {
        match self {
            Expr::Const(v) => {
                if *v < 0.0 || v.is_sign_negative() {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(i) => match names.get(*i) {
                Some(n) => f.write_str(n),
                None => write!(f, "x{}", i + 1),
            },
            Expr::Unary(Func::Neg, a) => {
                f.write_str("(-")?;
                a.write(f, names)?;
                f.write_str(")")
            }
            Expr::Unary(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, names)?;
                f.write_str(")")
            }
            Expr::Binary(op, a, b) => {
                f.write_str("(")?;
                a.write(f, names)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f, names)?;
                f.write_str(")")
            }
        }
    }
}

struct Named<'a> {
    expr: &'a Expr,
    names: &'a [&'a str],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, self.names)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, &[])
    }
}

// Constructors with constant folding. Folding only removes subtrees that
// are exact constants, so eval-equivalence is preserved wherever the
// unfolded tree is defined.
impl Expr {
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (_, Some(y)) if y == 0.0 => a,
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            _ => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(x), _) if x == 0.0 => Expr::Const(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match b.as_const() {
            Some(y) if y == 1.0 => a,
            Some(y) if y == 0.0 => Expr::Const(1.0),
            _ => Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(v) => Expr::Const(-v),
            Expr::Unary(Func::Neg, inner) => *inner,
            other => Expr::Unary(Func::Neg, Box::new(other)),
        }
    }

    pub fn apply(func: Func, a: Expr) -> Expr {
        match func {
            Func::Neg => Expr::neg(a),
            _ => Expr::Unary(func, Box::new(a)),
        }
    }
}

/// Value, gradient and Hessian of an expression, differentiated once up
/// front so repeated point evaluations share the trees.
#[derive(Clone, Debug)]
pub struct Derivatives {
    pub value: Expr,
    pub grad: Vec<Expr>,
    /// Full symmetric Hessian, `hess[i][j] = ∂_j ∂_i f`.
    pub hess: Vec<Vec<Expr>>,
}

impl Derivatives {
    pub fn new(e: &Expr, m: usize) -> Self {
        let grad: Vec<Expr> = (0..m).map(|i| e.differentiate(i)).collect();
        let hess = grad
            .iter()
            .map(|g| (0..m).map(|j| g.differentiate(j)).collect())
            .collect();
        Derivatives {
            value: e.clone(),
            grad,
            hess,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    pub fn laplacian_at(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut s = 0.0;
        for (i, row) in self.hess.iter().enumerate() {
            s += row[i].eval(x)?;
        }
        Ok(s)
    }
}
