//! Scalar expression language used for the coefficients `a_j(r)`, `h_j(r)`
//! and the nonlinearities `f_j(u, v)`.
//!
//! The grammar is ordinary infix arithmetic:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          // right associative
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions are restricted to `exp, log, sqrt, abs, min, max, pow`.
//! Variables are resolved to slots at parse time against the caller's
//! allowed set, so evaluation is a plain tree walk over an `&[f64]`.

mod audit;
mod parser;

use std::collections::HashMap;
use std::fmt;

pub use audit::{check_sampled_properties, Property, SampleSpec, Violation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no binding supplied for variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// Finite inputs produced a non-finite result.
    #[error("overflow: {0}")]
    Overflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Exp | Func::Log | Func::Sqrt | Func::Abs => 1,
            Func::Min | Func::Max | Func::Pow => 2,
        }
    }
}

/// Expression tree. `Var::slot` indexes into the allowed-variable list the
/// expression was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var { name: String, slot: usize },
    Neg(Box<Node>),
    Binary { op: BinOp, lhs: Box<Node>, rhs: Box<Node> },
    Call { func: Func, args: Vec<Node> },
}

impl Node {
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        match self {
            Node::Num(x) => Ok(*x),
            Node::Var { name, slot } => values
                .get(*slot)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable(name.clone())),
            Node::Neg(inner) => Ok(-inner.eval(values)?),
            Node::Binary { op, lhs, rhs } => {
                let x = lhs.eval(values)?;
                let y = rhs.eval(values)?;
                let out = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero ({x} / 0)")));
                        }
                        x / y
                    }
                    BinOp::Pow => power(x, y)?,
                };
                finite(out, self)
            }
            Node::Call { func, args } => {
                let x = args[0].eval(values)?;
                let out = match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::Domain(format!("log of non-positive value {x}")));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(values)?),
                    Func::Max => x.max(args[1].eval(values)?),
                    Func::Pow => power(x, args[1].eval(values)?)?,
                };
                finite(out, self)
            }
        }
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Node::Num(_) => {}
            Node::Var { name, .. } => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Node::Neg(inner) => inner.collect_vars(out),
            Node::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Node::Call { args, .. } => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::Domain(format!("0 raised to negative power {exponent}")));
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(ExprError::Domain(format!(
            "negative base {base} with non-integer exponent {exponent}"
        )));
    }
    Ok(base.powf(exponent))
}

fn finite(value: f64, node: &Node) -> Result<f64, ExprError> {
    if value.is_finite() {
        Ok(value)
    } else if value.is_nan() {
        Err(ExprError::Domain(format!("undefined value in `{node}`")))
    } else {
        Err(ExprError::Overflow(format!("`{node}` exceeds the floating-point range")))
    }
}

impl fmt::Display for Node {
    /// Fully parenthesized; re-parsing the output yields an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(x) => write!(f, "{x}"),
            Node::Var { name, .. } => f.write_str(name),
            Node::Neg(inner) => write!(f, "(-{inner})"),
            Node::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Node::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A parsed expression together with the variable list it was resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    vars: Vec<String>,
    root: Node,
}

impl Expression {
    pub fn parse(text: &str, allowed_vars: &[&str]) -> Result<Self, ExprError> {
        let root = parser::parse(text, allowed_vars)?;
        Ok(Expression {
            source: text.to_string(),
            vars: allowed_vars.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    /// Evaluate with values given positionally in allowed-variable order.
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        self.root.eval(values)
    }

    pub fn eval_map(&self, bindings: &HashMap<&str, f64>) -> Result<f64, ExprError> {
        let used = self.used_variables();
        let mut values = vec![f64::NAN; self.vars.len()];
        for (slot, name) in self.vars.iter().enumerate() {
            match bindings.get(name.as_str()) {
                Some(v) => values[slot] = *v,
                None if used.contains(&name.as_str()) => {
                    return Err(ExprError::UnboundVariable(name.clone()))
                }
                None => {}
            }
        }
        self.root.eval(&values)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn allowed_variables(&self) -> &[String] {
        &self.vars
    }

    /// Variables that actually occur in the tree, in first-occurrence order.
    pub fn used_variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_vars(&mut out);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.used_variables().is_empty()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval1(text: &str, vars: &[&str], values: &[f64]) -> Result<f64, ExprError> {
        Expression::parse(text, vars)?.eval(values)
    }

    #[test]
    fn parse_power_of_shifted_radius() {
        let e = Expression::parse("(1+r)^(-4)", &["r"]).unwrap();
        match e.root() {
            Node::Binary { op: BinOp::Pow, lhs, rhs } => {
                assert!(matches!(**lhs, Node::Binary { op: BinOp::Add, .. }));
                assert_eq!(**rhs, Node::Neg(Box::new(Node::Num(4.0))));
            }
            other => panic!("unexpected tree {other:?}"),
        }
        assert_eq!(e.eval(&[1.0]).unwrap(), 0.0625);
    }

    #[test]
    fn parse_sum_of_two_vars() {
        let e = Expression::parse("u + v", &["u", "v"]).unwrap();
        assert!(matches!(e.root(), Node::Binary { op: BinOp::Add, .. }));
        assert_eq!(e.eval(&[0.5, 0.5]).unwrap(), 1.0);
        let m: HashMap<&str, f64> = [("u", 0.5), ("v", 0.5)].into();
        assert_eq!(e.eval_map(&m).unwrap(), 1.0);
    }

    #[test]
    fn dangling_operator_reports_end_offset() {
        match Expression::parse("r +", &["r"]) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_variable_rejected() {
        assert_eq!(
            Expression::parse("r + u", &["r"]),
            Err(ExprError::UnknownVariable("u".into()))
        );
    }

    #[test]
    fn unknown_function_and_arity() {
        assert!(matches!(Expression::parse("sin(r)", &["r"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expression::parse("pow(r)", &["r"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expression::parse("exp(r, r)", &["r"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expression::parse("", &["r"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expression::parse("(r", &["r"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expression::parse("r r", &["r"]), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval1("2+3*4", &[], &[]).unwrap(), 14.0);
        assert_eq!(eval1("2^3^2", &[], &[]).unwrap(), 512.0);
        assert_eq!(eval1("-2^2", &[], &[]).unwrap(), -4.0);
        assert_eq!(eval1("2^-1", &[], &[]).unwrap(), 0.5);
        assert_eq!(eval1("8/4/2", &[], &[]).unwrap(), 1.0);
        assert_eq!(eval1("10-4-3", &[], &[]).unwrap(), 3.0);
        assert_eq!(eval1("1.5e2 + 2.5E-1", &[], &[]).unwrap(), 150.25);
    }

    #[test]
    fn function_whitelist() {
        assert_eq!(eval1("min(u, v) + max(u, v)", &["u", "v"], &[1.0, 3.0]).unwrap(), 4.0);
        assert_eq!(eval1("pow(u, 2)", &["u"], &[3.0]).unwrap(), 9.0);
        assert_eq!(eval1("abs(-u)", &["u"], &[3.0]).unwrap(), 3.0);
        assert_eq!(eval1("sqrt(u)", &["u"], &[9.0]).unwrap(), 3.0);
        assert!((eval1("log(exp(u))", &["u"], &[2.5]).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(eval1("log(r)", &["r"], &[0.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval1("sqrt(r)", &["r"], &[-1.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval1("1/r", &["r"], &[0.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval1("r^(-1)", &["r"], &[0.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval1("r^0.5", &["r"], &[-4.0]), Err(ExprError::Domain(_))));
        assert_eq!(eval1("r^3", &["r"], &[-2.0]).unwrap(), -8.0);
        assert!(matches!(eval1("exp(r)", &["r"], &[1000.0]), Err(ExprError::Overflow(_))));
    }

    #[test]
    fn unused_bindings_are_optional() {
        let e = Expression::parse("2*u", &["u", "v"]).unwrap();
        let m: HashMap<&str, f64> = [("u", 1.5)].into();
        assert_eq!(e.eval_map(&m).unwrap(), 3.0);
        let empty = HashMap::new();
        assert_eq!(e.eval_map(&empty), Err(ExprError::UnboundVariable("u".into())));
        assert!(Expression::parse("3", &["u", "v"]).unwrap().is_constant());
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Node::Num),
            (0usize..2).prop_map(|slot| Node::Var {
                name: ["u", "v"][slot].to_string(),
                slot
            }),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|n| Node::Neg(Box::new(n))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Node::Binary {
                        op,
                        lhs: Box::new(l),
                        rhs: Box::new(r)
                    }),
                (
                    prop_oneof![
                        Just(Func::Exp),
                        Just(Func::Log),
                        Just(Func::Sqrt),
                        Just(Func::Abs),
                        Just(Func::Min),
                        Just(Func::Max),
                        Just(Func::Pow)
                    ],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(func, a, b)| {
                        let args = if func.arity() == 1 { vec![a] } else { vec![a, b] };
                        Node::Call { func, args }
                    }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(node in arb_node()) {
            let printed = node.to_string();
            let reparsed = Expression::parse(&printed, &["u", "v"]).unwrap();
            prop_assert_eq!(reparsed.root(), &node);
        }

        #[test]
        fn eval_is_deterministic(node in arb_node(), u in 0.0f64..10.0, v in 0.0f64..10.0) {
            let a = node.eval(&[u, v]);
            let b = node.eval(&[u, v]);
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                (Err(x), Err(y)) => prop_assert_eq!(x, y),
                _ => prop_assert!(false, "evaluation changed outcome"),
            }
        }
    }
}
