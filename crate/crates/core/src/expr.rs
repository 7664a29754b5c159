//! Small arithmetic expressions over coordinates `x1, …, xn` (or `x` in one
//! dimension) and time `t`, with symbolic partial derivatives.
//!
//! Grammar: `+ - * /`, right-associative `^`, unary minus, parentheses,
//! numbers, `pi`, `e`, and the functions `sin cos exp abs sqrt ln tanh`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Ln,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "ln" | "log" => Func::Ln,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
            Func::Ln => v.ln(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// Sign function; only produced by differentiating `abs`.
    Sign(Box<Expr>),
}

use Expr::*;

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let e = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Num(v) => *v,
            Var(i) => x[*i],
            Time => t,
            Neg(a) => -a.eval(x, t),
            Add(a, c) => a.eval(x, t) + c.eval(x, t),
            Sub(a, c) => a.eval(x, t) - c.eval(x, t),
            Mul(a, c) => a.eval(x, t) * c.eval(x, t),
            Div(a, c) => a.eval(x, t) / c.eval(x, t),
            Pow(a, c) => {
                let base = a.eval(x, t);
                match **c {
                    Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => base.powi(n as i32),
                    _ => base.powf(c.eval(x, t)),
                }
            }
            Call(f, a) => f.apply(a.eval(x, t)),
            Sign(a) => {
                let v = a.eval(x, t);
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest coordinate index referenced plus one.
    pub fn arity(&self) -> usize {
        match self {
            Num(_) | Time => 0,
            Var(i) => i + 1,
            Neg(a) | Call(_, a) | Sign(a) => a.arity(),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) => a.arity().max(c.arity()),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Num(v) if *v == 1.0)
    }

    fn depends_on(&self, var: Option<usize>) -> bool {
        match self {
            Num(_) => false,
            Var(i) => var == Some(*i),
            Time => var.is_none(),
            Neg(a) | Call(_, a) | Sign(a) => a.depends_on(var),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) => a.depends_on(var) || c.depends_on(var),
        }
    }

    /// Partial derivative in coordinate `var`, or in `t` when `var` is `None`.
    pub fn derivative(&self, var: Option<usize>) -> Expr {
        if !self.depends_on(var) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(_) | Time => Num(1.0),
            Neg(a) => neg(a.derivative(var)),
            Add(a, c) => add(a.derivative(var), c.derivative(var)),
            Sub(a, c) => sub(a.derivative(var), c.derivative(var)),
            Mul(a, c) => add(mul(a.derivative(var), (**c).clone()), mul((**a).clone(), c.derivative(var))),
            Div(a, c) => div(
                sub(mul(a.derivative(var), (**c).clone()), mul((**a).clone(), c.derivative(var))),
                Pow(c.clone(), b(Num(2.0))),
            ),
            Pow(a, c) if !c.depends_on(var) => {
                let reduced = match **c {
                    Num(n) => Num(n - 1.0),
                    _ => sub((**c).clone(), Num(1.0)),
                };
                mul(mul((**c).clone(), Pow(a.clone(), b(reduced))), a.derivative(var))
            }
            Pow(a, c) => {
                // d(a^c) = a^c (c' ln a + c a'/a)
                let inner = add(
                    mul(c.derivative(var), Call(Func::Ln, a.clone())),
                    div(mul((**c).clone(), a.derivative(var)), (**a).clone()),
                );
                mul(self.clone(), inner)
            }
            Call(f, a) => {
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Abs => Sign(a.clone()),
                    Func::Sqrt => div(Num(0.5), self.clone()),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                    Func::Tanh => sub(Num(1.0), Pow(b(self.clone()), b(Num(2.0)))),
                };
                mul(outer, a.derivative(var))
            }
            Sign(_) => Num(0.0),
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(v) => Num(-v),
        other => Neg(b(other)),
    }
}

fn add(a: Expr, c: Expr) -> Expr {
    match (a.is_zero(), c.is_zero()) {
        (true, _) => c,
        (_, true) => a,
        _ => Add(b(a), b(c)),
    }
}

fn sub(a: Expr, c: Expr) -> Expr {
    match (a.is_zero(), c.is_zero()) {
        (_, true) => a,
        (true, _) => neg(c),
        _ => Sub(b(a), b(c)),
    }
}

fn mul(a: Expr, c: Expr) -> Expr {
    if a.is_zero() || c.is_zero() {
        return Num(0.0);
    }
    match (a.is_one(), c.is_one()) {
        (true, _) => c,
        (_, true) => a,
        _ => Mul(b(a), b(c)),
    }
}

fn div(a: Expr, c: Expr) -> Expr {
    if a.is_zero() {
        return Num(0.0);
    }
    if c.is_one() {
        return a;
    }
    Div(b(a), b(c))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) => write!(f, "{v}"),
            Var(i) => write!(f, "x{}", i + 1),
            Time => write!(f, "t"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, c) => write!(f, "({a} + {c})"),
            Sub(a, c) => write!(f, "({a} - {c})"),
            Mul(a, c) => write!(f, "({a} * {c})"),
            Div(a, c) => write!(f, "({a} / {c})"),
            Pow(a, c) => write!(f, "({a} ^ {c})"),
            Call(func, a) => write!(f, "{}({a})", func.name()),
            Sign(a) => write!(f, "sign({a})"),
        }
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // exponent part such as 1e-3
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            let text = &src[chars[start].0..end];
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Expression(format!("bad number '{text}' at column {}", pos + 1)))?;
            out.push((pos, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            out.push((pos, Tok::Ident(src[chars[start].0..end].to_string())));
        } else if "+-*/^()×÷−".contains(c) {
            let op = match c {
                '×' => '*',
                '÷' => '/',
                '−' => '-',
                other => other,
            };
            out.push((pos, Tok::Op(op)));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}' at column {}", pos + 1)));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let col = self.tokens.get(self.pos).map_or(self.src.len(), |t| t.0) + 1;
        Error::Expression(format!("{msg} at column {col} in '{}'", self.src))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if op == '+' { Add(b(lhs), b(rhs)) } else { Sub(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Mul(b(lhs), b(rhs)) } else { Div(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Neg(b(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Pow(b(base), b(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Num(v)),
            Tok::Op('(') => {
                let e = self.sum()?;
                if self.peek_op() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    if self.peek_op() != Some('(') {
                        return Err(self.error(&format!("expected '(' after {name}")));
                    }
                    let arg = self.atom()?;
                    return Ok(Call(f, b(arg)));
                }
                match name.as_str() {
                    "x" => Ok(Var(0)),
                    "t" => Ok(Time),
                    "pi" => Ok(Num(std::f64::consts::PI)),
                    "e" => Ok(Num(std::f64::consts::E)),
                    _ => match name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        Some(k) if k >= 1 => Ok(Var(k - 1)),
                        _ => {
                            self.pos -= 1;
                            Err(self.error(&format!("unknown identifier '{name}'")))
                        }
                    },
                }
            }
            Tok::Op(c) => {
                self.pos -= 1;
                Err(self.error(&format!("unexpected '{c}'")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("(1 - 4) / 2", &[]), -1.5);
        assert_eq!(ev("1e-3 * 2", &[]), 0.002);
        assert_eq!(ev("x1 - x2", &[3.0, 1.0]), 2.0);
        assert_eq!(ev("x^3", &[2.0]), 8.0);
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("x + y").unwrap_err().to_string();
        assert!(e.contains("unknown identifier 'y'") && e.contains("column 5"), "{e}");
        assert!(Expr::parse("sin x").is_err());
        assert!(Expr::parse("(x + 1").is_err());
        assert!(Expr::parse("x $ 2").is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let cases = [
            "x + 0.1*sin(x)",
            "-x^3",
            "exp(-2*x) * cos(x)",
            "sqrt(1 - x^2)",
            "x / (1 + x^2)",
            "abs(x) * x",
            "tanh(x)^2",
        ];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative(Some(0));
            for &x in &[-0.7, -0.2, 0.3, 0.9] {
                let h = 1e-6;
                let fd = (e.eval(&[x + h], 0.0) - e.eval(&[x - h], 0.0)) / (2.0 * h);
                assert!((d.eval(&[x], 0.0) - fd).abs() < 1e-7, "{src} at {x}");
            }
        }
    }

    #[test]
    fn time_derivative() {
        let e = Expr::parse("exp(-t) * x").unwrap();
        let d = e.derivative(None);
        assert!((d.eval(&[2.0], 0.5) + 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(e.derivative(Some(1)), Num(0.0));
    }
}
