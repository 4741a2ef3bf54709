//! Small arithmetic expression language used for charts and forcing terms.
//!
//! Grammar: numbers, `pi`, `e`, variables `x` and `z` (`y` is an alias of `z`),
//! binary `+ - * / ^`, unary minus, parentheses and the functions
//! `sin`, `cos`, `exp`, `sqrt`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Z,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let err = |reason: String| Error::Expression { expr: src.to_string(), reason };
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| err(format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Expression { expr: self.src.to_string(), reason: reason.into() }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    // sum := product (('+'|'-') product)*
    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // product := unary (('*'|'/') unary)*
    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if let Some(Token::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    // power := atom ('^' unary)?   (right associative)
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let e = self.sum()?;
                match self.next() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(self.err("missing `)`")),
                }
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "z" | "y" => Ok(Expr::Z),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "e" => Ok(Expr::Num(std::f64::consts::E)),
                "sin" | "cos" | "exp" | "sqrt" => {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        _ => Func::Sqrt,
                    };
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => return Err(self.err(format!("`{name}` needs parentheses"))),
                    }
                    let arg = self.sum()?;
                    match self.next() {
                        Some(Token::RParen) => Ok(Expr::Call(f, Box::new(arg))),
                        _ => Err(self.err("missing `)`")),
                    }
                }
                other => Err(self.err(format!("unknown identifier `{other}`"))),
            },
            Some(t) => Err(self.err(format!("unexpected token {t:?}"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser { src, toks, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval<T: Real>(&self, x: T, z: T) -> T {
        match self {
            Expr::Num(v) => T::c(*v),
            Expr::X => x,
            Expr::Z => z,
            Expr::Neg(a) => -a.eval(x, z),
            Expr::Add(a, b) => a.eval(x, z) + b.eval(x, z),
            Expr::Sub(a, b) => a.eval(x, z) - b.eval(x, z),
            Expr::Mul(a, b) => a.eval(x, z) * b.eval(x, z),
            Expr::Div(a, b) => a.eval(x, z) / b.eval(x, z),
            Expr::Pow(a, b) => {
                let base = a.eval(x, z);
                match b.as_ref() {
                    Expr::Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => base.powi(*n as i32),
                    _ => base.powf(b.eval(x, z)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, z);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    fn depends_on(&self, var: &Expr) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::X | Expr::Z => self == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    /// Exact derivative with respect to `x`, as a new expression tree.
    pub fn derivative_x(&self) -> Expr {
        self.derivative(&Expr::X)
    }

    fn derivative(&self, var: &Expr) -> Expr {
        use Expr::*;
        let b = Box::new;
        match self {
            Num(_) => Num(0.0),
            X | Z => Num(if self == var { 1.0 } else { 0.0 }),
            Neg(a) => simplify(Neg(b(a.derivative(var)))),
            Add(l, r) => simplify(Add(b(l.derivative(var)), b(r.derivative(var)))),
            Sub(l, r) => simplify(Sub(b(l.derivative(var)), b(r.derivative(var)))),
            Mul(l, r) => simplify(Add(
                b(simplify(Mul(b(l.derivative(var)), r.clone()))),
                b(simplify(Mul(l.clone(), b(r.derivative(var))))),
            )),
            Div(l, r) => {
                // (l'r - lr') / r^2
                let num = simplify(Sub(
                    b(simplify(Mul(b(l.derivative(var)), r.clone()))),
                    b(simplify(Mul(l.clone(), b(r.derivative(var))))),
                ));
                simplify(Div(b(num), b(Pow(r.clone(), b(Num(2.0))))))
            }
            Pow(base, exp) => {
                if !exp.depends_on(var) {
                    // n base^(n-1) base'
                    let n = exp.clone();
                    let reduced = simplify(Sub(n.clone(), b(Num(1.0))));
                    simplify(Mul(
                        b(simplify(Mul(n, b(simplify(Pow(base.clone(), b(reduced))))))),
                        b(base.derivative(var)),
                    ))
                } else {
                    // d(a^g) = a^g (g' ln a + g a'/a); ln a is not in the grammar, so only
                    // constant bases are supported: a^g ln(a) g'
                    match base.as_ref() {
                        Num(a) => simplify(Mul(
                            b(simplify(Mul(b(self.clone()), b(Num(a.ln()))))),
                            b(exp.derivative(var)),
                        )),
                        _ => Num(f64::NAN),
                    }
                }
            }
            Call(f, a) => {
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(b(Call(Func::Sin, a.clone()))),
                    Func::Exp => self.clone(),
                    Func::Sqrt => Div(b(Num(0.5)), b(self.clone())),
                };
                simplify(Mul(b(outer), b(a.derivative(var))))
            }
        }
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(n) if *n == v)
}

fn simplify(e: Expr) -> Expr {
    use Expr::*;
    match e {
        Add(l, r) if is_num(&l, 0.0) => *r,
        Add(l, r) if is_num(&r, 0.0) => *l,
        Sub(l, r) if is_num(&r, 0.0) => *l,
        Sub(l, r) if is_num(&l, 0.0) => Neg(r),
        Mul(l, _) if is_num(&l, 0.0) => Num(0.0),
        Mul(_, r) if is_num(&r, 0.0) => Num(0.0),
        Mul(l, r) if is_num(&l, 1.0) => *r,
        Mul(l, r) if is_num(&r, 1.0) => *l,
        Div(l, _) if is_num(&l, 0.0) => Num(0.0),
        Pow(l, r) if is_num(&r, 1.0) => *l,
        Pow(_, r) if is_num(&r, 0.0) => Num(1.0),
        Neg(a) if is_num(&a, 0.0) => Num(0.0),
        Add(l, r) => match (*l, *r) {
            (Num(a), Num(b)) => Num(a + b),
            (l, r) => Add(Box::new(l), Box::new(r)),
        },
        Sub(l, r) => match (*l, *r) {
            (Num(a), Num(b)) => Num(a - b),
            (l, r) => Sub(Box::new(l), Box::new(r)),
        },
        Mul(l, r) => match (*l, *r) {
            (Num(a), Num(b)) => Num(a * b),
            (l, r) => Mul(Box::new(l), Box::new(r)),
        },
        other => other,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Z => write!(f, "z"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0), -4.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("1.5e2 + x", 1.0), 151.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("0.1*sin(2*pi*x)", 0.25) - 0.1).abs() < 1e-15);
        assert!((ev("exp(x) - e", 1.0)).abs() < 1e-15);
        assert_eq!(Expr::parse("x*z").unwrap().eval(2.0, 3.0), 6.0);
        assert_eq!(Expr::parse("y").unwrap().eval(2.0, 3.0), 3.0);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "1 +", "sin x", "(1", "foo(x)", "1 $ 2", "x x"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let cases = ["0.1*sin(2*pi*x)", "x^2/2", "exp(-x)*cos(3*x)", "sqrt(1 + x^2)", "1/(2 + x)", "2^x"];
        for s in cases {
            let e = Expr::parse(s).unwrap();
            let d = e.derivative_x();
            let dd = d.derivative_x();
            for &x in &[0.1, 0.37, 0.8] {
                let h = 1e-5;
                let fd: f64 = (e.eval(x + h, 0.0) - e.eval(x - h, 0.0)) / (2.0 * h);
                assert!((d.eval::<f64>(x, 0.0) - fd).abs() < 1e-8, "{s} at {x}");
                let fd2 = (d.eval(x + h, 0.0) - d.eval(x - h, 0.0)) / (2.0 * h);
                assert!((dd.eval::<f64>(x, 0.0) - fd2).abs() < 1e-6, "{s}'' at {x}");
            }
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        assert_eq!(Expr::parse("3*pi").unwrap().derivative_x(), Expr::Num(0.0));
        assert_eq!(Expr::parse("z^2").unwrap().derivative_x(), Expr::Num(0.0));
    }
}
