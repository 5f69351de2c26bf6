//! Arithmetic expressions in one variable `z`, used to write twist profiles
//! such as `3*z^2*cos(10*z)*log(z+1)`.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | 'z' | 'pi' | ident '(' expr ')' | '(' expr ')'
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

/// A unary function callable from expressions. `check` returns an error
/// message when the argument is outside the function's domain.
#[derive(Clone, Copy)]
pub struct Function {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
    pub check: fn(f64) -> Option<&'static str>,
}

impl fmt::Debug for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

impl PartialEq for Function {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

fn no_check(_: f64) -> Option<&'static str> {
    None
}

fn positive(x: f64) -> Option<&'static str> {
    (x <= 0.0).then_some("log of a non-positive argument")
}

/// Registered functions. Extend here to add more.
pub static FUNCTIONS: &[Function] = &[
    Function { name: "sin", eval: f64::sin, check: no_check },
    Function { name: "cos", eval: f64::cos, check: no_check },
    Function { name: "log", eval: f64::ln, check: positive },
    Function { name: "exp", eval: f64::exp, check: no_check },
];

fn lookup(name: &str) -> Option<&'static Function> {
    FUNCTIONS.iter().find(|f| f.name == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(&'static Function, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, z: f64) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(x) => *x,
            Expr::Var => z,
            Expr::Neg(e) => -e.eval(z)?,
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(z)?, r.eval(z)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b)?,
                }
            }
            Expr::Call(f, arg) => {
                let x = arg.eval(z)?;
                if let Some(msg) = (f.check)(x) {
                    return Err(ExprError::Domain(format!("{msg} ({}({x}))", f.name)));
                }
                (f.eval)(x)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("non-finite result at z = {z}")))
        }
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64 {
        return Ok(base.powi(exponent as i32));
    }
    if base <= 0.0 {
        return Err(ExprError::Domain(format!(
            "non-integer power {exponent} of non-positive base {base}"
        )));
    }
    Ok((exponent * base.ln()).exp())
}

/// Parse `text` into an expression tree.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

/// Parse and evaluate in one step.
pub fn eval_str(text: &str, z: f64) -> Result<f64, ExprError> {
    parse(text)?.eval(z)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let exponent = self.factor()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() || ch == b'_' => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>().map(Expr::Num).map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if self.peek() == Some(b'(') {
            let f = lookup(name).ok_or_else(|| ExprError::UnknownFunction {
                name: name.to_string(),
                offset: start,
            })?;
            self.pos += 1;
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)` after function argument"));
            }
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if name == "z" {
            Ok(Expr::Var)
        } else if name == "pi" {
            Ok(Expr::Num(std::f64::consts::PI))
        } else {
            Err(ExprError::UnknownVariable { name: name.to_string(), offset: start })
        }
    }
}
