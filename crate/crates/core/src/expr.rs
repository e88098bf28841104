//! Tiny arithmetic expression trees for rate and coefficient formulas.
//!
//! Grammar: `+ - * / ^` with usual precedence (`^` right-associative, binds
//! tighter than unary minus), parentheses, numeric literals, the functions
//! `exp`, `log`, `sqrt`, and a single free variable (`n` or `x`).

use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character `{0}` at byte {1}")]
    BadChar(char, usize),
    #[error("unexpected token `{0}` at byte {1}")]
    BadToken(String, usize),
    #[error("unknown identifier `{0}` (expected n, x, exp, log, sqrt)")]
    UnknownIdent(String),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((tok, at)) => Err(ExprError::BadToken(tok.to_string(), at)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => t,
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, b) => a.eval(t).powf(b.eval(t)),
            Expr::Exp(a) => a.eval(t).exp(),
            Expr::Log(a) => a.eval(t).ln(),
            Expr::Sqrt(a) => a.eval(t).sqrt(),
        }
    }

    /// Symbolic derivative with respect to the free variable.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        fn b(e: Expr) -> Box<Expr> {
            Box::new(e)
        }
        match self {
            Num(_) => Num(0.0),
            Var => Num(1.0),
            Neg(a) => Neg(b(a.derivative())),
            Add(x, y) => Add(b(x.derivative()), b(y.derivative())),
            Sub(x, y) => Sub(b(x.derivative()), b(y.derivative())),
            Mul(x, y) => Add(
                b(Mul(b(x.derivative()), y.clone())),
                b(Mul(x.clone(), b(y.derivative()))),
            ),
            Div(x, y) => Div(
                b(Sub(
                    b(Mul(b(x.derivative()), y.clone())),
                    b(Mul(x.clone(), b(y.derivative()))),
                )),
                b(Mul(y.clone(), y.clone())),
            ),
            Pow(base, exp) => match exp.as_ref() {
                // f^k -> k f^(k-1) f'
                Num(k) => Mul(
                    b(Mul(b(Num(*k)), b(Pow(base.clone(), b(Num(k - 1.0)))))),
                    b(base.derivative()),
                ),
                // f^g -> f^g (g' ln f + g f'/f)
                _ => Mul(
                    b(Pow(base.clone(), exp.clone())),
                    b(Add(
                        b(Mul(b(exp.derivative()), b(Log(base.clone())))),
                        b(Div(b(Mul(exp.clone(), b(base.derivative()))), base.clone())),
                    )),
                ),
            },
            Exp(x) => Mul(b(Exp(x.clone())), b(x.derivative())),
            Log(x) => Div(b(x.derivative()), x.clone()),
            Sqrt(x) => Div(
                b(x.derivative()),
                b(Mul(b(Num(2.0)), b(Sqrt(x.clone())))),
            ),
        }
    }

    /// Substitute `var -> var + delta` (used to build dual models, where
    /// b*_i = a_{i+1}).
    pub fn shift_var(&self, delta: f64) -> Expr {
        fn go(e: &Expr, d: f64) -> Expr {
            match e {
                Expr::Num(v) => Expr::Num(*v),
                Expr::Var => Expr::Add(Box::new(Expr::Var), Box::new(Expr::Num(d))),
                Expr::Neg(a) => Expr::Neg(Box::new(go(a, d))),
                Expr::Add(a, b) => Expr::Add(Box::new(go(a, d)), Box::new(go(b, d))),
                Expr::Sub(a, b) => Expr::Sub(Box::new(go(a, d)), Box::new(go(b, d))),
                Expr::Mul(a, b) => Expr::Mul(Box::new(go(a, d)), Box::new(go(b, d))),
                Expr::Div(a, b) => Expr::Div(Box::new(go(a, d)), Box::new(go(b, d))),
                Expr::Pow(a, b) => Expr::Pow(Box::new(go(a, d)), Box::new(go(b, d))),
                Expr::Exp(a) => Expr::Exp(Box::new(go(a, d))),
                Expr::Log(a) => Expr::Log(Box::new(go(a, d))),
                Expr::Sqrt(a) => Expr::Sqrt(Box::new(go(a, d))),
            }
        }
        if delta == 0.0 {
            self.clone()
        } else {
            go(self, delta)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var => write!(f, "n"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Op(c) => write!(f, "{c}"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| ExprError::BadToken(text.to_string(), start))?;
            out.push((Token::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((Token::Ident(src[start..i].to_string()), start));
        } else if "+-*/^".contains(c) {
            out.push((Token::Op(c), i));
            i += 1;
        } else if c == '(' {
            out.push((Token::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Token::RParen, i));
            i += 1;
        } else {
            return Err(ExprError::BadChar(c, i));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<(&Token, usize)> {
        self.tokens.get(self.pos).map(|(t, at)| (t, *at))
    }

    fn next(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some((Token::Op(op @ ('+' | '-')), _)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        while let Some((Token::Op(op @ ('*' | '/')), _)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // factor := '-' factor | power
    fn factor(&mut self) -> Result<Expr, ExprError> {
        if let Some((Token::Op('-'), _)) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    // power := primary ('^' factor)?   (right-assoc)
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if let Some((Token::Op('^'), _)) = self.peek() {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.next() {
            Some((Token::Num(v), _)) => Ok(Expr::Num(v)),
            Some((Token::Ident(name), _)) => match name.as_str() {
                "n" | "x" => Ok(Expr::Var),
                "exp" | "log" | "ln" | "sqrt" => {
                    match self.next() {
                        Some((Token::LParen, _)) => {}
                        Some((t, at)) => return Err(ExprError::BadToken(t.to_string(), at)),
                        None => return Err(ExprError::UnexpectedEnd),
                    }
                    let arg = self.expr()?;
                    match self.next() {
                        Some((Token::RParen, _)) => {}
                        Some((t, at)) => return Err(ExprError::BadToken(t.to_string(), at)),
                        None => return Err(ExprError::UnexpectedEnd),
                    }
                    Ok(match name.as_str() {
                        "exp" => Expr::Exp(Box::new(arg)),
                        "sqrt" => Expr::Sqrt(Box::new(arg)),
                        _ => Expr::Log(Box::new(arg)),
                    })
                }
                _ => Err(ExprError::UnknownIdent(name)),
            },
            Some((Token::LParen, _)) => {
                let e = self.expr()?;
                match self.next() {
                    Some((Token::RParen, _)) => Ok(e),
                    Some((t, at)) => Err(ExprError::BadToken(t.to_string(), at)),
                    None => Err(ExprError::UnexpectedEnd),
                }
            }
            Some((t, at)) => Err(ExprError::BadToken(t.to_string(), at)),
            None => Err(ExprError::UnexpectedEnd),
        }
    }
}
