//! `--derive "name := expr"` — derived columns from arithmetic and
//! comparison expressions over continuous columns.
//!
//! Comparisons produce a 0/1 categorical column; arithmetic produces a
//! continuous column. Missing inputs propagate to missing outputs.

use causal_core::data::{Column, Dataset};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
    Ne,
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '>' | '<' | '=' | '!' => {
                let two = if i + 1 < chars.len() {
                    Some(chars[i + 1])
                } else {
                    None
                };
                match (c, two) {
                    ('>', Some('=')) => {
                        out.push(Tok::Ge);
                        i += 2;
                    }
                    ('<', Some('=')) => {
                        out.push(Tok::Le);
                        i += 2;
                    }
                    ('=', Some('=')) => {
                        out.push(Tok::Eq);
                        i += 2;
                    }
                    ('!', Some('=')) => {
                        out.push(Tok::Ne);
                        i += 2;
                    }
                    ('>', _) => {
                        out.push(Tok::Gt);
                        i += 1;
                    }
                    ('<', _) => {
                        out.push(Tok::Lt);
                        i += 1;
                    }
                    _ => return Err(format!("unexpected `{c}` in expression")),
                }
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| format!("bad number `{text}`"))?;
                out.push(Tok::Num(v));
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(format!("unexpected `{c}` in expression")),
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Expr {
    Num(f64),
    Col(String),
    Binary(Box<Expr>, Tok, Box<Expr>),
    Neg(Box<Expr>),
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let lhs = self.add()?;
        if let Some(op) = self.peek() {
            if matches!(op, Tok::Ge | Tok::Le | Tok::Gt | Tok::Lt | Tok::Eq | Tok::Ne) {
                let op = self.next().unwrap();
                let rhs = self.add()?;
                return Ok(Expr::Binary(Box::new(lhs), op, Box::new(rhs)));
            }
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr, String> {
        let mut lhs = self.mul()?;
        while matches!(self.peek(), Some(Tok::Plus) | Some(Tok::Minus)) {
            let op = self.next().unwrap();
            let rhs = self.mul()?;
            lhs = Expr::Binary(Box::new(lhs), op, Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while matches!(self.peek(), Some(Tok::Star) | Some(Tok::Slash)) {
            let op = self.next().unwrap();
            let rhs = self.unary()?;
            lhs = Expr::Binary(Box::new(lhs), op, Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, String> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => Ok(Expr::Col(name)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err("missing `)`".into()),
                }
            }
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

fn is_comparison(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Binary(_, Tok::Ge | Tok::Le | Tok::Gt | Tok::Lt | Tok::Eq | Tok::Ne, _)
    )
}

fn eval(e: &Expr, d: &Dataset, row: usize) -> Result<Option<f64>, String> {
    match e {
        Expr::Num(v) => Ok(Some(*v)),
        Expr::Col(name) => match d.column(name).map_err(|e| e.to_string())? {
            Column::Continuous { values, missing } => {
                Ok(if missing[row] { None } else { Some(values[row]) })
            }
            Column::Categorical { .. } => Err(format!(
                "column `{name}` is categorical; derive expressions read continuous columns"
            )),
        },
        Expr::Neg(inner) => Ok(eval(inner, d, row)?.map(|v| -v)),
        Expr::Binary(l, op, r) => {
            let (a, b) = match (eval(l, d, row)?, eval(r, d, row)?) {
                (Some(a), Some(b)) => (a, b),
                _ => return Ok(None),
            };
            Ok(Some(match op {
                Tok::Plus => a + b,
                Tok::Minus => a - b,
                Tok::Star => a * b,
                Tok::Slash => a / b,
                Tok::Ge => (a >= b) as i32 as f64,
                Tok::Le => (a <= b) as i32 as f64,
                Tok::Gt => (a > b) as i32 as f64,
                Tok::Lt => (a < b) as i32 as f64,
                Tok::Eq => (a == b) as i32 as f64,
                Tok::Ne => (a != b) as i32 as f64,
                _ => unreachable!(),
            }))
        }
    }
}

/// Apply one `name := expr` directive, returning the extended dataset.
pub fn apply_derive(d: &Dataset, directive: &str) -> Result<Dataset, String> {
    let (name, expr_text) = directive
        .split_once(":=")
        .ok_or_else(|| format!("derive directive `{directive}` must look like `name := expr`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err("derive target name is empty".into());
    }
    let toks = lex(expr_text.trim())?;
    let mut parser = Parser { toks, pos: 0 };
    let expr = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return Err(format!("trailing tokens in `{expr_text}`"));
    }

    let n = d.n_rows();
    let mut values = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for row in 0..n {
        match eval(&expr, d, row)? {
            Some(v) => {
                values.push(v);
                missing.push(false);
            }
            None => {
                values.push(f64::NAN);
                missing.push(true);
            }
        }
    }
    let col = if is_comparison(&expr) {
        Column::Categorical {
            levels: vec!["0".to_string(), "1".to_string()],
            codes: values
                .iter()
                .zip(&missing)
                .map(|(&v, &m)| if m { 0 } else { (v == 1.0) as u32 })
                .collect(),
            missing,
        }
    } else {
        Column::Continuous { values, missing }
    };
    d.with_column(name, col).map_err(|e| e.to_string())
}
