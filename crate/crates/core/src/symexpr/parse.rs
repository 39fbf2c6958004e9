use std::collections::BTreeMap;

use thiserror::Error;

use super::Expr;

/// Expression syntax error; `offset` is a character index into the source text.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset}")]
pub struct ExprParseError {
    pub message: String,
    pub offset: usize,
}

/// Names visible to the parser: chart coordinates plus named constants.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub coords: Vec<String>,
    pub constants: BTreeMap<String, f64>,
}

impl SymbolTable {
    pub fn new(coords: &[String]) -> Self {
        Self { coords: coords.to_vec(), constants: BTreeMap::new() }
    }

    pub fn with_constants(mut self, constants: &BTreeMap<String, f64>) -> Self {
        self.constants.extend(constants.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

/// Parses infix text: `+ - * / ^`, parentheses, `exp log sin cos sqrt tan`,
/// `pi`, chart coordinates and named constants.
pub fn parse(text: &str, symbols: &SymbolTable) -> Result<Expr, ExprParseError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0, symbols };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected '{}'", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    symbols: &'a SymbolTable,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprParseError {
        ExprParseError { message: message.into(), offset: self.pos }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                acc = acc.div(&self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprParseError> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exponent = self.unary()?;
        Ok(match exponent.as_const() {
            Some(k) => base.powf(k),
            None => exponent.mul(&base.ln()).exp(),
        })
    }

    fn atom(&mut self) -> Result<Expr, ExprParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprParseError> {
        let start = self.pos;
        let n = self.chars.len();
        while self.pos < n && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < n && matches!(self.chars[self.pos], 'e' | 'E') {
            let mut q = self.pos + 1;
            if q < n && matches!(self.chars[q], '+' | '-') {
                q += 1;
            }
            if q < n && self.chars[q].is_ascii_digit() {
                self.pos = q;
                while self.pos < n && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map(Expr::constant).map_err(|_| ExprParseError {
            message: format!("invalid number '{text}'"),
            offset: start,
        })
    }

    fn ident(&mut self) -> Result<Expr, ExprParseError> {
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        if self.peek() == Some('(') {
            self.pos += 1;
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return match name.as_str() {
                "exp" => Ok(arg.exp()),
                "log" | "ln" => Ok(arg.ln()),
                "sin" => Ok(arg.sin()),
                "cos" => Ok(arg.cos()),
                "tan" => Ok(arg.sin().div(&arg.cos())),
                "sqrt" => Ok(arg.powf(0.5)),
                _ => Err(ExprParseError { message: format!("unknown function '{name}'"), offset: start }),
            };
        }
        if let Some(i) = self.symbols.coords.iter().position(|c| *c == name) {
            return Ok(Expr::var(i));
        }
        if let Some(v) = self.symbols.constants.get(&name) {
            return Ok(Expr::constant(*v));
        }
        if name == "pi" {
            return Ok(Expr::constant(std::f64::consts::PI));
        }
        Err(ExprParseError { message: format!("unknown symbol '{name}'"), offset: start })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SymbolTable {
        let mut t = SymbolTable::new(&["x1".into(), "x2".into()]);
        t.constants.insert("b".into(), -1.0);
        t
    }

    fn eval(s: &str, p: &[f64]) -> f64 {
        parse(s, &table()).unwrap().evaluate(p).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2*3", &[]), 7.0);
        assert_eq!(eval("2^3^2", &[]), 512.0);
        assert_eq!(eval("-2^2", &[]), -4.0);
        assert_eq!(eval("8/4/2", &[]), 1.0);
        assert_eq!(eval("x1 - x2 - 1", &[5.0, 1.0]), 3.0);
    }

    #[test]
    fn functions_constants_and_whitespace() {
        assert!((eval(" exp( 2 * x2 ) ", &[0.0, 1.0]) - 2f64.exp()).abs() < 1e-15);
        assert_eq!(eval("-b*x2", &[0.0, 3.0]), 3.0);
        assert!((eval("sin(pi/2)", &[]) - 1.0).abs() < 1e-15);
        assert!((eval("sqrt(x1)", &[4.0, 0.0]) - 2.0).abs() < 1e-15);
        assert_eq!(eval("1.5e-1*2e1", &[]), 3.0);
        assert!((eval("x1^x2", &[2.0, 3.0]) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn reports_offsets() {
        let err = parse("x1 + y3", &table()).unwrap_err();
        assert_eq!(err.offset, 5);
        let err = parse("(x1 + 1", &table()).unwrap_err();
        assert!(err.message.contains("')'"));
        assert!(parse("x1 +", &table()).is_err());
        assert!(parse("foo(x1)", &table()).is_err());
        assert!(parse("x1 x2", &table()).is_err());
    }
}
