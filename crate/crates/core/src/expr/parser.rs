//! Recursive-descent parser for the expression language.
//!
//! Grammar (see `docs/expression-grammar.md` for the shipped EBNF):
//!
//! ```text
//! expression = term { ("+" | "-") term }
//! term       = factor { ("*" | "/") factor }
//! factor     = "-" factor | power
//! power      = atom { "^" exponent }
//! exponent   = ["-"] integer | "(" ["-"] integer ["/" integer] ")"
//! atom       = number | identifier | function "(" expression ")"
//!            | "(" expression ")"
//! ```
//!
//! Binary operators of equal precedence associate to the left; `^` binds
//! tighter than unary minus. Identifiers `x` followed by digits are chart
//! coordinates; `sin cos tan exp log sqrt` are functions and require
//! parentheses; everything else is a parameter symbol.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Exponent, Expr, ScalarExpression};

/// Parse failure with a byte position into the source text.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        ParseError {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn coordinate_out_of_range(position: usize, index: usize, dimension: usize) -> Self {
        ParseError::new(
            position,
            format!("coordinate index out of range: x{index} on a chart of dimension {dimension}"),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number { value: f64, plain_integer: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number { value, .. } => format!("number `{value:?}`"),
            Token::Ident(name) => format!("identifier `{name}`"),
            Token::Plus => "'+'".to_string(),
            Token::Minus => "'-'".to_string(),
            Token::Star => "'*'".to_string(),
            Token::Slash => "'/'".to_string(),
            Token::Caret => "'^'".to_string(),
            Token::LParen => "'('".to_string(),
            Token::RParen => "')'".to_string(),
            Token::End => "end of input".to_string(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                let mut has_dot = false;
                let mut has_exp = false;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() {
                        i += 1;
                    } else if d == '.' && !has_dot && !has_exp {
                        has_dot = true;
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && !has_exp
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || ((bytes[i + 1] == b'+' || bytes[i + 1] == b'-')
                                && i + 2 < bytes.len()
                                && (bytes[i + 2] as char).is_ascii_digit()))
                    {
                        has_exp = true;
                        i += 1;
                        if bytes[i] == b'+' || bytes[i] == b'-' {
                            i += 1;
                        }
                    } else {
                        break;
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| {
                    ParseError::new(start, format!("invalid number literal `{text}`"))
                })?;
                tokens.push((
                    Token::Number {
                        value,
                        plain_integer: !has_dot && !has_exp,
                    },
                    start,
                ));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push((Token::Ident(source[start..i].to_owned()), start));
            }
            other => {
                return Err(ParseError::new(
                    i,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    tokens.push((Token::End, source.len()));
    Ok(tokens)
}

const FUNCTIONS: &[&str] = &["sin", "cos", "tan", "exp", "log", "sqrt"];

/// Identifiers of the form `x<digits>` are coordinates.
fn coordinate_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    dimension: usize,
    declared: Option<&'a BTreeMap<String, f64>>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<(), ParseError> {
        if *self.peek() == token {
            self.advance();
            Ok(())
        } else {
            Err(ParseError::new(
                self.position(),
                format!("expected {what}, found {}", self.peek().describe()),
            ))
        }
    }

    fn expression(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.advance();
                    let rhs = self.term()?;
                    acc = Expr::Add(Box::new(acc), Box::new(rhs));
                }
                Token::Minus => {
                    self.advance();
                    let rhs = self.term()?;
                    acc = Expr::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.advance();
                    let rhs = self.factor()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(rhs));
                }
                Token::Slash => {
                    self.advance();
                    let rhs = self.factor()?;
                    acc = Expr::Div(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.advance();
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while *self.peek() == Token::Caret {
            self.advance();
            let exponent = self.exponent()?;
            base = Expr::Pow(Box::new(base), exponent);
        }
        Ok(base)
    }

    fn integer_literal(&mut self, what: &str) -> Result<i64, ParseError> {
        let pos = self.position();
        match self.advance() {
            Token::Number {
                value,
                plain_integer: true,
            } if value >= 0.0 && value <= i64::MAX as f64 => Ok(value as i64),
            other => Err(ParseError::new(
                pos,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn exponent(&mut self) -> Result<Exponent, ParseError> {
        match self.peek().clone() {
            Token::Minus => {
                self.advance();
                let num = self.integer_literal("an integer exponent")?;
                Ok(Exponent::integer(-num))
            }
            Token::Number { .. } => {
                let num = self.integer_literal("an integer exponent")?;
                Ok(Exponent::integer(num))
            }
            Token::LParen => {
                self.advance();
                let negative = if *self.peek() == Token::Minus {
                    self.advance();
                    true
                } else {
                    false
                };
                let num = self.integer_literal("an integer exponent")?;
                let den = if *self.peek() == Token::Slash {
                    self.advance();
                    let pos = self.position();
                    let den = self.integer_literal("a positive integer denominator")?;
                    if den == 0 {
                        return Err(ParseError::new(pos, "exponent denominator must be nonzero"));
                    }
                    den
                } else {
                    1
                };
                self.expect(Token::RParen, "')' closing the exponent")?;
                Ok(Exponent::rational(if negative { -num } else { num }, den))
            }
            other => Err(ParseError::new(
                self.position(),
                format!(
                    "expected an integer or rational exponent, found {}",
                    other.describe()
                ),
            )),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.position();
        match self.advance() {
            Token::Number { value, .. } => Ok(Expr::Constant(value)),
            Token::LParen => {
                let inner = self.expression()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if FUNCTIONS.contains(&name.as_str()) {
                    self.expect(Token::LParen, &format!("'(' after function name `{name}`"))?;
                    let arg = Box::new(self.expression()?);
                    self.expect(Token::RParen, "')'")?;
                    return Ok(match name.as_str() {
                        "sin" => Expr::Sin(arg),
                        "cos" => Expr::Cos(arg),
                        "tan" => Expr::Tan(arg),
                        "exp" => Expr::Exp(arg),
                        "log" => Expr::Log(arg),
                        "sqrt" => Expr::Sqrt(arg),
                        _ => unreachable!(),
                    });
                }
                if let Some(index) = coordinate_index(&name) {
                    if index >= self.dimension {
                        return Err(ParseError::coordinate_out_of_range(
                            pos,
                            index,
                            self.dimension,
                        ));
                    }
                    return Ok(Expr::Coordinate(index));
                }
                if let Some(declared) = self.declared {
                    if !declared.contains_key(&name) {
                        return Err(ParseError::new(
                            pos,
                            format!(
                                "unknown identifier `{name}`: not a coordinate, function, \
                                 or declared parameter"
                            ),
                        ));
                    }
                }
                Ok(Expr::Parameter(name))
            }
            other => Err(ParseError::new(
                pos,
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }
}

pub(super) fn parse(
    source: &str,
    dimension: usize,
    declared: Option<&BTreeMap<String, f64>>,
) -> Result<ScalarExpression, ParseError> {
    assert!(dimension >= 1, "chart dimension must be at least 1");
    if source.trim().is_empty() {
        return Err(ParseError::new(0, "empty expression"));
    }
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        dimension,
        declared,
    };
    let ast = parser.expression()?;
    if *parser.peek() != Token::End {
        return Err(ParseError::new(
            parser.position(),
            format!("unexpected trailing {}", parser.peek().describe()),
        ));
    }
    let mut expression = ScalarExpression {
        ast,
        dimension,
        parameters: BTreeMap::new(),
    };
    if let Some(declared) = declared {
        for name in expression.parameter_names() {
            if let Some(value) = declared.get(&name) {
                expression.parameters.insert(name, *value);
            }
        }
    }
    Ok(expression)
}
