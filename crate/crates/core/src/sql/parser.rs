//! Recursive-descent parser for the supported SELECT subset.
//!
//! ```text
//! query     := SELECT item (, item)* FROM ident (, ident)*
//!              [WHERE pred (AND pred)*] [GROUP BY ident (, ident)*]
//!              [ORDER BY expr [ASC|DESC] (, ...)*] [LIMIT int] [;]
//! item      := expr [[AS] ident]
//! pred      := expr cmp expr | expr BETWEEN expr AND expr
//! expr      := term ((+|-) term)*
//! term      := unary ((*|/) unary)*
//! unary     := - unary | primary
//! primary   := literal | DATE 'yyyy-mm-dd' | ident | ident ( args ) | ( expr )
//! ```

use super::ast::{BinOp, CmpOp, Expr, OrderItem, ParsedQuery, Predicate, QueryMetadata, SelectItem};
use super::lexer::{is_keyword, tokenize, Tok, Token};
use super::SqlError;
use crate::agg::AggFunction;
use crate::value::parse_date;

/// Parses one statement and extracts its metadata.
pub fn parse(sql: &str) -> Result<(ParsedQuery, QueryMetadata), SqlError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser {
        tokens,
        i: 0,
        end: sql.len(),
    };
    let q = p.query()?;
    let meta = QueryMetadata::of(&q);
    Ok((q, meta))
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
    end: usize,
}

/// SQL aggregate names; every other call is a UDF.
fn sql_aggregate(name: &str) -> Option<AggFunction> {
    match name.to_ascii_lowercase().as_str() {
        "count" => Some(AggFunction::Count),
        "sum" => Some(AggFunction::Sum),
        "avg" => Some(AggFunction::Avg),
        "min" => Some(AggFunction::Min),
        "max" => Some(AggFunction::Max),
        "median" => Some(AggFunction::Median),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.i).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.i).map_or(self.end, |t| t.pos)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(t) => format!("{t:?}"),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.err(format!("expected {} but found {}", kw.to_uppercase(), self.describe()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), SqlError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.err(format!("expected {what} but found {}", self.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SqlError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_keyword(s) => {
                let s = s.clone();
                self.i += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what} but found {}", self.describe())),
        }
    }

    fn comma_list<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, SqlError>,
    ) -> Result<Vec<T>, SqlError> {
        let mut out = vec![item(self)?];
        while self.eat(&Tok::Comma) {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn query(&mut self) -> Result<ParsedQuery, SqlError> {
        self.expect_keyword("select")?;
        let select = self.comma_list(Self::select_item)?;
        self.expect_keyword("from")?;
        let from = self.comma_list(|p| p.ident("table name"))?;
        let mut predicates = Vec::new();
        if self.eat_keyword("where") {
            loop {
                self.predicate(&mut predicates)?;
                if !self.eat_keyword("and") {
                    break;
                }
            }
        }
        let mut group_by = Vec::new();
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            group_by = self.comma_list(|p| p.ident("column name"))?;
        }
        let mut order_by = Vec::new();
        if self.eat_keyword("order") {
            self.expect_keyword("by")?;
            order_by = self.comma_list(|p| {
                let expr = p.expr()?;
                let desc = if p.eat_keyword("desc") {
                    true
                } else {
                    p.eat_keyword("asc");
                    false
                };
                Ok(OrderItem { expr, desc })
            })?;
        }
        let mut limit = None;
        if self.eat_keyword("limit") {
            match self.peek() {
                Some(&Tok::Int(n)) if n >= 0 => {
                    self.i += 1;
                    limit = Some(n as u64);
                }
                _ => return self.err("LIMIT expects a non-negative integer"),
            }
        }
        self.eat(&Tok::Semi);
        if self.peek().is_some() {
            return self.err(format!("unexpected {}", self.describe()));
        }
        Ok(ParsedQuery {
            select,
            from,
            predicates,
            group_by,
            order_by,
            limit,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        let expr = self.expr()?;
        let alias = if self.eat_keyword("as") {
            Some(self.ident("alias")?)
        } else {
            match self.peek() {
                Some(Tok::Ident(s)) if !is_keyword(s) => Some(self.ident("alias")?),
                _ => None,
            }
        };
        Ok(SelectItem { expr, alias })
    }

    fn predicate(&mut self, out: &mut Vec<Predicate>) -> Result<(), SqlError> {
        let left = self.expr()?;
        if self.eat_keyword("between") {
            let lo = self.expr()?;
            self.expect_keyword("and")?;
            let hi = self.expr()?;
            out.push(Predicate {
                left: left.clone(),
                op: CmpOp::Ge,
                right: lo,
            });
            out.push(Predicate {
                left,
                op: CmpOp::Le,
                right: hi,
            });
            return Ok(());
        }
        let op = match self.peek() {
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            _ => return self.err(format!("expected comparison but found {}", self.describe())),
        };
        self.i += 1;
        let right = self.expr()?;
        out.push(Predicate { left, op, right });
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(left),
            };
            self.i += 1;
            left = Expr::binary(op, left, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(left),
            };
            self.i += 1;
            left = Expr::binary(op, left, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat(&Tok::Minus) {
            let pos = self.pos();
            return Ok(match self.unary()? {
                Expr::Int(v) => Expr::Int(v.checked_neg().ok_or(SqlError::Syntax {
                    pos,
                    message: "integer literal out of range".into(),
                })?),
                Expr::Float(v) => Expr::Float(-v),
                e => Expr::binary(BinOp::Sub, Expr::Int(0), e),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Int(v) => {
                self.i += 1;
                Ok(Expr::Int(v))
            }
            Tok::Float(v) => {
                self.i += 1;
                Ok(Expr::Float(v))
            }
            Tok::Str(s) => {
                self.i += 1;
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name.eq_ignore_ascii_case("date") => {
                self.i += 1;
                let pos = self.pos();
                match self.peek() {
                    Some(Tok::Str(s)) => match parse_date(s) {
                        Some(d) => {
                            self.i += 1;
                            Ok(Expr::Date(d))
                        }
                        None => Err(SqlError::Syntax {
                            pos,
                            message: format!("invalid date literal '{s}'"),
                        }),
                    },
                    _ => self.err("expected date string after DATE"),
                }
            }
            Tok::Ident(name) if !is_keyword(&name) => {
                self.i += 1;
                if !self.eat(&Tok::LParen) {
                    return Ok(Expr::Column(name));
                }
                if let Some(func) = sql_aggregate(&name) {
                    if func == AggFunction::Count && self.eat(&Tok::Star) {
                        self.expect(&Tok::RParen, "`)`")?;
                        return Ok(Expr::Agg { func, arg: None });
                    }
                    let arg = self.expr()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    return Ok(Expr::Agg {
                        func,
                        arg: Some(Box::new(arg)),
                    });
                }
                let args = if self.eat(&Tok::RParen) {
                    Vec::new()
                } else {
                    let args = self.comma_list(Self::expr)?;
                    self.expect(&Tok::RParen, "`)`")?;
                    args
                };
                Ok(Expr::Call { name, args })
            }
            _ => self.err(format!("expected expression but found {}", self.describe())),
        }
    }
}
