//! Filter expressions.
//!
//! ```text
//! expr       := or
//! or         := and ( '||' and )*
//! and        := unary ( '&&' unary )*
//! unary      := '!' unary | '(' expr ')' | comparison
//! comparison := ident op literal
//!             | ident 'in' '(' literal ( ',' literal )* ')'
//!             | ident 'contains' string
//! op         := '==' | '!=' | '<' | '<=' | '>' | '>='
//! literal    := number | string
//! string     := '\'' ( [^'\\] | '\\' . )* '\''
//! ident      := [A-Za-z_][A-Za-z0-9_.]* | '`' [^`]+ '`'
//! ```
//!
//! Empty or whitespace-only text matches every row. A comparison against a
//! null cell is false; `!` negates, so `!(x == 'a')` matches null rows.

use std::fmt;

use thiserror::Error;

use crate::table::{ColumnData, ColumnKind, MetadataTable, Schema, NULL_CODE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("syntax error at {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("type mismatch: '{op}' with {literal} literal is not valid on {kind} column '{column}'")]
    TypeMismatch {
        column: String,
        op: String,
        kind: ColumnKind,
        literal: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn is_ordering(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Num(f64),
    Str(String),
}

impl Literal {
    fn type_name(&self) -> &'static str {
        match self {
            Literal::Num(_) => "number",
            Literal::Str(_) => "string",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Cmp {
        column: String,
        op: CmpOp,
        value: Literal,
    },
    In {
        column: String,
        values: Vec<Literal>,
    },
    Contains {
        column: String,
        needle: String,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

/// A parsed, schema-checked filter. `None` matches everything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Filter {
    expr: Option<Expr>,
}

impl Filter {
    pub fn match_all() -> Self {
        Self { expr: None }
    }

    pub fn from_expr(expr: Expr, schema: &Schema) -> Result<Self, FilterError> {
        check(&expr, schema)?;
        Ok(Self { expr: Some(expr) })
    }

    pub fn parse(text: &str, schema: &Schema) -> Result<Self, FilterError> {
        let expr = Parser::new(text).parse()?;
        if let Some(e) = &expr {
            check(e, schema)?;
        }
        Ok(Self { expr })
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    pub fn is_match_all(&self) -> bool {
        self.expr.is_none()
    }

    /// Re-checks column references and literal types against `schema`.
    pub fn check(&self, schema: &Schema) -> Result<(), FilterError> {
        self.expr.as_ref().map_or(Ok(()), |e| check(e, schema))
    }

    pub fn and(self, other: Filter) -> Filter {
        match (self.expr, other.expr) {
            (None, e) | (e, None) => Filter { expr: e },
            (Some(a), Some(b)) => Filter {
                expr: Some(Expr::And(Box::new(a), Box::new(b))),
            },
        }
    }

    /// Canonical text; parsing it yields an equal filter.
    pub fn to_text(&self) -> String {
        self.expr.as_ref().map(|e| e.to_string()).unwrap_or_default()
    }

    /// Row mask over `table`. The filter must have been checked against the
    /// table's schema.
    pub fn evaluate(&self, table: &MetadataTable) -> Result<Vec<bool>, FilterError> {
        match &self.expr {
            None => Ok(vec![true; table.row_count()]),
            Some(e) => {
                check(e, table.schema())?;
                Ok(eval(e, table))
            }
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Convenience wrapper matching the engine's operation name.
pub fn parse_filter(text: &str, schema: &Schema) -> Result<Filter, FilterError> {
    Filter::parse(text, schema)
}

fn check(expr: &Expr, schema: &Schema) -> Result<(), FilterError> {
    let kind_of = |column: &str| {
        schema
            .get(column)
            .map(|c| c.kind)
            .ok_or_else(|| FilterError::UnknownColumn(column.to_string()))
    };
    let literal_ok = |kind: ColumnKind, lit: &Literal| match lit {
        Literal::Num(_) => kind == ColumnKind::Numeric,
        Literal::Str(_) => kind != ColumnKind::Numeric,
    };
    match expr {
        Expr::Cmp { column, op, value } => {
            let kind = kind_of(column)?;
            let ordering_ok = !op.is_ordering() || kind == ColumnKind::Numeric;
            if !literal_ok(kind, value) || !ordering_ok {
                return Err(FilterError::TypeMismatch {
                    column: column.clone(),
                    op: op.symbol().to_string(),
                    kind,
                    literal: value.type_name(),
                });
            }
            Ok(())
        }
        Expr::In { column, values } => {
            let kind = kind_of(column)?;
            if let Some(bad) = values.iter().find(|v| !literal_ok(kind, v)) {
                return Err(FilterError::TypeMismatch {
                    column: column.clone(),
                    op: "in".into(),
                    kind,
                    literal: bad.type_name(),
                });
            }
            Ok(())
        }
        Expr::Contains { column, .. } => {
            let kind = kind_of(column)?;
            if kind == ColumnKind::Numeric {
                return Err(FilterError::TypeMismatch {
                    column: column.clone(),
                    op: "contains".into(),
                    kind,
                    literal: "string",
                });
            }
            Ok(())
        }
        Expr::And(a, b) | Expr::Or(a, b) => {
            check(a, schema)?;
            check(b, schema)
        }
        Expr::Not(a) => check(a, schema),
    }
}

fn eval(expr: &Expr, table: &MetadataTable) -> Vec<bool> {
    let n = table.row_count();
    let column = |name: &str| table.column(name).expect("checked").1;
    match expr {
        Expr::And(a, b) => {
            let mut m = eval(a, table);
            for (x, y) in m.iter_mut().zip(eval(b, table)) {
                *x &= y;
            }
            m
        }
        Expr::Or(a, b) => {
            let mut m = eval(a, table);
            for (x, y) in m.iter_mut().zip(eval(b, table)) {
                *x |= y;
            }
            m
        }
        Expr::Not(a) => eval(a, table).into_iter().map(|x| !x).collect(),
        Expr::Cmp { column: c, op, value } => match (column(c), value) {
            (ColumnData::Numeric(xs), Literal::Num(v)) => xs
                .iter()
                .map(|x| x.is_some_and(|x| op.apply(x, *v)))
                .collect(),
            (ColumnData::Categorical(cat), Literal::Str(s)) => {
                let code = cat.code_of(s);
                cat.codes()
                    .iter()
                    .map(|&k| {
                        k != NULL_CODE
                            && match op {
                                CmpOp::Eq => Some(k) == code,
                                _ => Some(k) != code,
                            }
                    })
                    .collect()
            }
            (data, Literal::Str(s)) => (0..n)
                .map(|row| {
                    data.str_at(row).is_some_and(|v| match op {
                        CmpOp::Eq => v == s,
                        _ => v != s,
                    })
                })
                .collect(),
            _ => unreachable!("checked literal type"),
        },
        Expr::In { column: c, values } => match column(c) {
            ColumnData::Numeric(xs) => {
                let set: Vec<f64> = values
                    .iter()
                    .filter_map(|v| match v {
                        Literal::Num(x) => Some(*x),
                        _ => None,
                    })
                    .collect();
                xs.iter()
                    .map(|x| x.is_some_and(|x| set.contains(&x)))
                    .collect()
            }
            ColumnData::Categorical(cat) => {
                let mut hit = vec![false; cat.dictionary().len()];
                for v in values {
                    if let Literal::Str(s) = v {
                        if let Some(k) = cat.code_of(s) {
                            hit[k as usize] = true;
                        }
                    }
                }
                cat.codes()
                    .iter()
                    .map(|&k| k != NULL_CODE && hit[k as usize])
                    .collect()
            }
            data => {
                let set: std::collections::HashSet<&str> = values
                    .iter()
                    .filter_map(|v| match v {
                        Literal::Str(s) => Some(s.as_str()),
                        _ => None,
                    })
                    .collect();
                (0..n)
                    .map(|row| data.str_at(row).is_some_and(|v| set.contains(v)))
                    .collect()
            }
        },
        Expr::Contains { column: c, needle } => match column(c) {
            ColumnData::Categorical(cat) => {
                let hit: Vec<bool> = cat
                    .dictionary()
                    .iter()
                    .map(|v| v.contains(needle.as_str()))
                    .collect();
                cat.codes()
                    .iter()
                    .map(|&k| k != NULL_CODE && hit[k as usize])
                    .collect()
            }
            data => (0..n)
                .map(|row| data.str_at(row).is_some_and(|v| v.contains(needle.as_str())))
                .collect(),
        },
    }
}

// ---------------------------------------------------------------------------
// printing

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => 1,
        Expr::And(..) => 2,
        _ => 3,
    }
}

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !matches!(s, "in" | "contains")
}

fn write_ident(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_plain_ident(s) {
        f.write_str(s)
    } else {
        write!(f, "`{s}`")
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Display for f64 is the shortest string that parses back exactly.
            Literal::Num(x) => write!(f, "{x}"),
            Literal::Str(s) => {
                f.write_str("'")?;
                for c in s.chars() {
                    if c == '\'' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("'")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Cmp { column, op, value } => {
                write_ident(f, column)?;
                write!(f, " {} {value}", op.symbol())
            }
            Expr::In { column, values } => {
                write_ident(f, column)?;
                f.write_str(" in (")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Expr::Contains { column, needle } => {
                write_ident(f, column)?;
                write!(f, " contains {}", Literal::Str(needle.clone()))
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                let p = precedence(self);
                child(f, a, precedence(a) < p)?;
                f.write_str(if p == 1 { " || " } else { " && " })?;
                child(f, b, precedence(b) <= p)
            }
            Expr::Not(a) => {
                f.write_str("!")?;
                child(f, a, precedence(a) < 3)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Op(CmpOp),
    And,
    Or,
    Bang,
    LParen,
    RParen,
    Comma,
    In,
    Contains,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Num(x) => format!("number {x}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Op(op) => format!("'{}'", op.symbol()),
            Tok::And => "'&&'".into(),
            Tok::Or => "'||'".into(),
            Tok::Bang => "'!'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::In => "'in'".into(),
            Tok::Contains => "'contains'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<(usize, Tok)>,
}

fn syntax(position: usize, expected: &[&str], found: String) -> FilterError {
    FilterError::Syntax {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            peeked: None,
        }
    }

    fn parse(mut self) -> Result<Option<Expr>, FilterError> {
        if self.src.trim().is_empty() {
            return Ok(None);
        }
        let e = self.or()?;
        let (at, tok) = self.next()?;
        if tok != Tok::End {
            return Err(syntax(at, &["'&&'", "'||'", "end of input"], tok.describe()));
        }
        Ok(Some(e))
    }

    fn or(&mut self) -> Result<Expr, FilterError> {
        let mut lhs = self.and()?;
        while self.peek()?.1 == Tok::Or {
            self.next()?;
            let rhs = self.and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, FilterError> {
        let mut lhs = self.unary()?;
        while self.peek()?.1 == Tok::And {
            self.next()?;
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FilterError> {
        let (at, tok) = self.next()?;
        match tok {
            Tok::Bang => Ok(Expr::Not(Box::new(self.unary()?))),
            Tok::LParen => {
                let e = self.or()?;
                let (at, tok) = self.next()?;
                if tok != Tok::RParen {
                    return Err(syntax(at, &["')'", "'&&'", "'||'"], tok.describe()));
                }
                Ok(e)
            }
            Tok::Ident(column) => self.comparison(column),
            other => Err(syntax(at, &["identifier", "'('", "'!'"], other.describe())),
        }
    }

    fn comparison(&mut self, column: String) -> Result<Expr, FilterError> {
        let (at, tok) = self.next()?;
        match tok {
            Tok::Op(op) => {
                let value = self.literal()?;
                Ok(Expr::Cmp { column, op, value })
            }
            Tok::In => {
                let (at, tok) = self.next()?;
                if tok != Tok::LParen {
                    return Err(syntax(at, &["'('"], tok.describe()));
                }
                let mut values = vec![self.literal()?];
                loop {
                    let (at, tok) = self.next()?;
                    match tok {
                        Tok::Comma => values.push(self.literal()?),
                        Tok::RParen => break,
                        other => return Err(syntax(at, &["','", "')'"], other.describe())),
                    }
                }
                Ok(Expr::In { column, values })
            }
            Tok::Contains => {
                let (at, tok) = self.next()?;
                match tok {
                    Tok::Str(needle) => Ok(Expr::Contains { column, needle }),
                    other => Err(syntax(at, &["string"], other.describe())),
                }
            }
            other => Err(syntax(
                at,
                &["'=='", "'!='", "'<'", "'<='", "'>'", "'>='", "'in'", "'contains'"],
                other.describe(),
            )),
        }
    }

    fn literal(&mut self) -> Result<Literal, FilterError> {
        let (at, tok) = self.next()?;
        match tok {
            Tok::Num(x) => Ok(Literal::Num(x)),
            Tok::Str(s) => Ok(Literal::Str(s)),
            other => Err(syntax(at, &["number", "string"], other.describe())),
        }
    }

    fn peek(&mut self) -> Result<&(usize, Tok), FilterError> {
        if self.peeked.is_none() {
            let t = self.lex()?;
            self.peeked = Some(t);
        }
        Ok(self.peeked.as_ref().expect("just filled"))
    }

    fn next(&mut self) -> Result<(usize, Tok), FilterError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn lex(&mut self) -> Result<(usize, Tok), FilterError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(start) else {
            return Ok((start, Tok::End));
        };
        let two = bytes.get(start..start + 2);
        let tok = match c {
            b'&' if two == Some(b"&&") => {
                self.pos += 2;
                Tok::And
            }
            b'|' if two == Some(b"||") => {
                self.pos += 2;
                Tok::Or
            }
            b'=' if two == Some(b"==") => {
                self.pos += 2;
                Tok::Op(CmpOp::Eq)
            }
            b'!' if two == Some(b"!=") => {
                self.pos += 2;
                Tok::Op(CmpOp::Ne)
            }
            b'<' if two == Some(b"<=") => {
                self.pos += 2;
                Tok::Op(CmpOp::Le)
            }
            b'>' if two == Some(b">=") => {
                self.pos += 2;
                Tok::Op(CmpOp::Ge)
            }
            b'<' => {
                self.pos += 1;
                Tok::Op(CmpOp::Lt)
            }
            b'>' => {
                self.pos += 1;
                Tok::Op(CmpOp::Gt)
            }
            b'!' => {
                self.pos += 1;
                Tok::Bang
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'\'' => Tok::Str(self.string()?),
            b'`' => {
                let rest = &self.src[start + 1..];
                let end = rest.find('`').ok_or_else(|| {
                    syntax(self.src.len(), &["closing '`'"], "end of input".into())
                })?;
                if end == 0 {
                    return Err(syntax(start, &["column name"], "empty quoted name".into()));
                }
                self.pos = start + 1 + end + 1;
                Tok::Ident(rest[..end].to_string())
            }
            b'-' | b'+' | b'.' | b'0'..=b'9' => Tok::Num(self.number()?),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_' || bytes[end] == b'.')
                {
                    end += 1;
                }
                self.pos = end;
                match &self.src[start..end] {
                    "in" => Tok::In,
                    "contains" => Tok::Contains,
                    word => Tok::Ident(word.to_string()),
                }
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(syntax(
                    start,
                    &["identifier", "literal", "operator"],
                    format!("'{ch}'"),
                ));
            }
        };
        Ok((start, tok))
    }

    fn string(&mut self) -> Result<String, FilterError> {
        let mut out = String::new();
        let mut chars = self.src[self.pos + 1..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\'' => {
                    self.pos += 1 + i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err(syntax(self.src.len(), &["closing quote"], "end of input".into()))
    }

    fn number(&mut self) -> Result<f64, FilterError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut end = start;
        if matches!(bytes.get(end), Some(b'-' | b'+')) {
            end += 1;
        }
        while end < bytes.len() {
            let b = bytes[end];
            let exp_sign = matches!(b, b'-' | b'+') && matches!(bytes[end - 1], b'e' | b'E');
            if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                end += 1;
            } else {
                break;
            }
        }
        let text = &self.src[start..end];
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => {
                self.pos = end;
                Ok(x)
            }
            _ => Err(syntax(start, &["number"], format!("'{text}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ingest_table, KindHints};

    fn table() -> MetadataTable {
        let mut hints = KindHints::new();
        hints.insert("split".into(), ColumnKind::Categorical);
        hints.insert("label".into(), ColumnKind::Label);
        hints.insert("note".into(), ColumnKind::Text);
        ingest_table(
            "id,split,label,score,note\n\
             r1,train,cat,0.9,hello world\n\
             r2,test,dog,0.2,\n\
             r3,train,dog,0.7,bye\n\
             r4,train,bird,0.4,hello\n\
             r5,test,cat,,x\n"
                .as_bytes(),
            &hints,
        )
        .unwrap()
    }

    fn ids(t: &MetadataTable, f: &Filter) -> Vec<String> {
        f.evaluate(t)
            .unwrap()
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| t.id(i).to_string())
            .collect()
    }

    #[test]
    fn empty_is_match_all() {
        let t = table();
        for text in ["", "   \t"] {
            let f = parse_filter(text, t.schema()).unwrap();
            assert!(f.is_match_all());
            assert_eq!(ids(&t, &f).len(), 5);
        }
    }

    #[test]
    fn equality_matches_row_scan() {
        let t = table();
        let f = parse_filter("split == 'train'", t.schema()).unwrap();
        assert_eq!(ids(&t, &f), ["r1", "r3", "r4"]);
    }

    #[test]
    fn and_is_intersection_of_scans() {
        let t = table();
        let f = parse_filter("score > 0.5 && label in ('cat','dog')", t.schema()).unwrap();
        assert!(matches!(f.expr(), Some(Expr::And(..))));
        let a = ids(&t, &parse_filter("score > 0.5", t.schema()).unwrap());
        let b = ids(&t, &parse_filter("label in ('cat','dog')", t.schema()).unwrap());
        let both: Vec<String> = a.into_iter().filter(|x| b.contains(x)).collect();
        assert_eq!(ids(&t, &f), both);
        assert_eq!(both, ["r1", "r3"]);
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let t = table();
        let f = parse_filter("split == 'test' || label == 'dog' && score > 0.5", t.schema()).unwrap();
        match f.expr().unwrap() {
            Expr::Or(_, rhs) => assert!(matches!(**rhs, Expr::And(..))),
            other => panic!("{other:?}"),
        }
        assert_eq!(ids(&t, &f), ["r2", "r3", "r5"]);
    }

    #[test]
    fn nulls_never_match_comparisons() {
        let t = table();
        let f = parse_filter("score < 100", t.schema()).unwrap();
        assert_eq!(ids(&t, &f), ["r1", "r2", "r3", "r4"]);
        let g = parse_filter("!(score < 100)", t.schema()).unwrap();
        assert_eq!(ids(&t, &g), ["r5"]);
    }

    #[test]
    fn contains_on_text_and_categorical() {
        let t = table();
        let f = parse_filter("note contains 'hello'", t.schema()).unwrap();
        assert_eq!(ids(&t, &f), ["r1", "r4"]);
        let g = parse_filter("label contains 'i'", t.schema()).unwrap();
        assert_eq!(ids(&t, &g), ["r4"]);
    }

    #[test]
    fn type_mismatch_on_ordering_categorical() {
        let t = table();
        let err = parse_filter("split < 'b'", t.schema()).unwrap_err();
        assert!(matches!(err, FilterError::TypeMismatch { .. }));
        assert!(matches!(
            parse_filter("score == 'x'", t.schema()),
            Err(FilterError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse_filter("score contains 'x'", t.schema()),
            Err(FilterError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn unknown_column() {
        let t = table();
        assert_eq!(
            parse_filter("nope == 1", t.schema()).unwrap_err(),
            FilterError::UnknownColumn("nope".into())
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        let t = table();
        match parse_filter("split == ", t.schema()).unwrap_err() {
            FilterError::Syntax { position, expected, .. } => {
                assert_eq!(position, 9);
                assert!(expected.contains(&"string".to_string()));
            }
            other => panic!("{other:?}"),
        }
        match parse_filter("(split == 'a'", t.schema()).unwrap_err() {
            FilterError::Syntax { position, .. } => assert_eq!(position, 13),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_filter("split == 'a' split", t.schema()),
            Err(FilterError::Syntax { position: 13, .. })
        ));
        assert!(parse_filter("split == 'unterminated", t.schema()).is_err());
        assert!(parse_filter("score > 1.2.3", t.schema()).is_err());
    }

    #[test]
    fn canonical_printing_reparses() {
        let t = table();
        for text in [
            "split == 'train'",
            "a || b",
            "score >= -1.5e-3 && (label == 'cat' || label == 'dog')",
            "!(split == 'x') && !note contains 'it\\'s'",
            "split == 'a' || (split == 'b' || split == 'c')",
            "((score < 1))",
            "`label` in ('cat', 'bird')",
        ] {
            let Ok(f) = parse_filter(text, t.schema()) else {
                continue;
            };
            let printed = f.to_text();
            let again = parse_filter(&printed, t.schema()).unwrap();
            assert_eq!(f, again, "{text} -> {printed}");
            assert_eq!(printed, again.to_text());
        }
    }

    #[test]
    fn quoted_identifiers() {
        let mut hints = KindHints::new();
        hints.insert("data set".into(), ColumnKind::Categorical);
        let t = ingest_table("id,data set\n1,a\n2,a\n3,a\n".as_bytes(), &hints).unwrap();
        let f = parse_filter("`data set` == 'a'", t.schema()).unwrap();
        assert_eq!(f.to_text(), "`data set` == 'a'");
        assert_eq!(f.evaluate(&t).unwrap(), vec![true; 3]);
    }
}
