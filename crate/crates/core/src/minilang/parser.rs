//! Lexer and recursive-descent parser for the subject language.
//!
//! ```text
//! program  := function*
//! function := "fn" IDENT "(" [IDENT ("," IDENT)*] ")" block
//! block    := "{" stmt* "}"
//! body     := block | stmt
//! stmt     := "var" IDENT ["=" expr] ";"
//!           | IDENT "=" expr ";"
//!           | IDENT "[" expr "]" "=" expr ";"
//!           | "if" "(" expr ")" body ["else" body]
//!           | "while" "(" expr ")" body
//!           | "return" [expr] ";"
//!           | "assert" "(" expr ")" ";"
//!           | expr ";"
//! expr     := usual precedence: || && (== !=) (< <= > >=) (+ -) (* / %) unary postfix
//! ```

use std::collections::{BTreeMap, HashSet};

use super::ast::*;
use crate::error::{Error, Result};
use crate::model::ProgramElement;

pub const BUILTINS: [&str; 1] = ["len"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const SYMBOLS: [&str; 23] = [
    "&&", "||", "==", "!=", "<=", ">=", "(", ")", "{", "}", "[", "]", ",", ";", "=", "+", "-", "*",
    "/", "%", "<", ">", "!",
];

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[begin..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| Error::Syntax {
                line,
                column: col,
                message: format!("integer literal `{s}` out of range"),
            })?;
            col += (i - begin) as u32;
            out.push(Token {
                tok: Tok::Int(v),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - begin) as u32;
            out.push(Token {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len() as u32;
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line: start_line,
                    col: start_col,
                });
            }
            None => {
                return Err(Error::Syntax {
                    line,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 9] = [
    "fn", "var", "if", "else", "while", "return", "assert", "true", "false",
];

/// Numbering shared across all files of one program.
#[derive(Default)]
struct Counters {
    next_expr: ExprId,
    next_pred: PredicateId,
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    pos: usize,
    counters: &'a mut Counters,
    per_line: BTreeMap<u32, u32>,
    current_fn: String,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        &self.toks[(self.pos + ahead).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax {
            line: t.line,
            column: t.col,
            message: message.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(&self.peek().tok)))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", describe(&self.peek().tok)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            other => self.err(format!("expected identifier, found {}", describe(other))),
        }
    }

    fn element(&mut self, line: u32) -> ProgramElement {
        let idx = self.per_line.entry(line).or_insert(0);
        let e = ProgramElement::new(self.file, line, *idx).with_method(self.current_fn.clone());
        *idx += 1;
        e
    }

    fn expr_id(&mut self) -> ExprId {
        let id = self.counters.next_expr;
        self.counters.next_expr += 1;
        id
    }

    fn mk(&mut self, kind: ExprKind) -> Expr {
        Expr {
            id: self.expr_id(),
            kind,
        }
    }

    fn function(&mut self) -> Result<Function> {
        let line = self.peek().line;
        self.expect_kw("fn")?;
        let name = self.ident()?;
        self.current_fn = name.clone();
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                params.push(self.ident()?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let body = self.block()?;
        Ok(Function {
            name,
            params,
            body,
            file: self.file.to_string(),
            line,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut stmts = Vec::new();
        while !self.is_sym("}") {
            if self.peek().tok == Tok::Eof {
                return self.err("unterminated block");
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn body(&mut self) -> Result<Vec<Stmt>> {
        if self.is_sym("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let line = self.peek().line;
        if self.is_sym("{") {
            return self.err("nested blocks are only allowed as if/while bodies");
        }
        let element = self.element(line);
        let kind = if self.is_kw("var") {
            self.bump();
            let name = self.ident()?;
            let init = if self.is_sym("=") {
                self.bump();
                Some(self.expr()?)
            } else {
                None
            };
            self.expect_sym(";")?;
            StmtKind::Var { name, init }
        } else if self.is_kw("if") {
            self.bump();
            let pred = self.next_pred();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then_body = self.body()?;
            let else_body = if self.is_kw("else") {
                self.bump();
                self.body()?
            } else {
                Vec::new()
            };
            StmtKind::If {
                pred,
                cond,
                then_body,
                else_body,
            }
        } else if self.is_kw("while") {
            self.bump();
            let pred = self.next_pred();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let body = self.body()?;
            StmtKind::While { pred, cond, body }
        } else if self.is_kw("return") {
            self.bump();
            let value = if self.is_sym(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_sym(";")?;
            StmtKind::Return(value)
        } else if self.is_kw("assert") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            StmtKind::Assert(cond)
        } else if matches!(self.peek_at(0), Tok::Ident(_)) && self.peek_at(1) == &Tok::Sym("=") {
            let name = self.ident()?;
            self.bump();
            let value = self.expr()?;
            self.expect_sym(";")?;
            StmtKind::Assign { name, value }
        } else if matches!(self.peek_at(0), Tok::Ident(_)) && self.peek_at(1) == &Tok::Sym("[") {
            // Either `a[i] = v;` or an expression statement starting with `a[i]`.
            let save = self.pos;
            let saved_ids = self.counters.next_expr;
            let name = self.ident()?;
            self.bump();
            let index = self.expr()?;
            self.expect_sym("]")?;
            if self.is_sym("=") {
                self.bump();
                let value = self.expr()?;
                self.expect_sym(";")?;
                StmtKind::IndexAssign { name, index, value }
            } else {
                self.pos = save;
                self.counters.next_expr = saved_ids;
                let e = self.expr()?;
                self.expect_sym(";")?;
                StmtKind::Expr(e)
            }
        } else {
            let e = self.expr()?;
            self.expect_sym(";")?;
            StmtKind::Expr(e)
        };
        Ok(Stmt { element, kind })
    }

    fn next_pred(&mut self) -> PredicateId {
        let p = self.counters.next_pred;
        self.counters.next_pred += 1;
        p
    }

    fn expr(&mut self) -> Result<Expr> {
        self.binary(1)
    }

    fn binary_op(&self, level: u8) -> Option<BinOp> {
        let Tok::Sym(s) = &self.peek().tok else {
            return None;
        };
        let op = match *s {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Mod,
            _ => return None,
        };
        (op.precedence() == level).then_some(op)
    }

    fn binary(&mut self, level: u8) -> Result<Expr> {
        if level > 6 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binary_op(level) {
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = self.mk(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.is_sym("-") || self.is_sym("!") {
            let op = if self.is_sym("-") { UnOp::Neg } else { UnOp::Not };
            self.bump();
            let id = self.expr_id();
            let inner = self.unary()?;
            return Ok(Expr {
                id,
                kind: ExprKind::Unary(op, Box::new(inner)),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        while self.is_sym("[") {
            self.bump();
            let idx = self.expr()?;
            self.expect_sym("]")?;
            e = self.mk(ExprKind::Index(Box::new(e), Box::new(idx)));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        let tok = self.peek().tok.clone();
        match tok {
            Tok::Int(v) => {
                self.bump();
                Ok(self.mk(ExprKind::Int(v)))
            }
            Tok::Ident(ref name) if name == "true" || name == "false" => {
                self.bump();
                Ok(self.mk(ExprKind::Bool(name == "true")))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_sym("(") {
                    self.bump();
                    let args = self.args(")")?;
                    Ok(self.mk(ExprKind::Call(name, args)))
                } else {
                    Ok(self.mk(ExprKind::Var(name)))
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                self.bump();
                let items = self.args("]")?;
                Ok(self.mk(ExprKind::Array(items)))
            }
            other => self.err(format!("expected expression, found {}", describe(&other))),
        }
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>> {
        let mut items = Vec::new();
        if !self.is_sym(close) {
            loop {
                items.push(self.expr()?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(close)?;
        Ok(items)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// Parses a single-file program.
pub fn parse(source: &str) -> Result<Program> {
    parse_files(&[("program.ml", source)])
}

/// Parses a program spread over several files. Elements, expression ids and
/// predicate ids are numbered in the order the files are given.
pub fn parse_files<S: AsRef<str>, T: AsRef<str>>(files: &[(S, T)]) -> Result<Program> {
    let mut counters = Counters::default();
    let mut functions = Vec::new();
    let mut sources = Vec::new();
    for (id, text) in files {
        let (id, text) = (id.as_ref(), text.as_ref());
        let mut parser = Parser {
            file: id,
            toks: lex(text)?,
            pos: 0,
            counters: &mut counters,
            per_line: BTreeMap::new(),
            current_fn: String::new(),
        };
        while parser.peek().tok != Tok::Eof {
            functions.push(parser.function()?);
        }
        sources.push(SourceFile {
            id: id.to_string(),
            text: text.to_string(),
        });
    }
    if functions.is_empty() {
        return Err(Error::Syntax {
            line: 1,
            column: 1,
            message: "program declares no functions".into(),
        });
    }
    let program = Program {
        files: sources,
        functions,
    };
    check_names(&program)?;
    Ok(program)
}

fn check_names(program: &Program) -> Result<()> {
    let mut names = HashSet::new();
    for f in &program.functions {
        if !names.insert(f.name.as_str()) || BUILTINS.contains(&f.name.as_str()) {
            return Err(Error::Syntax {
                line: f.line,
                column: 1,
                message: format!("duplicate function `{}`", f.name),
            });
        }
    }
    for stmt in program.statements() {
        for e in stmt.own_exprs() {
            let mut missing = None;
            e.visit(&mut |e| {
                if let ExprKind::Call(name, _) = &e.kind {
                    if !names.contains(name.as_str()) && !BUILTINS.contains(&name.as_str()) {
                        missing.get_or_insert_with(|| name.clone());
                    }
                }
            });
            if let Some(name) = missing {
                return Err(Error::UnknownFunction(name));
            }
        }
    }
    Ok(())
}
