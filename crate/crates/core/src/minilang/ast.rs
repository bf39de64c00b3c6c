use std::fmt;

use crate::model::ProgramElement;

pub type ExprId = u32;

/// Index of a conditional (if/while) in lexical order across the program.
pub type PredicateId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const ARITHMETIC: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod];
    pub const RELATIONAL: [BinOp; 6] = [
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
    ];
    pub const LOGICAL: [BinOp; 2] = [BinOp::And, BinOp::Or];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub id: ExprId,
    pub kind: ExprKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var(String),
    Array(Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    /// Pre-order walk.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
            ExprKind::Array(items) | ExprKind::Call(_, items) => {
                items.iter().for_each(|e| e.visit(f));
            }
            ExprKind::Unary(_, e) => e.visit(f),
            ExprKind::Binary(_, l, r) | ExprKind::Index(l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    pub fn find_mut(&mut self, id: ExprId) -> Option<&mut Expr> {
        if self.id == id {
            return Some(self);
        }
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => None,
            ExprKind::Array(items) | ExprKind::Call(_, items) => {
                items.iter_mut().find_map(|e| e.find_mut(id))
            }
            ExprKind::Unary(_, e) => e.find_mut(id),
            ExprKind::Binary(_, l, r) | ExprKind::Index(l, r) => {
                l.find_mut(id).or_else(|| r.find_mut(id))
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match &self.kind {
            ExprKind::Int(v) => write!(f, "{v}"),
            ExprKind::Bool(b) => write!(f, "{b}"),
            ExprKind::Var(n) => f.write_str(n),
            ExprKind::Array(items) => {
                f.write_str("[")?;
                write_list(f, items)?;
                f.write_str("]")
            }
            ExprKind::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                e.fmt_prec(f, 7)
            }
            ExprKind::Binary(op, l, r) => {
                let p = op.precedence();
                if p < outer {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
                if p < outer {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExprKind::Index(a, i) => {
                a.fmt_prec(f, 8)?;
                write!(f, "[{i}]")
            }
            ExprKind::Call(name, args) => {
                write!(f, "{name}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub element: ProgramElement,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Var {
        name: String,
        init: Option<Expr>,
    },
    Assign {
        name: String,
        value: Expr,
    },
    IndexAssign {
        name: String,
        index: Expr,
        value: Expr,
    },
    If {
        pred: PredicateId,
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    While {
        pred: PredicateId,
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Assert(Expr),
    Expr(Expr),
    /// A deleted statement; executes as a no-op but keeps its element.
    Skip,
}

impl Stmt {
    /// Expressions owned directly by this statement, excluding nested bodies.
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Var { init, .. } => init.iter().collect(),
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::IndexAssign { index, value, .. } => vec![index, value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Assert(e) | StmtKind::Expr(e) => vec![e],
            StmtKind::Skip => vec![],
        }
    }

    pub fn own_exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Var { init, .. } => init.iter_mut().collect(),
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::IndexAssign { index, value, .. } => vec![index, value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter_mut().collect(),
            StmtKind::Assert(e) | StmtKind::Expr(e) => vec![e],
            StmtKind::Skip => vec![],
        }
    }

    pub fn predicate(&self) -> Option<PredicateId> {
        match &self.kind {
            StmtKind::If { pred, .. } | StmtKind::While { pred, .. } => Some(*pred),
            _ => None,
        }
    }

    /// Pre-order walk over this statement and every nested one.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                then_body.iter().for_each(|s| s.visit(f));
                else_body.iter().for_each(|s| s.visit(f));
            }
            StmtKind::While { body, .. } => body.iter().for_each(|s| s.visit(f)),
            _ => {}
        }
    }

    pub fn find_mut(&mut self, element: &ProgramElement) -> Option<&mut Stmt> {
        if &self.element == element {
            return Some(self);
        }
        match &mut self.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => then_body
                .iter_mut()
                .chain(else_body.iter_mut())
                .find_map(|s| s.find_mut(element)),
            StmtKind::While { body, .. } => body.iter_mut().find_map(|s| s.find_mut(element)),
            _ => None,
        }
    }
}

/// One-line rendering of a statement, without nested bodies.
impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StmtKind::Var { name, init: None } => write!(f, "var {name};"),
            StmtKind::Var {
                name,
                init: Some(e),
            } => write!(f, "var {name} = {e};"),
            StmtKind::Assign { name, value } => write!(f, "{name} = {value};"),
            StmtKind::IndexAssign { name, index, value } => {
                write!(f, "{name}[{index}] = {value};")
            }
            StmtKind::If { cond, .. } => write!(f, "if ({cond})"),
            StmtKind::While { cond, .. } => write!(f, "while ({cond})"),
            StmtKind::Return(None) => write!(f, "return;"),
            StmtKind::Return(Some(e)) => write!(f, "return {e};"),
            StmtKind::Assert(e) => write!(f, "assert({e});"),
            StmtKind::Expr(e) => write!(f, "{e};"),
            StmtKind::Skip => write!(f, ";"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub file: String,
    pub line: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceFile {
    pub id: String,
    pub text: String,
}

/// A parsed subject program, possibly spread over several files.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub files: Vec<SourceFile>,
    pub functions: Vec<Function>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Every statement in lexical order.
    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for func in &self.functions {
            for s in &func.body {
                s.visit(&mut |s| out.push(s));
            }
        }
        out
    }

    /// Executable elements in lexical order.
    pub fn elements(&self) -> Vec<ProgramElement> {
        self.statements().into_iter().map(|s| s.element.clone()).collect()
    }

    /// Conditionals as `(predicate id, element)`, in lexical order.
    pub fn predicates(&self) -> Vec<(PredicateId, ProgramElement)> {
        self.statements()
            .into_iter()
            .filter_map(|s| s.predicate().map(|p| (p, s.element.clone())))
            .collect()
    }

    pub fn predicate_element(&self, pred: PredicateId) -> Option<ProgramElement> {
        self.predicates()
            .into_iter()
            .find(|(p, _)| *p == pred)
            .map(|(_, e)| e)
    }

    pub fn stmt(&self, element: &ProgramElement) -> Option<&Stmt> {
        self.statements().into_iter().find(|s| &s.element == element)
    }

    pub fn stmt_mut(&mut self, element: &ProgramElement) -> Option<&mut Stmt> {
        self.functions
            .iter_mut()
            .flat_map(|f| f.body.iter_mut())
            .find_map(|s| s.find_mut(element))
    }

    pub fn file_text(&self, id: &str) -> Option<&str> {
        self.files.iter().find(|f| f.id == id).map(|f| f.text.as_str())
    }
}
