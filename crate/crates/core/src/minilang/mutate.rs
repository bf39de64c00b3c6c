//! First-order mutant generation.
//!
//! Operators are applied at every applicable site in lexical order. The
//! operator table is intentionally small and is the place to extend when a
//! richer mutation set is needed.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ast::*;
use crate::model::ProgramElement;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationOperator {
    ArithmeticReplace,
    RelationalReplace,
    LogicalReplace,
    ConstantPerturb,
    StatementDelete,
    NegateCondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mutant {
    pub id: String,
    pub target: ProgramElement,
    pub operator: MutationOperator,
    /// The mutated statement rendered on one line.
    pub description: String,
    pub program: Program,
}

#[derive(Clone, Debug)]
enum Edit {
    Op(ExprId, BinOp),
    Const(ExprId, i64),
    Delete,
    Negate,
}

fn edits_for(stmt: &Stmt) -> Vec<(MutationOperator, Edit)> {
    let mut out = Vec::new();
    for root in stmt.own_exprs() {
        root.visit(&mut |e| match &e.kind {
            ExprKind::Binary(op, _, _) => {
                let (family, operator) = if BinOp::ARITHMETIC.contains(op) {
                    (&BinOp::ARITHMETIC[..], MutationOperator::ArithmeticReplace)
                } else if BinOp::RELATIONAL.contains(op) {
                    (&BinOp::RELATIONAL[..], MutationOperator::RelationalReplace)
                } else {
                    (&BinOp::LOGICAL[..], MutationOperator::LogicalReplace)
                };
                for &alt in family.iter().filter(|alt| *alt != op) {
                    out.push((operator, Edit::Op(e.id, alt)));
                }
            }
            ExprKind::Int(v) => {
                for alt in [v.checked_add(1), v.checked_sub(1)].into_iter().flatten() {
                    out.push((MutationOperator::ConstantPerturb, Edit::Const(e.id, alt)));
                }
            }
            _ => {}
        });
    }
    match &stmt.kind {
        StmtKind::If { .. } | StmtKind::While { .. } => {
            out.push((MutationOperator::NegateCondition, Edit::Negate));
        }
        // Returns and declarations must stay; compound statements are not deleted.
        StmtKind::Assign { .. }
        | StmtKind::IndexAssign { .. }
        | StmtKind::Assert(_)
        | StmtKind::Expr(_) => out.push((MutationOperator::StatementDelete, Edit::Delete)),
        _ => {}
    }
    out
}

fn apply(stmt: &mut Stmt, edit: &Edit) {
    match edit {
        Edit::Op(id, alt) => {
            if let Some(e) = stmt.own_exprs_mut().into_iter().find_map(|r| r.find_mut(*id)) {
                if let ExprKind::Binary(op, _, _) = &mut e.kind {
                    *op = *alt;
                }
            }
        }
        Edit::Const(id, v) => {
            if let Some(e) = stmt.own_exprs_mut().into_iter().find_map(|r| r.find_mut(*id)) {
                e.kind = ExprKind::Int(*v);
            }
        }
        Edit::Delete => stmt.kind = StmtKind::Skip,
        Edit::Negate => {
            if let StmtKind::If { cond, .. } | StmtKind::While { cond, .. } = &mut stmt.kind {
                let inner = std::mem::replace(
                    cond,
                    Expr {
                        id: ExprId::MAX,
                        kind: ExprKind::Bool(false),
                    },
                );
                *cond = Expr {
                    id: inner.id,
                    kind: ExprKind::Unary(UnOp::Not, Box::new(inner)),
                };
            }
        }
    }
}

/// Every applicable mutant, deterministic order, no duplicates.
pub fn gen_mutants(program: &Program) -> Vec<Mutant> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for stmt in program.statements() {
        for (operator, edit) in edits_for(stmt) {
            let mut mutated = program.clone();
            let Some(target) = mutated.stmt_mut(&stmt.element) else {
                continue;
            };
            apply(target, &edit);
            let description = target.to_string();
            if !seen.insert((stmt.element.clone(), description.clone())) {
                continue;
            }
            out.push(Mutant {
                id: format!("m{}", out.len()),
                target: stmt.element.clone(),
                operator,
                description,
                program: mutated,
            });
        }
    }
    out
}
