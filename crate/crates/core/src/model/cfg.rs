//! Basic-block control-flow graphs over a method's statement list.

use std::collections::{BTreeSet, HashSet};

use super::{MethodBody, Op};
use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

impl Block {
    pub fn statements(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub blocks: Vec<Block>,
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

pub type Edge = (usize, usize);

pub fn build_cfg(m: &MethodBody) -> Result<Cfg, ModelError> {
    let n = m.statements.len();
    let malformed = |msg: String| ModelError::MalformedMethod {
        method: m.signature.to_string(),
        msg,
    };
    let check = |idx: usize, target: usize| {
        if target >= n {
            Err(malformed(format!("statement {idx} jumps to {target}, method has {n} statements")))
        } else {
            Ok(target)
        }
    };

    let mut leaders = BTreeSet::new();
    if n > 0 {
        leaders.insert(0);
    }
    for s in &m.statements {
        match s.op {
            Op::If => {
                let (a, b) = s
                    .branch_targets
                    .ok_or_else(|| malformed(format!("if at {} has no targets", s.index)))?;
                leaders.insert(check(s.index, a)?);
                leaders.insert(check(s.index, b)?);
            }
            Op::Goto => {
                let t = s
                    .goto_target
                    .ok_or_else(|| malformed(format!("goto at {} has no target", s.index)))?;
                leaders.insert(check(s.index, t)?);
            }
            _ => {}
        }
        if matches!(s.op, Op::If | Op::Goto | Op::Return) && s.index + 1 < n {
            leaders.insert(s.index + 1);
        }
    }

    let starts: Vec<usize> = leaders.into_iter().collect();
    let mut blocks = Vec::with_capacity(starts.len());
    let mut block_of = vec![0; n];
    for (bi, &start) in starts.iter().enumerate() {
        let end = starts.get(bi + 1).copied().unwrap_or(n);
        block_of[start..end].fill(bi);
        blocks.push(Block { start, end });
    }

    let mut succs = vec![Vec::new(); blocks.len()];
    for (bi, b) in blocks.iter().enumerate() {
        let last = &m.statements[b.end - 1];
        let targets: Vec<usize> = match last.op {
            Op::If => {
                let (a, c) = last.branch_targets.unwrap();
                vec![a, c]
            }
            Op::Goto => vec![last.goto_target.unwrap()],
            Op::Return => vec![],
            _ if b.end < n => vec![b.end],
            _ => vec![],
        };
        for t in targets {
            let tb = block_of[t];
            if !succs[bi].contains(&tb) {
                succs[bi].push(tb);
            }
        }
    }
    let mut preds = vec![Vec::new(); blocks.len()];
    for (from, ss) in succs.iter().enumerate() {
        for &to in ss {
            preds[to].push(from);
        }
    }
    Ok(Cfg {
        blocks,
        succs,
        preds,
        block_of,
    })
}

impl Cfg {
    pub fn entry(&self) -> Option<usize> {
        (!self.blocks.is_empty()).then_some(0)
    }

    pub fn block_of(&self, stmt: usize) -> usize {
        self.block_of[stmt]
    }

    pub fn edges(&self) -> BTreeSet<Edge> {
        self.succs
            .iter()
            .enumerate()
            .flat_map(|(a, ss)| ss.iter().map(move |&b| (a, b)))
            .collect()
    }

    /// Blocks in depth-first preorder from the entry, successors in
    /// declaration order (then-branch before else-branch).
    pub fn dfs_blocks(&self) -> Vec<usize> {
        self.dfs_blocks_excluding(&HashSet::new())
    }

    pub fn dfs_blocks_excluding(&self, banned: &HashSet<Edge>) -> Vec<usize> {
        let Some(entry) = self.entry() else {
            return Vec::new();
        };
        let mut seen = vec![false; self.blocks.len()];
        let mut order = Vec::new();
        let mut stack = vec![entry];
        while let Some(b) = stack.pop() {
            if std::mem::replace(&mut seen[b], true) {
                continue;
            }
            order.push(b);
            for &s in self.succs[b].iter().rev() {
                if !seen[s] && !banned.contains(&(b, s)) {
                    stack.push(s);
                }
            }
        }
        order
    }

    /// Statement indices in DFS block order; unreachable statements are omitted.
    pub fn dfs_statements(&self) -> Vec<usize> {
        self.dfs_blocks()
            .into_iter()
            .flat_map(|b| self.blocks[b].statements())
            .collect()
    }

    pub fn reachable_statements(&self) -> BTreeSet<usize> {
        self.dfs_statements().into_iter().collect()
    }

    /// Statements still reachable from the entry once `banned` edges are cut.
    pub fn reachable_statements_excluding(&self, banned: &HashSet<Edge>) -> BTreeSet<usize> {
        self.dfs_blocks_excluding(banned)
            .into_iter()
            .flat_map(|b| self.blocks[b].statements())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ir::parse_classes;

    fn method(body: &str) -> MethodBody {
        let doc = format!("class T\nmethod void f(int)\n  params i0\n{body}");
        parse_classes(&doc, "t.ir").unwrap().remove(0).methods.remove(0)
    }

    #[test]
    fn straight_line_is_one_block() {
        let m = method("  0: r1 = const 1\n  1: r2 = r1\n  2: return\n");
        let cfg = build_cfg(&m).unwrap();
        assert_eq!(cfg.blocks.len(), 1);
        assert!(cfg.edges().is_empty());
    }

    #[test]
    fn if_splits_entry_block() {
        let m = method("  0: r1 = const 1\n  1: if i0 goto 2 else 4\n  2: r2 = const 2\n  3: return\n  4: return\n");
        let cfg = build_cfg(&m).unwrap();
        assert!(cfg.blocks.len() >= 3);
        assert_eq!(cfg.succs[cfg.entry().unwrap()].len(), 2);
    }

    #[test]
    fn diamond_has_join_with_two_preds() {
        // 0: if -> 1 / 3 ; 1..2 then, jumps to 4 ; 3 else ; 4 join
        let m = method(
            "  0: if i0 goto 1 else 3\n  1: r1 = const 1\n  2: goto 4\n  3: r2 = const 2\n  4: return\n",
        );
        let cfg = build_cfg(&m).unwrap();
        assert_eq!(cfg.blocks.len(), 4);
        // Hand-built edge set: B0={0}, B1={1,2}, B2={3}, B3={4}.
        let expected: BTreeSet<Edge> = [(0, 1), (0, 2), (1, 3), (2, 3)].into_iter().collect();
        assert_eq!(cfg.edges(), expected);
        assert_eq!(cfg.preds[cfg.block_of(4)].len(), 2);
    }

    #[test]
    fn out_of_range_target_is_malformed() {
        let m = method("  0: if i0 goto 1 else 9\n  1: return\n");
        assert!(matches!(build_cfg(&m), Err(ModelError::MalformedMethod { .. })));
    }

    #[test]
    fn statements_after_return_are_unreachable() {
        let m = method("  0: return\n  1: r1 = const 1\n  2: return\n");
        let cfg = build_cfg(&m).unwrap();
        assert_eq!(cfg.reachable_statements(), BTreeSet::from([0]));
    }

    #[test]
    fn empty_method_has_no_entry() {
        let m = method("");
        let cfg = build_cfg(&m).unwrap();
        assert!(cfg.entry().is_none());
        assert!(cfg.dfs_statements().is_empty());
    }
}
