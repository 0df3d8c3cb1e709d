//! Detection of system-only broadcast checks in receivers:
//! `intent.getAction().equals("<system action>")` guarding a branch.

use std::collections::{BTreeSet, HashSet};
use std::ops::Range;
use std::path::Path;

use crate::model::{Cfg, Literal, MethodBody, Op, Var};

/// Statements that only execute when a system-only action check succeeds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GuardInfo {
    pub guarded: BTreeSet<usize>,
    /// The `If` statements recognized as checks.
    pub checks: Vec<usize>,
}

impl GuardInfo {
    pub fn contains(&self, stmt: usize) -> bool {
        self.guarded.contains(&stmt)
    }

    /// Guarded statements as maximal contiguous index ranges.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for &i in &self.guarded {
            match out.last_mut() {
                Some(r) if r.end == i => r.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }
}

/// Copies of `v` within `m`, including `v`.
fn aliases(m: &MethodBody, v: &Var) -> HashSet<Var> {
    let mut set = HashSet::from([v.clone()]);
    for s in &m.statements {
        if s.op == Op::Assign && s.assign_op.is_none() && s.uses.len() == 1 && set.contains(&s.uses[0]) {
            set.extend(s.def().cloned());
        }
    }
    set
}

pub fn validate_broadcast_check(
    m: &MethodBody,
    cfg: &Cfg,
    intent: &Var,
    system_broadcasts: &HashSet<String>,
) -> GuardInfo {
    let intents = aliases(m, intent);
    let mut actions = HashSet::new();
    let mut system_consts = HashSet::new();
    for s in &m.statements {
        match s.op {
            Op::CallSite => {
                let t = s.call_target.as_ref().expect("call site");
                let on_intent = s.receiver.as_ref().is_some_and(|r| intents.contains(r));
                if on_intent && t.method_name == "getAction" && t.param_types.is_empty() {
                    actions.extend(s.def().cloned());
                }
            }
            Op::ConstLoad => {
                if let Some(Literal::Str(v)) = &s.const_value {
                    if system_broadcasts.contains(v) {
                        system_consts.extend(s.def().cloned());
                    }
                }
            }
            _ => {}
        }
    }
    let mut check_vars = HashSet::new();
    for s in &m.statements {
        if s.op != Op::CallSite {
            continue;
        }
        let t = s.call_target.as_ref().expect("call site");
        let (Some(recv), [arg]) = (s.receiver.as_ref(), s.call_args()) else {
            continue;
        };
        if t.method_name != "equals" {
            continue;
        }
        let pair = (actions.contains(recv) && system_consts.contains(arg))
            || (system_consts.contains(recv) && actions.contains(arg));
        if pair {
            if let Some(d) = s.def() {
                check_vars.insert(d.clone());
            }
        }
    }
    let mut banned = HashSet::new();
    let mut checks = Vec::new();
    for s in &m.statements {
        if s.op != Op::If || !check_vars.contains(&s.uses[0]) {
            continue;
        }
        let (then_idx, _) = s.branch_targets.expect("if targets");
        banned.insert((cfg.block_of(s.index), cfg.block_of(then_idx)));
        checks.push(s.index);
    }
    if banned.is_empty() {
        return GuardInfo::default();
    }
    let all = cfg.reachable_statements();
    let open = cfg.reachable_statements_excluding(&banned);
    GuardInfo {
        guarded: all.difference(&open).copied().collect(),
        checks,
    }
}

pub fn parse_system_broadcasts(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Union of several broadcast list files. Empty files are reported with a warning.
pub fn load_system_broadcasts<P: AsRef<Path>>(paths: &[P]) -> std::io::Result<HashSet<String>> {
    let mut out = HashSet::new();
    for p in paths {
        let p = p.as_ref();
        let set = parse_system_broadcasts(&std::fs::read_to_string(p)?);
        if set.is_empty() {
            log::warn!("broadcast list {} is empty", p.display());
        }
        out.extend(set);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_cfg;
    use crate::model::ir::parse_classes;

    fn onreceive(body: &str) -> MethodBody {
        let doc = format!(
            "class a.R\nmethod void onReceive(android.content.Context,android.content.Intent)\n  this r0\n  params r1 r2\n{body}"
        );
        parse_classes(&doc, "t.ir").unwrap().remove(0).methods.remove(0)
    }

    fn system() -> HashSet<String> {
        HashSet::from(["android.intent.action.BOOT_COMPLETED".to_string()])
    }

    const GUARDED: &str = "  0: r3 = call r2.<android.content.Intent: java.lang.String getAction()>()\n\
        1: r4 = const \"android.intent.action.BOOT_COMPLETED\"\n\
        2: z0 = call r3.<java.lang.String: boolean equals(java.lang.Object)>(r4)\n\
        3: if z0 goto 4 else 6\n\
        4: call r0.<a.R: void sink()>()\n\
        5: return\n\
        6: return\n";

    #[test]
    fn boot_completed_check_guards_then_branch() {
        let m = onreceive(GUARDED);
        let g = validate_broadcast_check(&m, &build_cfg(&m).unwrap(), &Var::new("r2"), &system());
        assert_eq!(g.checks, vec![3]);
        assert_eq!(g.ranges(), vec![4..6]);
    }

    #[test]
    fn non_system_action_does_not_guard() {
        let m = onreceive(&GUARDED.replace("android.intent.action.BOOT_COMPLETED", "com.attacker.ACTION"));
        let g = validate_broadcast_check(&m, &build_cfg(&m).unwrap(), &Var::new("r2"), &system());
        assert!(g.guarded.is_empty());
    }

    #[test]
    fn reversed_equals_operands() {
        let m = onreceive(&GUARDED.replace("call r3.<java.lang.String: boolean equals(java.lang.Object)>(r4)", "call r4.<java.lang.String: boolean equals(java.lang.Object)>(r3)"));
        let g = validate_broadcast_check(&m, &build_cfg(&m).unwrap(), &Var::new("r2"), &system());
        assert!(g.contains(4));
    }

    #[test]
    fn join_after_guard_is_not_guarded() {
        let m = onreceive(
            "  0: r3 = call r2.<android.content.Intent: java.lang.String getAction()>()\n\
             1: r4 = const \"android.intent.action.BOOT_COMPLETED\"\n\
             2: z0 = call r3.<java.lang.String: boolean equals(java.lang.Object)>(r4)\n\
             3: if z0 goto 4 else 5\n\
             4: call r0.<a.R: void a()>()\n\
             5: call r0.<a.R: void b()>()\n\
             6: return\n",
        );
        let g = validate_broadcast_check(&m, &build_cfg(&m).unwrap(), &Var::new("r2"), &system());
        assert!(g.contains(4));
        assert!(!g.contains(5));
    }

    #[test]
    fn broadcast_files_union_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        let e = dir.path().join("e.txt");
        let first: Vec<String> = (0..10).map(|i| format!("x.A{i}")).collect();
        let second: Vec<String> = (7..15).map(|i| format!("x.A{i}")).collect();
        std::fs::write(&a, first.join("\n")).unwrap();
        std::fs::write(&b, second.join("\n")).unwrap();
        std::fs::write(&e, "").unwrap();
        assert_eq!(load_system_broadcasts(&[&a, &b]).unwrap().len(), 15);
        assert!(load_system_broadcasts(&[&e]).unwrap().is_empty());
    }
}
