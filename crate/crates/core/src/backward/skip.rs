//! Uncritical-parameter skip-list: `class_pattern method_pattern param_index`.

use regex::Regex;

use crate::model::MethodSig;

#[derive(Debug, Clone)]
pub struct SkipRule {
    class: Regex,
    method: Regex,
    pub index: usize,
}

impl SkipRule {
    pub fn matches(&self, sig: &MethodSig, index: usize) -> bool {
        self.index == index && self.class.is_match(&sig.class_name) && self.method.is_match(&sig.method_name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SkipList {
    pub rules: Vec<SkipRule>,
}

impl SkipList {
    pub fn skips(&self, sig: &MethodSig, index: usize) -> bool {
        self.rules.iter().any(|r| r.matches(sig, index))
    }
}

/// `*` matches any run of characters; everything else is literal.
fn glob(p: &str) -> Regex {
    let body: Vec<String> = p.split('*').map(regex::escape).collect();
    Regex::new(&format!("^{}$", body.join(".*"))).expect("escaped glob")
}

pub fn parse_skip_list(text: &str) -> Result<SkipList, String> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [class, method, idx] = toks[..] else {
            return Err(format!("skip-list line {}: expected `class_pattern method_pattern param_index`", i + 1));
        };
        let index = idx
            .parse()
            .map_err(|_| format!("skip-list line {}: `{idx}` is not a parameter index", i + 1))?;
        rules.push(SkipRule {
            class: glob(class),
            method: glob(method),
            index,
        });
    }
    Ok(SkipList { rules })
}
