//! Rule files: one `priority metric action pattern tag` tuple per line.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Permission,
    ApiName,
    ClassName,
    ParamType,
    ReturnType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Equals,
    Start,
    End,
    Contain,
}

impl Action {
    pub fn matches(self, value: &str, pattern: &str) -> bool {
        match self {
            Action::Equals => value == pattern,
            Action::Start => value.starts_with(pattern),
            Action::End => value.ends_with(pattern),
            Action::Contain => value.contains(pattern),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    Sink(Category),
    VSource,
    Delete,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Sink(c) => write!(f, "{c}"),
            Tag::VSource => f.write_str("VSource"),
            Tag::Delete => f.write_str("Tag_Delete"),
        }
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "Permission" => Metric::Permission,
            "ApiName" => Metric::ApiName,
            "ClassName" => Metric::ClassName,
            "ParamType" => Metric::ParamType,
            "ReturnType" => Metric::ReturnType,
            _ => return Err(format!("unknown metric `{s}`")),
        })
    }
}

impl FromStr for Action {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "EQUALS" => Action::Equals,
            "START" => Action::Start,
            "END" => Action::End,
            "CONTAIN" => Action::Contain,
            _ => return Err(format!("unknown action `{s}`")),
        })
    }
}

impl FromStr for Tag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "VSource" => Ok(Tag::VSource),
            "Tag_Delete" => Ok(Tag::Delete),
            other => other
                .parse::<Category>()
                .map(Tag::Sink)
                .map_err(|_| format!("unknown tag `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRule {
    pub priority: i64,
    pub metric: Metric,
    pub action: Action,
    pub pattern: String,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule file line {line}: {msg}")]
pub struct RuleSyntaxError {
    pub line: usize,
    pub msg: String,
}

/// Parse a rule file and return its rules in evaluation (priority) order.
pub fn parse_rules(text: &str) -> Result<Vec<ClassificationRule>, RuleSyntaxError> {
    let mut rules = Vec::new();
    let mut priorities = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| RuleSyntaxError { line, msg };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [priority, metric, action, pattern, tag] = fields[..] else {
            return Err(err(format!(
                "expected 5 fields `priority metric action pattern tag`, found {}",
                fields.len()
            )));
        };
        let priority: i64 = priority
            .parse()
            .map_err(|_| err(format!("priority `{priority}` is not an integer")))?;
        if !priorities.insert(priority) {
            return Err(err(format!("duplicate priority {priority}")));
        }
        rules.push(ClassificationRule {
            priority,
            metric: metric.parse().map_err(err)?,
            action: action.parse().map_err(err)?,
            pattern: pattern.to_string(),
            tag: tag.parse().map_err(err)?,
        });
    }
    rules.sort_by_key(|r| r.priority);
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn send_sms_rule() {
        let rules = parse_rules("10 Permission EQUALS android.permission.SEND_SMS VS_Direct").unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].metric, Metric::Permission);
        assert_eq!(rules[0].tag, Tag::Sink(Category::Direct));
    }

    #[test]
    fn empty_and_comment_only() {
        assert!(parse_rules("").unwrap().is_empty());
        assert!(parse_rules("# nothing\n\n   # here\n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_priority_rejected_with_line() {
        let e = parse_rules("1 ApiName EQUALS a VSource\n\n1 ApiName EQUALS b VSource\n").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn sorted_by_priority() {
        let rules = parse_rules("9 ApiName START get VSource\n5 ApiName EQUALS vibrate Tag_Delete # drop\n").unwrap();
        assert_eq!(rules.iter().map(|r| r.priority).collect::<Vec<_>>(), vec![5, 9]);
        assert_eq!(rules[0].tag, Tag::Delete);
    }

    #[test]
    fn bad_tokens_rejected() {
        assert!(parse_rules("1 Colour EQUALS a VSource").is_err());
        assert!(parse_rules("1 ApiName LIKE a VSource").is_err());
        assert!(parse_rules("1 ApiName EQUALS a VS_Other").is_err());
        assert!(parse_rules("x ApiName EQUALS a VSource").is_err());
        assert!(parse_rules("1 ApiName EQUALS a").is_err());
    }
}
