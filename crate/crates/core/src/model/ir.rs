//! Line-oriented class IR documents.
//!
//! ```text
//! class com.example.SmsReceiver extends android.content.BroadcastReceiver
//! field java.lang.String lastNumber
//! method void onReceive(android.content.Context,android.content.Intent)
//!   this r0
//!   params r1 r2
//!   0: r3 = const "phone"
//!   1: r4 = call r2.<android.content.Intent: java.lang.String getStringExtra(java.lang.String)>(r3)
//!   2: return
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{
    ClassDecl, FieldRef, Literal, MethodBody, MethodSig, Op, Statement, Var,
    ENTRY_CALLBACK_NAMES,
};
use crate::error::ModelError;

/// Parse every class declared in one IR document.
pub fn parse_classes(text: &str, file: &str) -> Result<Vec<ClassDecl>, ModelError> {
    let mut classes: Vec<ClassDecl> = Vec::new();
    let mut method: Option<(MethodBody, usize)> = None;

    let finish_method =
        |classes: &mut Vec<ClassDecl>, method: &mut Option<(MethodBody, usize)>| {
            if let Some((m, line)) = method.take() {
                validate_method(&m, file, line)?;
                let class = classes.last_mut().expect("method outside class");
                if class
                    .methods
                    .iter()
                    .any(|other| other.signature.sub_sig() == m.signature.sub_sig())
                {
                    return Err(ModelError::parse(
                        file,
                        line,
                        format!("duplicate method {}", m.signature.sub_sig()),
                    ));
                }
                class.methods.push(m);
            }
            Ok(())
        };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match keyword {
            "class" => {
                finish_method(&mut classes, &mut method)?;
                classes.push(parse_class_header(rest).map_err(|m| ModelError::parse(file, lineno, m))?);
            }
            "field" => {
                finish_method(&mut classes, &mut method)?;
                let class = classes
                    .last_mut()
                    .ok_or_else(|| ModelError::parse(file, lineno, "field outside class"))?;
                let (ty, name) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| ModelError::parse(file, lineno, "expected `field <type> <name>`"))?;
                class.fields.push((ty.trim().to_string(), name.trim().to_string()));
            }
            "method" => {
                finish_method(&mut classes, &mut method)?;
                let class = classes
                    .last()
                    .ok_or_else(|| ModelError::parse(file, lineno, "method outside class"))?;
                let sig = parse_method_header(&class.name, rest)
                    .map_err(|m| ModelError::parse(file, lineno, m))?;
                let is_entry_candidate = ENTRY_CALLBACK_NAMES.contains(&sig.method_name.as_str());
                method = Some((
                    MethodBody {
                        signature: sig,
                        this_var: None,
                        params: Vec::new(),
                        statements: Vec::new(),
                        is_entry_candidate,
                    },
                    lineno,
                ));
            }
            "this" => {
                let (m, _) = method
                    .as_mut()
                    .ok_or_else(|| ModelError::parse(file, lineno, "`this` outside method"))?;
                m.this_var = Some(parse_var(rest).map_err(|e| ModelError::parse(file, lineno, e))?);
            }
            "params" => {
                let (m, _) = method
                    .as_mut()
                    .ok_or_else(|| ModelError::parse(file, lineno, "`params` outside method"))?;
                m.params = rest
                    .split_whitespace()
                    .map(parse_var)
                    .collect::<Result<_, _>>()
                    .map_err(|e| ModelError::parse(file, lineno, e))?;
            }
            _ => {
                let (m, _) = method
                    .as_mut()
                    .ok_or_else(|| ModelError::parse(file, lineno, format!("unexpected line `{line}`")))?;
                let (idx, body) = line
                    .split_once(':')
                    .ok_or_else(|| ModelError::parse(file, lineno, format!("unexpected line `{line}`")))?;
                let idx: usize = idx
                    .trim()
                    .parse()
                    .map_err(|_| ModelError::parse(file, lineno, format!("bad statement index `{idx}`")))?;
                if idx != m.statements.len() {
                    return Err(ModelError::parse(
                        file,
                        lineno,
                        format!("statement index {idx}, expected {}", m.statements.len()),
                    ));
                }
                let stmt = parse_statement(idx, body.trim()).map_err(|e| ModelError::parse(file, lineno, e))?;
                m.statements.push(stmt);
            }
        }
    }
    finish_method(&mut classes, &mut method)?;
    Ok(classes)
}

fn parse_class_header(rest: &str) -> Result<ClassDecl, String> {
    let mut tokens = rest.split_whitespace();
    let name = tokens.next().ok_or("class name missing")?.to_string();
    let mut superclass = None;
    let mut interfaces = Vec::new();
    while let Some(tok) = tokens.next() {
        match tok {
            "extends" => superclass = Some(tokens.next().ok_or("superclass missing")?.to_string()),
            "implements" => {
                let list = tokens.next().ok_or("interface list missing")?;
                interfaces = list
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
            }
            other => return Err(format!("unexpected `{other}` in class header")),
        }
    }
    Ok(ClassDecl {
        name,
        superclass,
        interfaces,
        methods: Vec::new(),
        fields: Vec::new(),
    })
}

fn parse_method_header(class: &str, rest: &str) -> Result<MethodSig, String> {
    let (ret, tail) = rest
        .split_once(char::is_whitespace)
        .ok_or("expected `method <return> <name>(<types>)`")?;
    let tail = tail.trim();
    let open = tail.find('(').ok_or("missing `(`")?;
    let close = tail.rfind(')').ok_or("missing `)`")?;
    if close != tail.len() - 1 || close < open {
        return Err("trailing text after parameter list".into());
    }
    let name = &tail[..open];
    let ident = |c: char| c.is_alphanumeric() || matches!(c, '_' | '$' | '<' | '>');
    if name.is_empty() || !name.chars().all(ident) {
        return Err(format!("bad method name `{name}`"));
    }
    Ok(MethodSig {
        class_name: class.to_string(),
        return_type: ret.to_string(),
        method_name: name.to_string(),
        param_types: split_types(&tail[open + 1..close]),
    })
}

fn split_types(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_var(s: &str) -> Result<Var, String> {
    let s = s.trim();
    let mut chars = s.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        }
        _ => false,
    };
    if ok {
        Ok(Var::new(s))
    } else {
        Err(format!("invalid variable name `{s}`"))
    }
}

/// Parse `<class: ret name(params)>` at the start of `s`, returning the rest.
pub(crate) fn parse_sig_prefix(s: &str) -> Result<(MethodSig, &str), String> {
    let inner = s.strip_prefix('<').ok_or("signature must start with `<`")?;
    let (class, after) = inner.split_once(": ").ok_or("signature missing `: `")?;
    let (ret, after) = after.split_once(' ').ok_or("signature missing return type")?;
    let open = after.find('(').ok_or("signature missing `(`")?;
    let name = &after[..open];
    let close = after[open..].find(')').ok_or("signature missing `)`")? + open;
    let rest = after[close + 1..]
        .strip_prefix('>')
        .ok_or("signature missing closing `>`")?;
    Ok((
        MethodSig {
            class_name: class.to_string(),
            return_type: ret.to_string(),
            method_name: name.to_string(),
            param_types: split_types(&after[open + 1..close]),
        },
        rest,
    ))
}

/// Parse a complete `<class: ret name(params)>` signature.
pub fn parse_sig(s: &str) -> Result<MethodSig, String> {
    let (sig, rest) = parse_sig_prefix(s.trim())?;
    if rest.is_empty() {
        Ok(sig)
    } else {
        Err(format!("trailing text `{rest}` after signature"))
    }
}

fn parse_field_ref(s: &str) -> Result<FieldRef, String> {
    let inner = s
        .strip_prefix('<')
        .and_then(|s| s.strip_suffix('>'))
        .ok_or("field reference must look like `<class: type name>`")?;
    let (class, after) = inner.split_once(": ").ok_or("field reference missing `: `")?;
    let (ty, name) = after.split_once(' ').ok_or("field reference missing name")?;
    Ok(FieldRef {
        class_name: class.to_string(),
        field_type: ty.to_string(),
        name: name.to_string(),
    })
}

/// `[base.]<class: type name>`
fn parse_field_access(s: &str) -> Result<(Option<Var>, FieldRef), String> {
    match s.find(".<") {
        Some(dot) if !s.starts_with('<') => Ok((
            Some(parse_var(&s[..dot])?),
            parse_field_ref(&s[dot + 1..])?,
        )),
        _ => Ok((None, parse_field_ref(s)?)),
    }
}

fn parse_literal(s: &str) -> Result<Literal, String> {
    let s = s.trim();
    if let Some(body) = s.strip_prefix('"') {
        let body = body.strip_suffix('"').ok_or("unterminated string literal")?;
        let mut out = String::new();
        let mut chars = body.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    other => return Err(format!("bad escape `\\{}`", other.unwrap_or(' '))),
                }
            } else if c == '"' {
                return Err("unescaped quote in string literal".into());
            } else {
                out.push(c);
            }
        }
        Ok(Literal::Str(out))
    } else {
        s.parse::<i64>()
            .map(Literal::Int)
            .map_err(|_| format!("invalid literal `{s}`"))
    }
}

fn parse_args(s: &str) -> Result<Vec<Var>, String> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or("argument list must be parenthesised")?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(parse_var)
        .collect()
}

fn parse_call(index: usize, def: Option<Var>, s: &str) -> Result<Statement, String> {
    let (receiver, sig_text) = if s.starts_with('<') {
        (None, s)
    } else {
        let dot = s.find(".<").ok_or("call missing `.<signature>`")?;
        (Some(parse_var(&s[..dot])?), &s[dot + 1..])
    };
    let (target, rest) = parse_sig_prefix(sig_text)?;
    let args = parse_args(rest)?;
    Ok(Statement::call(index, def, receiver, target, args))
}

fn parse_target(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("bad branch target `{s}`"))
}

pub(crate) fn parse_statement(index: usize, body: &str) -> Result<Statement, String> {
    if let Some(rest) = body.strip_prefix("if ") {
        let (cond, targets) = rest.split_once(" goto ").ok_or("expected `if v goto A else B`")?;
        let (a, b) = targets.split_once(" else ").ok_or("expected `if v goto A else B`")?;
        return Ok(Statement::branch(index, parse_var(cond)?, parse_target(a)?, parse_target(b)?));
    }
    if let Some(rest) = body.strip_prefix("goto ") {
        return Ok(Statement::goto(index, parse_target(rest)?));
    }
    if body == "return" {
        return Ok(Statement::ret(index, None));
    }
    if let Some(rest) = body.strip_prefix("return ") {
        return Ok(Statement::ret(index, Some(parse_var(rest)?)));
    }
    if let Some(rest) = body.strip_prefix("store ") {
        let (target, value) = rest.rsplit_once(" = ").ok_or("expected `store <field> = v`")?;
        let (base, field) = parse_field_access(target.trim())?;
        return Ok(Statement::store(index, base, field, parse_var(value)?));
    }
    if let Some(rest) = body.strip_prefix("call ") {
        return parse_call(index, None, rest.trim());
    }
    let (lhs, rhs) = body.split_once(" = ").ok_or_else(|| format!("unrecognised statement `{body}`"))?;
    let def = parse_var(lhs)?;
    let rhs = rhs.trim();
    if let Some(rest) = rhs.strip_prefix("const ") {
        return Ok(Statement::constant(index, def, parse_literal(rest)?));
    }
    if let Some(rest) = rhs.strip_prefix("new ") {
        return Ok(Statement::new_object(index, def, rest.trim()));
    }
    if let Some(rest) = rhs.strip_prefix("call ") {
        return parse_call(index, Some(def), rest.trim());
    }
    if let Some(rest) = rhs.strip_prefix("load ") {
        let (base, field) = parse_field_access(rest.trim())?;
        return Ok(Statement::load(index, def, base, field));
    }
    if let Some(open) = rhs.find('(') {
        let op = &rhs[..open];
        parse_var(op).map_err(|_| format!("invalid operator `{op}`"))?;
        return Ok(Statement::assign(index, def, Some(op), parse_args(&rhs[open..])?));
    }
    Ok(Statement::assign(index, def, None, vec![parse_var(rhs)?]))
}

fn validate_method(m: &MethodBody, file: &str, line: usize) -> Result<(), ModelError> {
    let err = |msg: String| ModelError::parse(file, line, format!("{}: {msg}", m.signature));
    if !m.statements.is_empty() && m.params.len() != m.signature.param_types.len() {
        return Err(err(format!(
            "{} parameter variables for {} declared types",
            m.params.len(),
            m.signature.param_types.len()
        )));
    }
    let mut defined: HashSet<&Var> = m.params.iter().chain(m.this_var.iter()).collect();
    if defined.len() != m.params.len() + usize::from(m.this_var.is_some()) {
        return Err(err("parameter variables are not distinct".into()));
    }
    let all_defs: HashSet<&Var> = m.statements.iter().flat_map(|s| s.defs.iter()).collect();
    for s in &m.statements {
        let is_phi = s.op == Op::Assign && s.assign_op.as_deref() == Some("phi");
        for u in &s.uses {
            let ok = defined.contains(u) || (is_phi && all_defs.contains(u));
            if !ok {
                return Err(err(format!("statement {} uses undefined variable {u}", s.index)));
            }
        }
        for d in &s.defs {
            if !defined.insert(d) {
                return Err(err(format!("variable {d} assigned more than once")));
            }
        }
    }
    Ok(())
}

pub fn render_statement(s: &Statement) -> String {
    let lhs = s.def().map(|d| format!("{d} = ")).unwrap_or_default();
    let base = |s: &Statement| s.receiver.as_ref().map(|r| format!("{r}.")).unwrap_or_default();
    match s.op {
        Op::If => {
            let (a, b) = s.branch_targets.unwrap_or_default();
            format!("if {} goto {a} else {b}", s.uses[0])
        }
        Op::Goto => format!("goto {}", s.goto_target.unwrap_or_default()),
        Op::Return => match s.uses.first() {
            Some(v) => format!("return {v}"),
            None => "return".into(),
        },
        Op::ConstLoad => format!(
            "{lhs}const {}",
            s.const_value.as_ref().map(Literal::to_string).unwrap_or_default()
        ),
        Op::New => format!("{lhs}new {}", s.new_type.as_deref().unwrap_or("?")),
        Op::CallSite => format!(
            "{lhs}call {}{}({})",
            base(s),
            s.call_target.as_ref().map(ToString::to_string).unwrap_or_default(),
            join_vars(s.call_args())
        ),
        Op::FieldLoad => format!(
            "{lhs}load {}{}",
            base(s),
            s.field_ref.as_ref().map(ToString::to_string).unwrap_or_default()
        ),
        Op::FieldStore => format!(
            "store {}{} = {}",
            base(s),
            s.field_ref.as_ref().map(ToString::to_string).unwrap_or_default(),
            s.stored_value().map(Var::as_str).unwrap_or("?")
        ),
        Op::Assign => match &s.assign_op {
            Some(op) => format!("{lhs}{op}({})", join_vars(&s.uses)),
            None => format!("{lhs}{}", s.uses[0]),
        },
    }
}

fn join_vars(vars: &[Var]) -> String {
    vars.iter().map(Var::as_str).collect::<Vec<_>>().join(", ")
}

pub fn render_class(c: &ClassDecl) -> String {
    let mut out = format!("class {}", c.name);
    if let Some(sup) = &c.superclass {
        let _ = write!(out, " extends {sup}");
    }
    if !c.interfaces.is_empty() {
        let _ = write!(out, " implements {}", c.interfaces.join(","));
    }
    out.push('\n');
    for (ty, name) in &c.fields {
        let _ = writeln!(out, "field {ty} {name}");
    }
    for m in &c.methods {
        let sig = &m.signature;
        let _ = writeln!(
            out,
            "method {} {}({})",
            sig.return_type,
            sig.method_name,
            sig.param_types.join(",")
        );
        if let Some(t) = &m.this_var {
            let _ = writeln!(out, "  this {t}");
        }
        if !m.params.is_empty() {
            let _ = writeln!(out, "  params {}", join_vars(&m.params).replace(", ", " "));
        }
        for s in &m.statements {
            let _ = writeln!(out, "  {}: {}", s.index, render_statement(s));
        }
    }
    out
}
