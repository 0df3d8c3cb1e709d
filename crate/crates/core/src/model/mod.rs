//! Portable app-bundle representation: manifest model, class hierarchy and a
//! typed SSA-form method IR.

mod bundle;
pub mod cfg;
pub mod hierarchy;
pub mod ir;
pub mod manifest_xml;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bundle::{parse_bundle, serialize_bundle, FrameworkIndex, CLASSES_DIR, MANIFEST_FILE};
pub use cfg::{build_cfg, Cfg};
pub use hierarchy::{resolve_virtual, Hierarchy, Resolution};

/// An SSA variable name (`r3`, `z0`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Literal {
    Str(String),
    Int(i64),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    Activity,
    Service,
    Receiver,
    Provider,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::Activity,
        ComponentKind::Service,
        ComponentKind::Receiver,
        ComponentKind::Provider,
    ];

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "activity" | "activity-alias" => Some(ComponentKind::Activity),
            "service" => Some(ComponentKind::Service),
            "receiver" => Some(ComponentKind::Receiver),
            "provider" => Some(ComponentKind::Provider),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ComponentKind::Activity => "activity",
            ComponentKind::Service => "service",
            ComponentKind::Receiver => "receiver",
            ComponentKind::Provider => "provider",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComponentKind::Activity => "Activity",
            ComponentKind::Service => "Service",
            ComponentKind::Receiver => "Receiver",
            ComponentKind::Provider => "Provider",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtectionLevel {
    Normal,
    Dangerous,
    Signature,
    SignatureOrSystem,
}

impl ProtectionLevel {
    pub fn parse(s: &str) -> Option<Self> {
        // Manifests may combine flags ("signature|privileged"); the base level decides.
        let base = s.split('|').next().unwrap_or(s).trim();
        match base {
            "normal" => Some(ProtectionLevel::Normal),
            "dangerous" => Some(ProtectionLevel::Dangerous),
            "signature" => Some(ProtectionLevel::Signature),
            "signatureOrSystem" => Some(ProtectionLevel::SignatureOrSystem),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProtectionLevel::Normal => "normal",
            ProtectionLevel::Dangerous => "dangerous",
            ProtectionLevel::Signature => "signature",
            ProtectionLevel::SignatureOrSystem => "signatureOrSystem",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentDecl {
    pub name: String,
    pub kind: ComponentKind,
    pub enabled: bool,
    pub exported: Option<bool>,
    pub has_intent_filter: bool,
    pub permission: Option<String>,
    pub intent_filter_actions: Vec<String>,
}

impl ComponentDecl {
    pub fn new(name: impl Into<String>, kind: ComponentKind) -> Self {
        ComponentDecl {
            name: name.into(),
            kind,
            enabled: true,
            exported: None,
            has_intent_filter: false,
            permission: None,
            intent_filter_actions: Vec::new(),
        }
    }
}

/// Complete method signature, rendered as `<class: ret name(p1,p2)>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodSig {
    pub class_name: String,
    pub return_type: String,
    pub method_name: String,
    pub param_types: Vec<String>,
}

impl MethodSig {
    pub fn new(
        class_name: impl Into<String>,
        return_type: impl Into<String>,
        method_name: impl Into<String>,
        param_types: &[&str],
    ) -> Self {
        MethodSig {
            class_name: class_name.into(),
            return_type: return_type.into(),
            method_name: method_name.into(),
            param_types: param_types.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn sub_sig(&self) -> SubSig {
        SubSig {
            return_type: self.return_type.clone(),
            name: self.method_name.clone(),
            params: self.param_types.clone(),
        }
    }

    pub fn with_class(&self, class_name: &str) -> MethodSig {
        MethodSig {
            class_name: class_name.to_string(),
            ..self.clone()
        }
    }

    /// `name(p1,p2)`, the part that identifies an override regardless of return type.
    pub fn name_and_params(&self) -> String {
        format!("{}({})", self.method_name, self.param_types.join(","))
    }

    pub fn simple_class_name(&self) -> &str {
        self.class_name
            .rsplit(['.', '$'])
            .next()
            .unwrap_or(&self.class_name)
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}: {} {}({})>",
            self.class_name,
            self.return_type,
            self.method_name,
            self.param_types.join(",")
        )
    }
}

/// Name + parameter types + return type of a method, without its class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubSig {
    pub return_type: String,
    pub name: String,
    pub params: Vec<String>,
}

impl SubSig {
    pub fn new(return_type: &str, name: &str, params: &[&str]) -> Self {
        SubSig {
            return_type: return_type.to_string(),
            name: name.to_string(),
            params: params.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn in_class(&self, class_name: &str) -> MethodSig {
        MethodSig {
            class_name: class_name.to_string(),
            return_type: self.return_type.clone(),
            method_name: self.name.clone(),
            param_types: self.params.clone(),
        }
    }
}

impl fmt::Display for SubSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}({})", self.return_type, self.name, self.params.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldRef {
    pub class_name: String,
    pub field_type: String,
    pub name: String,
}

impl FieldRef {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.class_name, self.name)
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}: {} {}>", self.class_name, self.field_type, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Assign,
    CallSite,
    If,
    Goto,
    Return,
    ConstLoad,
    FieldLoad,
    FieldStore,
    New,
}

/// One IR statement. For call sites `uses` holds the receiver (when present)
/// followed by the arguments; for field stores it holds the optional base
/// followed by the stored value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub index: usize,
    pub op: Op,
    pub defs: Vec<Var>,
    pub uses: Vec<Var>,
    pub call_target: Option<MethodSig>,
    pub receiver: Option<Var>,
    pub const_value: Option<Literal>,
    pub branch_targets: Option<(usize, usize)>,
    pub field_ref: Option<FieldRef>,
    /// Operator name for `Assign` (`phi`, `concat`, ...); `None` is a plain copy.
    pub assign_op: Option<String>,
    /// Allocated type for `New`; jump target for `Goto`.
    pub new_type: Option<String>,
    pub goto_target: Option<usize>,
}

impl Statement {
    fn blank(index: usize, op: Op) -> Self {
        Statement {
            index,
            op,
            defs: Vec::new(),
            uses: Vec::new(),
            call_target: None,
            receiver: None,
            const_value: None,
            branch_targets: None,
            field_ref: None,
            assign_op: None,
            new_type: None,
            goto_target: None,
        }
    }

    pub fn call(
        index: usize,
        def: Option<Var>,
        receiver: Option<Var>,
        target: MethodSig,
        args: Vec<Var>,
    ) -> Self {
        let mut s = Statement::blank(index, Op::CallSite);
        s.defs.extend(def);
        s.uses.extend(receiver.clone());
        s.uses.extend(args);
        s.receiver = receiver;
        s.call_target = Some(target);
        s
    }

    pub fn constant(index: usize, def: Var, value: Literal) -> Self {
        let mut s = Statement::blank(index, Op::ConstLoad);
        s.defs.push(def);
        s.const_value = Some(value);
        s
    }

    pub fn assign(index: usize, def: Var, op: Option<&str>, uses: Vec<Var>) -> Self {
        let mut s = Statement::blank(index, Op::Assign);
        s.defs.push(def);
        s.uses = uses;
        s.assign_op = op.map(str::to_string);
        s
    }

    pub fn new_object(index: usize, def: Var, ty: &str) -> Self {
        let mut s = Statement::blank(index, Op::New);
        s.defs.push(def);
        s.new_type = Some(ty.to_string());
        s
    }

    pub fn load(index: usize, def: Var, base: Option<Var>, field: FieldRef) -> Self {
        let mut s = Statement::blank(index, Op::FieldLoad);
        s.defs.push(def);
        s.uses.extend(base.clone());
        s.receiver = base;
        s.field_ref = Some(field);
        s
    }

    pub fn store(index: usize, base: Option<Var>, field: FieldRef, value: Var) -> Self {
        let mut s = Statement::blank(index, Op::FieldStore);
        s.uses.extend(base.clone());
        s.uses.push(value);
        s.receiver = base;
        s.field_ref = Some(field);
        s
    }

    pub fn branch(index: usize, cond: Var, then_idx: usize, else_idx: usize) -> Self {
        let mut s = Statement::blank(index, Op::If);
        s.uses.push(cond);
        s.branch_targets = Some((then_idx, else_idx));
        s
    }

    pub fn goto(index: usize, target: usize) -> Self {
        let mut s = Statement::blank(index, Op::Goto);
        s.goto_target = Some(target);
        s
    }

    pub fn ret(index: usize, value: Option<Var>) -> Self {
        let mut s = Statement::blank(index, Op::Return);
        s.uses.extend(value);
        s
    }

    pub fn def(&self) -> Option<&Var> {
        self.defs.first()
    }

    /// Call arguments, excluding the receiver.
    pub fn call_args(&self) -> &[Var] {
        if self.op != Op::CallSite {
            return &[];
        }
        if self.receiver.is_some() {
            &self.uses[1..]
        } else {
            &self.uses
        }
    }

    /// Value written by a field store.
    pub fn stored_value(&self) -> Option<&Var> {
        (self.op == Op::FieldStore).then(|| self.uses.last()).flatten()
    }

    pub fn is_call(&self) -> bool {
        self.op == Op::CallSite
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodBody {
    pub signature: MethodSig,
    /// Receiver variable; `None` for static methods and stubs.
    pub this_var: Option<Var>,
    pub params: Vec<Var>,
    pub statements: Vec<Statement>,
    pub is_entry_candidate: bool,
}

impl MethodBody {
    pub fn has_body(&self) -> bool {
        !self.statements.is_empty()
    }

    pub fn param_position(&self, v: &Var) -> Option<usize> {
        self.params.iter().position(|p| p == v)
    }

    /// Statement defining `v`, if any.
    pub fn def_site(&self, v: &Var) -> Option<&Statement> {
        self.statements.iter().find(|s| s.defs.contains(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub methods: Vec<MethodBody>,
    pub fields: Vec<(String, String)>,
}

impl ClassDecl {
    pub fn find_method(&self, sub: &SubSig) -> Option<&MethodBody> {
        self.methods.iter().find(|m| {
            m.signature.method_name == sub.name
                && m.signature.param_types == sub.params
                && m.signature.return_type == sub.return_type
        })
    }

    /// Match by name and parameter types only.
    pub fn find_override(&self, name: &str, params: &[String]) -> Option<&MethodBody> {
        self.methods
            .iter()
            .find(|m| m.signature.method_name == name && m.signature.param_types == params)
    }

    pub fn field_type(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(_, n)| n == name)
            .map(|(t, _)| t.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppBundle {
    pub package_name: String,
    pub components: Vec<ComponentDecl>,
    pub classes: Vec<ClassDecl>,
    /// Permissions the app itself declares, with their protection level.
    pub permissions_declared: std::collections::BTreeMap<String, ProtectionLevel>,
}

impl AppBundle {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentDecl> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn method(&self, sig: &MethodSig) -> Option<&MethodBody> {
        self.class(&sig.class_name)?
            .find_method(&sig.sub_sig())
    }
}

/// Lifecycle and callback names that mark a method as a possible entry point.
pub(crate) const ENTRY_CALLBACK_NAMES: &[&str] = &[
    "<clinit>",
    "<init>",
    "onCreate",
    "onStart",
    "onResume",
    "onStop",
    "onDestroy",
    "onBind",
    "onStartCommand",
    "onHandleIntent",
    "handleMessage",
    "onReceive",
    "query",
    "insert",
    "update",
    "delete",
    "openFile",
];
