//! Interface and class descriptors, structural compatibility, the
//! interface-only signature rule, and descriptor documents.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::value::{FieldList, TypeEnvironment, TypeRef};

/// Method names with this prefix are reserved for built-in calls.
pub const RESERVED_PREFIX: &str = "__";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodSig {
    pub name: String,
    pub params: Vec<TypeRef>,
    pub returns: TypeRef,
}

impl MethodSig {
    pub fn new(name: impl Into<String>, params: Vec<TypeRef>, returns: TypeRef) -> Self {
        MethodSig {
            name: name.into(),
            params,
            returns,
        }
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ") -> {}", self.returns)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("empty identifier")]
    EmptyName,
    #[error("duplicate method `{0}`")]
    DuplicateMethod(String),
    #[error("method name `{0}` is reserved")]
    ReservedMethod(String),
    #[error("duplicate state field `{0}`")]
    DuplicateField(String),
}

fn validate_methods(methods: &[MethodSig]) -> Result<(), DescriptorError> {
    let mut seen = BTreeSet::new();
    for m in methods {
        if m.name.is_empty() {
            return Err(DescriptorError::EmptyName);
        }
        if m.name.starts_with(RESERVED_PREFIX) {
            return Err(DescriptorError::ReservedMethod(m.name.clone()));
        }
        if !seen.insert(m.name.as_str()) {
            return Err(DescriptorError::DuplicateMethod(m.name.clone()));
        }
    }
    Ok(())
}

/// A named set of method signatures: the unit of deployment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceDescriptor {
    name: String,
    methods: Vec<MethodSig>,
}

impl InterfaceDescriptor {
    pub fn new(name: impl Into<String>, methods: Vec<MethodSig>) -> Result<Self, DescriptorError> {
        let name = name.into();
        if name.is_empty() {
            return Err(DescriptorError::EmptyName);
        }
        validate_methods(&methods)?;
        Ok(InterfaceDescriptor { name, methods })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn methods(&self) -> &[MethodSig] {
        &self.methods
    }

    pub fn method(&self, name: &str) -> Option<&MethodSig> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// Shape of a concrete component class. Never sent as a type on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDescriptor {
    name: String,
    state_fields: FieldList,
    methods: Vec<MethodSig>,
}

impl ClassDescriptor {
    pub fn new(name: impl Into<String>) -> Self {
        ClassDescriptor {
            name: name.into(),
            state_fields: Vec::new(),
            methods: Vec::new(),
        }
    }

    pub fn with_state(mut self, field: impl Into<String>, ty: TypeRef) -> Self {
        self.state_fields.push((field.into(), ty));
        self
    }

    pub fn with_method(mut self, sig: MethodSig) -> Self {
        self.methods.push(sig);
        self
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.name.is_empty() {
            return Err(DescriptorError::EmptyName);
        }
        validate_methods(&self.methods)?;
        let mut seen = BTreeSet::new();
        for (f, _) in &self.state_fields {
            if f.is_empty() {
                return Err(DescriptorError::EmptyName);
            }
            if !seen.insert(f.as_str()) {
                return Err(DescriptorError::DuplicateField(f.clone()));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_fields(&self) -> &FieldList {
        &self.state_fields
    }

    pub fn methods(&self) -> &[MethodSig] {
        &self.methods
    }

    pub fn method(&self, name: &str) -> Option<&MethodSig> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// `Ok` iff every interface method has an identically named and typed
/// method on the class. Otherwise the unmatched interface methods, in
/// interface order.
pub fn check_compat(
    cls: &ClassDescriptor,
    iface: &InterfaceDescriptor,
) -> Result<(), Vec<MethodSig>> {
    let missing: Vec<MethodSig> = iface
        .methods()
        .iter()
        .filter(|want| cls.method(&want.name) != Some(*want))
        .cloned()
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(missing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigPosition {
    Param(usize),
    Return,
}

impl fmt::Display for SigPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigPosition::Param(i) => write!(f, "param {i}"),
            SigPosition::Return => f.write_str("return"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    /// A concrete class named where only interfaces may appear.
    ClassName,
    /// A name that resolves to nothing in the environment.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Violation {
    pub interface: String,
    pub method: String,
    pub position: SigPosition,
    pub offending: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::ClassName => "class",
            ViolationKind::Unresolved => "unresolved name",
        };
        write!(
            f,
            "{}.{} {}: {} `{}`",
            self.interface, self.method, self.position, what, self.offending
        )
    }
}

/// Everything reachable from one interface's signatures.
struct Closure {
    interfaces: Vec<String>,
    records: BTreeSet<String>,
    violations: Vec<Violation>,
}

fn walk_closure(root: &InterfaceDescriptor, env: &TypeEnvironment) -> Closure {
    let mut seen_ifaces: BTreeSet<String> = BTreeSet::new();
    let mut queue: VecDeque<&InterfaceDescriptor> = VecDeque::new();
    let mut closure = Closure {
        interfaces: Vec::new(),
        records: BTreeSet::new(),
        violations: Vec::new(),
    };
    seen_ifaces.insert(root.name().to_string());
    queue.push_back(root);

    while let Some(iface) = queue.pop_front() {
        closure.interfaces.push(iface.name().to_string());
        for m in iface.methods() {
            let positions = m
                .params
                .iter()
                .enumerate()
                .map(|(i, t)| (SigPosition::Param(i), t))
                .chain(std::iter::once((SigPosition::Return, &m.returns)));
            for (pos, ty) in positions {
                let mut stack = vec![ty];
                while let Some(t) = stack.pop() {
                    let violation = |name: &str, kind| Violation {
                        interface: iface.name().to_string(),
                        method: m.name.clone(),
                        position: pos,
                        offending: name.to_string(),
                        kind,
                    };
                    match t {
                        TypeRef::Null
                        | TypeRef::Bool
                        | TypeRef::Int
                        | TypeRef::Float
                        | TypeRef::Str => {}
                        TypeRef::ListOf(e) => stack.push(e),
                        TypeRef::Record(n) | TypeRef::Interface(n) if env.class(n).is_some() => {
                            closure
                                .violations
                                .push(violation(n, ViolationKind::ClassName));
                        }
                        TypeRef::Record(n) => match env.record(n) {
                            Some(fields) => {
                                if closure.records.insert(n.clone()) {
                                    stack.extend(fields.iter().map(|(_, ft)| ft));
                                }
                            }
                            None => closure
                                .violations
                                .push(violation(n, ViolationKind::Unresolved)),
                        },
                        TypeRef::Interface(n) => {
                            if seen_ifaces.contains(n) {
                                continue;
                            }
                            match env.interface(n) {
                                Some(next) => {
                                    seen_ifaces.insert(n.clone());
                                    queue.push_back(next);
                                }
                                None => closure
                                    .violations
                                    .push(violation(n, ViolationKind::Unresolved)),
                            }
                        }
                    }
                }
            }
        }
    }
    closure
}

/// Checks that every type reachable from `iface` (through lists, record
/// fields and referenced interfaces) is a primitive, a record, or an
/// interface, never a class.
pub fn check_closure(
    iface: &InterfaceDescriptor,
    env: &TypeEnvironment,
) -> Result<(), Vec<Violation>> {
    let closure = walk_closure(iface, env);
    if closure.violations.is_empty() {
        Ok(())
    } else {
        Err(closure.violations)
    }
}

pub fn typeref_to_json(t: &TypeRef) -> Json {
    match t {
        TypeRef::Null => json!("null"),
        TypeRef::Bool => json!("bool"),
        TypeRef::Int => json!("i64"),
        TypeRef::Float => json!("f64"),
        TypeRef::Str => json!("str"),
        TypeRef::ListOf(e) => json!({ "list": typeref_to_json(e) }),
        TypeRef::Record(n) => json!({ "record": n }),
        TypeRef::Interface(n) => json!({ "interface": n }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed descriptor document: {0}")]
pub struct ParseDescriptorError(pub String);

fn bad(msg: impl Into<String>) -> ParseDescriptorError {
    ParseDescriptorError(msg.into())
}

pub fn typeref_from_json(j: &Json) -> Result<TypeRef, ParseDescriptorError> {
    match j {
        Json::String(s) => match s.as_str() {
            "null" => Ok(TypeRef::Null),
            "bool" => Ok(TypeRef::Bool),
            "i64" => Ok(TypeRef::Int),
            "f64" => Ok(TypeRef::Float),
            "str" => Ok(TypeRef::Str),
            other => Err(bad(format!("unknown primitive type `{other}`"))),
        },
        Json::Object(m) if m.len() == 1 => {
            let (k, v) = m.iter().next().expect("len checked");
            match (k.as_str(), v) {
                ("list", inner) => Ok(TypeRef::list_of(typeref_from_json(inner)?)),
                ("record", Json::String(n)) if !n.is_empty() => Ok(TypeRef::record(n.clone())),
                ("interface", Json::String(n)) if !n.is_empty() => {
                    Ok(TypeRef::interface(n.clone()))
                }
                _ => Err(bad(format!("bad typeref `{j}`"))),
            }
        }
        _ => Err(bad(format!("bad typeref `{j}`"))),
    }
}

fn methods_to_json(methods: &[MethodSig]) -> Json {
    Json::Array(
        methods
            .iter()
            .map(|m| {
                json!({
                    "name": m.name,
                    "params": m.params.iter().map(typeref_to_json).collect::<Vec<_>>(),
                    "returns": typeref_to_json(&m.returns),
                })
            })
            .collect(),
    )
}

fn methods_from_json(j: &Json) -> Result<Vec<MethodSig>, ParseDescriptorError> {
    let arr = j
        .as_array()
        .ok_or_else(|| bad("methods must be an array"))?;
    arr.iter()
        .map(|m| {
            let obj = m
                .as_object()
                .ok_or_else(|| bad("method must be an object"))?;
            let name = obj
                .get("name")
                .and_then(Json::as_str)
                .ok_or_else(|| bad("method without name"))?;
            let params = obj
                .get("params")
                .and_then(Json::as_array)
                .ok_or_else(|| bad("method without params"))?
                .iter()
                .map(typeref_from_json)
                .collect::<Result<Vec<_>, _>>()?;
            let returns = typeref_from_json(
                obj.get("returns")
                    .ok_or_else(|| bad("method without returns"))?,
            )?;
            Ok(MethodSig::new(name, params, returns))
        })
        .collect()
}

/// The machine-readable description of a deployed interface, served at the
/// `?wsdl` endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub interface: InterfaceDescriptor,
    pub records: BTreeMap<String, FieldList>,
    pub interfaces: BTreeMap<String, InterfaceDescriptor>,
}

impl Descriptor {
    /// Collects the transitive closure of referenced records and interfaces.
    /// The root interface is not repeated among the referenced ones.
    pub fn build(iface: &InterfaceDescriptor, env: &TypeEnvironment) -> Descriptor {
        let closure = walk_closure(iface, env);
        let records = closure
            .records
            .into_iter()
            .filter_map(|n| env.record(&n).map(|f| (n, f.clone())))
            .collect();
        let interfaces = closure
            .interfaces
            .into_iter()
            .filter(|n| n != iface.name())
            .filter_map(|n| env.interface(&n).map(|i| (n, i.clone())))
            .collect();
        Descriptor {
            interface: iface.clone(),
            records,
            interfaces,
        }
    }

    pub fn to_json(&self) -> Json {
        let mut records = Map::new();
        for (name, fields) in &self.records {
            let fields: Vec<Json> = fields
                .iter()
                .map(|(f, t)| json!({ "name": f, "type": typeref_to_json(t) }))
                .collect();
            records.insert(name.clone(), Json::Array(fields));
        }
        let mut interfaces = Map::new();
        for (name, iface) in &self.interfaces {
            interfaces.insert(
                name.clone(),
                json!({ "methods": methods_to_json(iface.methods()) }),
            );
        }
        json!({
            "interface": self.interface.name(),
            "methods": methods_to_json(self.interface.methods()),
            "records": records,
            "interfaces": interfaces,
        })
    }

    pub fn encode(&self) -> String {
        self.to_json().to_string()
    }

    pub fn parse(text: &str) -> Result<Descriptor, ParseDescriptorError> {
        let doc: Json = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| bad("document must be an object"))?;
        let name = obj
            .get("interface")
            .and_then(Json::as_str)
            .ok_or_else(|| bad("missing interface name"))?;
        let methods = methods_from_json(obj.get("methods").ok_or_else(|| bad("missing methods"))?)?;
        let interface = InterfaceDescriptor::new(name, methods).map_err(|e| bad(e.to_string()))?;

        let mut records = BTreeMap::new();
        if let Some(r) = obj.get("records") {
            for (rname, fields) in r
                .as_object()
                .ok_or_else(|| bad("records must be an object"))?
            {
                let fields = fields
                    .as_array()
                    .ok_or_else(|| bad("record fields must be an array"))?
                    .iter()
                    .map(|f| {
                        let fname = f
                            .get("name")
                            .and_then(Json::as_str)
                            .ok_or_else(|| bad("field without name"))?;
                        let ty = typeref_from_json(
                            f.get("type").ok_or_else(|| bad("field without type"))?,
                        )?;
                        Ok((fname.to_string(), ty))
                    })
                    .collect::<Result<FieldList, ParseDescriptorError>>()?;
                records.insert(rname.clone(), fields);
            }
        }
        let mut interfaces = BTreeMap::new();
        if let Some(i) = obj.get("interfaces") {
            for (iname, body) in i
                .as_object()
                .ok_or_else(|| bad("interfaces must be an object"))?
            {
                let methods = methods_from_json(
                    body.get("methods")
                        .ok_or_else(|| bad("interface without methods"))?,
                )?;
                let desc = InterfaceDescriptor::new(iname.clone(), methods)
                    .map_err(|e| bad(e.to_string()))?;
                interfaces.insert(iname.clone(), desc);
            }
        }
        Ok(Descriptor {
            interface,
            records,
            interfaces,
        })
    }
}

/// Descriptor document text for `iface`. Deterministic for equal inputs.
pub fn describe(iface: &InterfaceDescriptor, env: &TypeEnvironment) -> String {
    Descriptor::build(iface, env).encode()
}
