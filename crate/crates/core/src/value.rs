//! The transmissible value universe and the signature type grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::iface::{ClassDescriptor, InterfaceDescriptor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("float payload is not finite: {0}")]
    NonFinite(f64),
    #[error("duplicate field `{field}` in record `{record}`")]
    DuplicateField { record: String, field: String },
    #[error("empty identifier")]
    EmptyIdentifier,
    #[error("ior host is empty")]
    EmptyHost,
    #[error("ior port {0} outside 1..=65535")]
    BadPort(u64),
}

/// A finite IEEE-754 double.
#[derive(Debug, Clone, Copy)]
pub struct Finite(f64);

impl Finite {
    pub fn new(f: f64) -> Result<Self, ValueError> {
        if f.is_finite() {
            Ok(Finite(f))
        } else {
            Err(ValueError::NonFinite(f))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Finite {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Finite {}

/// Interoperable object reference: everything needed to reach one deployed
/// component on one node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ior {
    host: String,
    port: u16,
    object_number: u64,
    interface: String,
}

impl Ior {
    pub fn new(
        host: impl Into<String>,
        port: u64,
        object_number: u64,
        interface: impl Into<String>,
    ) -> Result<Self, ValueError> {
        let host = host.into();
        let interface = interface.into();
        if host.is_empty() {
            return Err(ValueError::EmptyHost);
        }
        if interface.is_empty() {
            return Err(ValueError::EmptyIdentifier);
        }
        if !(1..=65535).contains(&port) {
            return Err(ValueError::BadPort(port));
        }
        Ok(Ior {
            host,
            port: port as u16,
            object_number,
            interface,
        })
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn object_number(&self) -> u64 {
        self.object_number
    }

    pub fn interface(&self) -> &str {
        &self.interface
    }
}

impl fmt::Display for Ior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ref:{}:{}:{}:{}",
            self.host, self.port, self.object_number, self.interface
        )
    }
}

/// A named record with uniquely named, ordered fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record<V = Value> {
    type_name: String,
    fields: Vec<(String, V)>,
}

impl<V> Record<V> {
    pub fn new(type_name: impl Into<String>, fields: Vec<(String, V)>) -> Result<Self, ValueError> {
        let type_name = type_name.into();
        if type_name.is_empty() {
            return Err(ValueError::EmptyIdentifier);
        }
        let mut seen = BTreeSet::new();
        for (name, _) in &fields {
            if name.is_empty() {
                return Err(ValueError::EmptyIdentifier);
            }
            if !seen.insert(name.as_str()) {
                return Err(ValueError::DuplicateField {
                    record: type_name,
                    field: name.clone(),
                });
            }
        }
        Ok(Record { type_name, fields })
    }

    pub fn type_name(&self) -> &str {
        &self.type_name
    }

    pub fn fields(&self) -> &[(String, V)] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&V> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn into_fields(self) -> Vec<(String, V)> {
        self.fields
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(Finite),
    Str(String),
    List(Vec<Value>),
    Record(Record),
    Ref(Ior),
}

impl Value {
    pub fn float(f: f64) -> Result<Value, ValueError> {
        Finite::new(f).map(Value::Float)
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "i64",
            Value::Float(_) => "f64",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Record(_) => "rec",
            Value::Ref(_) => "ref",
        }
    }
}

/// Deep structural equality. Floats compare bit-exactly and references
/// compare on all four IOR fields.
pub fn value_equals(a: &Value, b: &Value) -> bool {
    a == b
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeRef {
    Null,
    Bool,
    Int,
    Float,
    Str,
    ListOf(Box<TypeRef>),
    Record(String),
    Interface(String),
}

impl TypeRef {
    pub fn list_of(elem: TypeRef) -> TypeRef {
        TypeRef::ListOf(Box::new(elem))
    }

    pub fn record(name: impl Into<String>) -> TypeRef {
        TypeRef::Record(name.into())
    }

    pub fn interface(name: impl Into<String>) -> TypeRef {
        TypeRef::Interface(name.into())
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Null => f.write_str("null"),
            TypeRef::Bool => f.write_str("bool"),
            TypeRef::Int => f.write_str("i64"),
            TypeRef::Float => f.write_str("f64"),
            TypeRef::Str => f.write_str("str"),
            TypeRef::ListOf(e) => write!(f, "list<{e}>"),
            TypeRef::Record(n) => write!(f, "record {n}"),
            TypeRef::Interface(n) => write!(f, "interface {n}"),
        }
    }
}

pub type FieldList = Vec<(String, TypeRef)>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("name `{0}` is already defined with a different meaning")]
    Collision(String),
}

/// Named record shapes, interfaces and component classes visible to a node.
///
/// The three namespaces are disjoint. A class's state fields double as the
/// record shape of its by-value snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnvironment {
    records: BTreeMap<String, FieldList>,
    interfaces: BTreeMap<String, InterfaceDescriptor>,
    classes: BTreeMap<String, ClassDescriptor>,
}

impl TypeEnvironment {
    pub fn new() -> Self {
        Self::default()
    }

    fn taken_elsewhere(&self, name: &str, kind: u8) -> bool {
        (kind != 0 && self.records.contains_key(name))
            || (kind != 1 && self.interfaces.contains_key(name))
            || (kind != 2 && self.classes.contains_key(name))
    }

    pub fn add_record(
        &mut self,
        name: impl Into<String>,
        fields: FieldList,
    ) -> Result<(), EnvError> {
        let name = name.into();
        if self.taken_elsewhere(&name, 0) {
            return Err(EnvError::Collision(name));
        }
        match self.records.get(&name) {
            Some(existing) if *existing != fields => Err(EnvError::Collision(name)),
            _ => {
                self.records.insert(name, fields);
                Ok(())
            }
        }
    }

    pub fn add_interface(&mut self, iface: InterfaceDescriptor) -> Result<(), EnvError> {
        let name = iface.name().to_string();
        if self.taken_elsewhere(&name, 1) {
            return Err(EnvError::Collision(name));
        }
        match self.interfaces.get(&name) {
            Some(existing) if *existing != iface => Err(EnvError::Collision(name)),
            _ => {
                self.interfaces.insert(name, iface);
                Ok(())
            }
        }
    }

    pub fn add_class(&mut self, class: ClassDescriptor) -> Result<(), EnvError> {
        let name = class.name().to_string();
        if self.taken_elsewhere(&name, 2) {
            return Err(EnvError::Collision(name));
        }
        match self.classes.get(&name) {
            Some(existing) if *existing != class => Err(EnvError::Collision(name)),
            _ => {
                self.classes.insert(name, class);
                Ok(())
            }
        }
    }

    pub fn record(&self, name: &str) -> Option<&FieldList> {
        self.records.get(name)
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceDescriptor> {
        self.interfaces.get(name)
    }

    pub fn class(&self, name: &str) -> Option<&ClassDescriptor> {
        self.classes.get(name)
    }

    /// Field shape for a record type name: declared records first, then
    /// class snapshots.
    pub fn record_shape(&self, name: &str) -> Option<&FieldList> {
        self.records
            .get(name)
            .or_else(|| self.classes.get(name).map(|c| c.state_fields()))
    }

    pub fn records(&self) -> impl Iterator<Item = (&String, &FieldList)> {
        self.records.iter()
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceDescriptor> {
        self.interfaces.values()
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDescriptor> {
        self.classes.values()
    }
}

/// Where in a value a type mismatch was found, e.g. `$.v[2].name`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at {path}: expected {expected}, found {found}")]
pub struct Mismatch {
    pub path: String,
    pub expected: String,
    pub found: String,
}

/// Structural conformance of `v` to `t`.
///
/// Null conforms to any record or interface type. A reference conforms to
/// `Interface(n)` iff its interface name is `n`. A record conforms to
/// `Interface(n)` when it is the snapshot of a class compatible with `n`.
pub fn type_check(v: &Value, t: &TypeRef, env: &TypeEnvironment) -> Result<(), Mismatch> {
    check_at(v, t, env, &mut String::from("$"))
}

fn mismatch(path: &str, expected: impl ToString, found: impl ToString) -> Mismatch {
    Mismatch {
        path: path.to_string(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

fn check_at(
    v: &Value,
    t: &TypeRef,
    env: &TypeEnvironment,
    path: &mut String,
) -> Result<(), Mismatch> {
    match (t, v) {
        (TypeRef::Null, Value::Null)
        | (TypeRef::Bool, Value::Bool(_))
        | (TypeRef::Int, Value::Int(_))
        | (TypeRef::Float, Value::Float(_))
        | (TypeRef::Str, Value::Str(_))
        | (TypeRef::Record(_), Value::Null)
        | (TypeRef::Interface(_), Value::Null) => Ok(()),
        (TypeRef::ListOf(elem), Value::List(items)) => {
            for (i, item) in items.iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("[{i}]"));
                check_at(item, elem, env, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        (TypeRef::Record(name), Value::Record(rec)) => {
            if rec.type_name() != name {
                return Err(mismatch(
                    path,
                    format!("record {name}"),
                    format!("record {}", rec.type_name()),
                ));
            }
            let shape = env.record_shape(name).ok_or_else(|| {
                mismatch(path, format!("record {name}"), "unresolved record type")
            })?;
            check_fields(rec, shape, env, path)
        }
        (TypeRef::Interface(name), Value::Ref(ior)) => {
            if ior.interface() == name {
                Ok(())
            } else {
                Err(mismatch(
                    path,
                    format!("interface {name}"),
                    format!("ref to {}", ior.interface()),
                ))
            }
        }
        (TypeRef::Interface(name), Value::Record(rec)) => {
            let class = env.class(rec.type_name()).ok_or_else(|| {
                mismatch(
                    path,
                    format!("interface {name}"),
                    format!("record {}", rec.type_name()),
                )
            })?;
            let iface = env.interface(name).ok_or_else(|| {
                mismatch(path, format!("interface {name}"), "unresolved interface")
            })?;
            if crate::iface::check_compat(class, iface).is_err() {
                return Err(mismatch(
                    path,
                    format!("interface {name}"),
                    format!("snapshot of incompatible class {}", class.name()),
                ));
            }
            check_fields(rec, class.state_fields(), env, path)
        }
        (t, v) => Err(mismatch(path, t, v.tag())),
    }
}

fn check_fields(
    rec: &Record,
    shape: &FieldList,
    env: &TypeEnvironment,
    path: &mut String,
) -> Result<(), Mismatch> {
    if rec.fields().len() != shape.len() {
        return Err(mismatch(
            path,
            format!("{} fields", shape.len()),
            format!("{} fields", rec.fields().len()),
        ));
    }
    for ((name, value), (want, ty)) in rec.fields().iter().zip(shape) {
        if name != want {
            return Err(mismatch(
                path,
                format!("field {want}"),
                format!("field {name}"),
            ));
        }
        let len = path.len();
        path.push('.');
        path.push_str(name);
        check_at(value, ty, env, path)?;
        path.truncate(len);
    }
    Ok(())
}
