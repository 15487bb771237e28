//! Live component instances, their class skeletons, and the local datum
//! type that component methods consume and produce.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use crate::error::{Error, Result};
use crate::iface::ClassDescriptor;
use crate::node::Proxy;
use crate::value::{Finite, Record, Value};

/// A value as seen by application code: like [`Value`], except that
/// references are live objects (local components or proxies).
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Null,
    Bool(bool),
    Int(i64),
    Float(Finite),
    Str(String),
    List(Vec<Datum>),
    Record(Record<Datum>),
    Object(ObjRef),
}

impl Datum {
    pub fn float(f: f64) -> Result<Datum> {
        Finite::new(f)
            .map(Datum::Float)
            .map_err(|e| Error::type_mismatch(e.to_string()))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Datum::Null => "null",
            Datum::Bool(_) => "bool",
            Datum::Int(_) => "i64",
            Datum::Float(_) => "f64",
            Datum::Str(_) => "str",
            Datum::List(_) => "list",
            Datum::Record(_) => "rec",
            Datum::Object(_) => "object",
        }
    }

    fn wrong(&self, want: &str) -> Error {
        Error::type_mismatch(format!("expected {want}, found {}", self.tag()))
    }

    pub fn expect_int(&self) -> Result<i64> {
        match self {
            Datum::Int(i) => Ok(*i),
            other => Err(other.wrong("i64")),
        }
    }

    pub fn expect_bool(&self) -> Result<bool> {
        match self {
            Datum::Bool(b) => Ok(*b),
            other => Err(other.wrong("bool")),
        }
    }

    pub fn expect_float(&self) -> Result<f64> {
        match self {
            Datum::Float(f) => Ok(f.get()),
            other => Err(other.wrong("f64")),
        }
    }

    pub fn expect_str(&self) -> Result<&str> {
        match self {
            Datum::Str(s) => Ok(s),
            other => Err(other.wrong("str")),
        }
    }

    pub fn expect_object(&self) -> Result<&ObjRef> {
        match self {
            Datum::Object(o) => Ok(o),
            other => Err(other.wrong("object")),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Datum::Null)
    }

    /// Lifts a reference-free value. `Ref`s need a node to materialize and
    /// are rejected here.
    pub fn from_plain(v: &Value) -> Result<Datum> {
        Ok(match v {
            Value::Null => Datum::Null,
            Value::Bool(b) => Datum::Bool(*b),
            Value::Int(i) => Datum::Int(*i),
            Value::Float(f) => Datum::Float(*f),
            Value::Str(s) => Datum::Str(s.clone()),
            Value::List(items) => {
                Datum::List(items.iter().map(Datum::from_plain).collect::<Result<_>>()?)
            }
            Value::Record(r) => {
                let fields = r
                    .fields()
                    .iter()
                    .map(|(n, fv)| Ok((n.clone(), Datum::from_plain(fv)?)))
                    .collect::<Result<Vec<_>>>()?;
                Datum::Record(Record::new(r.type_name(), fields).expect("fields already validated"))
            }
            Value::Ref(ior) => {
                return Err(Error::type_mismatch(format!("unexpected reference {ior}")))
            }
        })
    }
}

impl From<i64> for Datum {
    fn from(i: i64) -> Self {
        Datum::Int(i)
    }
}

impl From<bool> for Datum {
    fn from(b: bool) -> Self {
        Datum::Bool(b)
    }
}

impl From<&str> for Datum {
    fn from(s: &str) -> Self {
        Datum::Str(s.to_string())
    }
}

impl From<String> for Datum {
    fn from(s: String) -> Self {
        Datum::Str(s)
    }
}

impl From<Component> for Datum {
    fn from(c: Component) -> Self {
        Datum::Object(ObjRef::Local(c))
    }
}

impl From<Proxy> for Datum {
    fn from(p: Proxy) -> Self {
        Datum::Object(ObjRef::Remote(p))
    }
}

impl From<ObjRef> for Datum {
    fn from(o: ObjRef) -> Self {
        Datum::Object(o)
    }
}

/// Either a component in this address space or a proxy for one elsewhere.
/// Callers invoke both the same way.
#[derive(Debug, Clone)]
pub enum ObjRef {
    Local(Component),
    Remote(Proxy),
}

impl ObjRef {
    pub fn invoke(&self, method: &str, args: Vec<Datum>) -> Result<Datum> {
        match self {
            ObjRef::Local(c) => c.invoke(method, args),
            ObjRef::Remote(p) => p.invoke(method, args),
        }
    }

    /// Proxies honor `opts`; local calls have no transmission to configure.
    pub fn invoke_with(
        &self,
        method: &str,
        args: Vec<Datum>,
        opts: &crate::node::CallOptions,
    ) -> Result<Datum> {
        match self {
            ObjRef::Local(c) => c.invoke(method, args),
            ObjRef::Remote(p) => p.invoke_with(method, args, opts),
        }
    }

    /// Class name of a local component. Proxies have none.
    pub fn runtime_class(&self) -> Option<&str> {
        match self {
            ObjRef::Local(c) => Some(c.class().name()),
            ObjRef::Remote(_) => None,
        }
    }

    pub fn as_local(&self) -> Option<&Component> {
        match self {
            ObjRef::Local(c) => Some(c),
            ObjRef::Remote(_) => None,
        }
    }

    pub fn as_proxy(&self) -> Option<&Proxy> {
        match self {
            ObjRef::Remote(p) => Some(p),
            ObjRef::Local(_) => None,
        }
    }
}

impl PartialEq for ObjRef {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ObjRef::Local(a), ObjRef::Local(b)) => a.same_identity(b),
            (ObjRef::Remote(a), ObjRef::Remote(b)) => a.same_identity(b),
            _ => false,
        }
    }
}

type SharedFn<T> = Box<dyn Fn(&T, Vec<Datum>) -> Result<Datum> + Send + Sync>;
type ExclusiveFn<T> = Box<dyn Fn(&mut T, Vec<Datum>) -> Result<Datum> + Send + Sync>;
type SnapshotFn<T> = Box<dyn Fn(&T) -> Vec<(String, Datum)> + Send + Sync>;
type ConstructorFn<T> = Box<dyn Fn(Vec<(String, Datum)>) -> Result<T> + Send + Sync>;

enum Handler<T> {
    Shared(SharedFn<T>),
    Exclusive(ExclusiveFn<T>),
}

/// Dispatch table for one component class: a handler per method, a state
/// snapshot, and an optional constructor used when a by-value copy arrives.
pub struct Class<T> {
    desc: Arc<ClassDescriptor>,
    handlers: HashMap<String, Handler<T>>,
    snapshot: SnapshotFn<T>,
    constructor: Option<ConstructorFn<T>>,
}

impl<T> fmt::Debug for Class<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Class")
            .field("name", &self.desc.name())
            .finish_non_exhaustive()
    }
}

pub struct ClassBuilder<T> {
    desc: ClassDescriptor,
    handlers: HashMap<String, Handler<T>>,
    snapshot: Option<SnapshotFn<T>>,
    constructor: Option<ConstructorFn<T>>,
}

impl<T: Send + Sync + 'static> Class<T> {
    pub fn builder(desc: ClassDescriptor) -> ClassBuilder<T> {
        ClassBuilder {
            desc,
            handlers: HashMap::new(),
            snapshot: None,
            constructor: None,
        }
    }

    pub fn descriptor(&self) -> &Arc<ClassDescriptor> {
        &self.desc
    }

    pub fn has_constructor(&self) -> bool {
        self.constructor.is_some()
    }

    pub fn construct(self: &Arc<Self>, fields: Vec<(String, Datum)>) -> Result<Component> {
        let ctor = self.constructor.as_ref().ok_or_else(|| {
            Error::internal(format!("class `{}` has no constructor", self.desc.name()))
        })?;
        Ok(self.instantiate(ctor(fields)?))
    }

    /// A component whose invocations are serialized.
    pub fn instantiate(self: &Arc<Self>, state: T) -> Component {
        Component::wrap(Instance {
            class: Arc::clone(self),
            state: RwLock::new(state),
            call_lock: Some(Mutex::new(())),
        })
    }

    /// A component without the per-component call lock: read-only methods
    /// run in parallel, mutating methods still exclude each other.
    pub fn instantiate_concurrent(self: &Arc<Self>, state: T) -> Component {
        Component::wrap(Instance {
            class: Arc::clone(self),
            state: RwLock::new(state),
            call_lock: None,
        })
    }
}

impl<T: Send + Sync + 'static> ClassBuilder<T> {
    /// Registers a method that reads component state.
    pub fn method<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(&T, Vec<Datum>) -> Result<Datum> + Send + Sync + 'static,
    {
        self.handlers
            .insert(name.to_string(), Handler::Shared(Box::new(f)));
        self
    }

    /// Registers a method that mutates component state.
    pub fn method_mut<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(&mut T, Vec<Datum>) -> Result<Datum> + Send + Sync + 'static,
    {
        self.handlers
            .insert(name.to_string(), Handler::Exclusive(Box::new(f)));
        self
    }

    pub fn snapshot<F>(mut self, f: F) -> Self
    where
        F: Fn(&T) -> Vec<(String, Datum)> + Send + Sync + 'static,
    {
        self.snapshot = Some(Box::new(f));
        self
    }

    pub fn constructor<F>(mut self, f: F) -> Self
    where
        F: Fn(Vec<(String, Datum)>) -> Result<T> + Send + Sync + 'static,
    {
        self.constructor = Some(Box::new(f));
        self
    }

    /// Fails unless handlers cover exactly the descriptor's methods and a
    /// snapshot exists for stateful classes.
    pub fn build(self) -> Result<Arc<Class<T>>> {
        self.desc
            .validate()
            .map_err(|e| Error::Definition(e.to_string()))?;
        for m in self.desc.methods() {
            if !self.handlers.contains_key(&m.name) {
                return Err(Error::Definition(format!(
                    "class `{}` declares `{}` without a handler",
                    self.desc.name(),
                    m.name
                )));
            }
        }
        if let Some(extra) = self.handlers.keys().find(|h| self.desc.method(h).is_none()) {
            return Err(Error::Definition(format!(
                "class `{}` has a handler for undeclared method `{extra}`",
                self.desc.name()
            )));
        }
        let snapshot = match self.snapshot {
            Some(s) => s,
            None if self.desc.state_fields().is_empty() => Box::new(|_: &T| Vec::new()),
            None => {
                return Err(Error::Definition(format!(
                    "class `{}` has state but no snapshot",
                    self.desc.name()
                )))
            }
        };
        Ok(Arc::new(Class {
            desc: Arc::new(self.desc),
            handlers: self.handlers,
            snapshot,
            constructor: self.constructor,
        }))
    }
}

trait Servant: Send + Sync {
    fn class(&self) -> &Arc<ClassDescriptor>;
    fn invoke(&self, method: &str, args: Vec<Datum>) -> Result<Datum>;
    fn snapshot(&self) -> Vec<(String, Datum)>;
}

struct Instance<T> {
    class: Arc<Class<T>>,
    state: RwLock<T>,
    call_lock: Option<Mutex<()>>,
}

impl<T: Send + Sync + 'static> Servant for Instance<T> {
    fn class(&self) -> &Arc<ClassDescriptor> {
        &self.class.desc
    }

    fn invoke(&self, method: &str, args: Vec<Datum>) -> Result<Datum> {
        let handler = self
            .class
            .handlers
            .get(method)
            .ok_or_else(|| Error::unknown_method(format!("no such method: {method}")))?;
        let _serial = self.call_lock.as_ref().map(|l| l.lock());
        match handler {
            Handler::Shared(f) => f(&self.state.read(), args),
            Handler::Exclusive(f) => f(&mut self.state.write(), args),
        }
    }

    fn snapshot(&self) -> Vec<(String, Datum)> {
        let _serial = self.call_lock.as_ref().map(|l| l.lock());
        (self.class.snapshot)(&self.state.read())
    }
}

static NEXT_IDENTITY: AtomicU64 = AtomicU64::new(1);

/// Handle to one live component instance. Clones share identity.
#[derive(Clone)]
pub struct Component {
    id: u64,
    servant: Arc<dyn Servant>,
}

impl Component {
    fn wrap<S: Servant + 'static>(servant: S) -> Component {
        Component {
            id: NEXT_IDENTITY.fetch_add(1, Ordering::Relaxed),
            servant: Arc::new(servant),
        }
    }

    /// Process-unique identity token.
    pub fn identity(&self) -> u64 {
        self.id
    }

    pub fn same_identity(&self, other: &Component) -> bool {
        self.id == other.id
    }

    pub fn class(&self) -> &Arc<ClassDescriptor> {
        self.servant.class()
    }

    /// Direct in-process invocation. No marshaling takes place, so
    /// components passed as arguments keep their identity.
    pub fn invoke(&self, method: &str, args: Vec<Datum>) -> Result<Datum> {
        let sig = self
            .class()
            .method(method)
            .ok_or_else(|| Error::unknown_method(format!("no such method: {method}")))?;
        if sig.params.len() != args.len() {
            return Err(Error::type_mismatch(format!(
                "{method} takes {} arguments, got {}",
                sig.params.len(),
                args.len()
            )));
        }
        self.servant.invoke(method, args)
    }

    /// State record named after the class.
    pub fn snapshot(&self) -> Record<Datum> {
        Record::new(self.class().name(), self.servant.snapshot())
            .unwrap_or_else(|e| panic!("snapshot of `{}` is malformed: {e}", self.class().name()))
    }
}

impl PartialEq for Component {
    fn eq(&self, other: &Self) -> bool {
        self.same_identity(other)
    }
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Component({}#{})", self.class().name(), self.id)
    }
}
