//! Transmission policies: whether a component crosses the wire as a copy of
//! its state or as a remote reference.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use parking_lot::RwLock;

pub use crate::iface::SigPosition as Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransmissionPolicy {
    ByValue,
    ByReference,
}

impl TransmissionPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TransmissionPolicy::ByValue => "BY_VALUE",
            TransmissionPolicy::ByReference => "BY_REFERENCE",
        }
    }
}

impl fmt::Display for TransmissionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransmissionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BY_VALUE" => Ok(TransmissionPolicy::ByValue),
            "BY_REFERENCE" => Ok(TransmissionPolicy::ByReference),
            other => Err(format!("unknown transmission policy `{other}`")),
        }
    }
}

/// Policies for a single invocation. They outrank everything stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallOverride {
    pub per_param: BTreeMap<usize, TransmissionPolicy>,
    pub for_return: Option<TransmissionPolicy>,
    pub whole_call: Option<TransmissionPolicy>,
}

impl CallOverride {
    pub fn whole(p: TransmissionPolicy) -> Self {
        CallOverride {
            whole_call: Some(p),
            ..Default::default()
        }
    }

    pub fn param(mut self, index: usize, p: TransmissionPolicy) -> Self {
        self.per_param.insert(index, p);
        self
    }

    pub fn returning(mut self, p: TransmissionPolicy) -> Self {
        self.for_return = Some(p);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.per_param.is_empty() && self.for_return.is_none() && self.whole_call.is_none()
    }

    /// The policy this override imposes on the return position, if any.
    pub fn return_policy(&self) -> Option<TransmissionPolicy> {
        self.for_return.or(self.whole_call)
    }
}

type MethodKey = (String, String);

#[derive(Debug, Clone)]
struct Tables {
    class: HashMap<String, TransmissionPolicy>,
    method: HashMap<MethodKey, TransmissionPolicy>,
    param: HashMap<(String, String, usize), TransmissionPolicy>,
    ret: HashMap<MethodKey, TransmissionPolicy>,
    default: TransmissionPolicy,
}

/// Stored policies at class, method, parameter and return scopes, plus the
/// system default (initially by value).
#[derive(Debug)]
pub struct PolicyStore {
    tables: RwLock<Tables>,
}

impl Default for PolicyStore {
    fn default() -> Self {
        PolicyStore {
            tables: RwLock::new(Tables {
                class: HashMap::new(),
                method: HashMap::new(),
                param: HashMap::new(),
                ret: HashMap::new(),
                default: TransmissionPolicy::ByValue,
            }),
        }
    }
}

fn key(iface: &str, method: &str) -> MethodKey {
    (iface.to_string(), method.to_string())
}

impl PolicyStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keyed on the runtime class of the transmitted component.
    pub fn set_class_policy(&self, class: &str, p: TransmissionPolicy) {
        self.tables.write().class.insert(class.to_string(), p);
    }

    /// Keyed on the deployed interface and method.
    pub fn set_method_policy(&self, iface: &str, method: &str, p: TransmissionPolicy) {
        self.tables.write().method.insert(key(iface, method), p);
    }

    pub fn set_param_policy(&self, iface: &str, method: &str, index: usize, p: TransmissionPolicy) {
        self.tables
            .write()
            .param
            .insert((iface.to_string(), method.to_string(), index), p);
    }

    pub fn set_return_policy(&self, iface: &str, method: &str, p: TransmissionPolicy) {
        self.tables.write().ret.insert(key(iface, method), p);
    }

    pub fn set_default(&self, p: TransmissionPolicy) {
        self.tables.write().default = p;
    }

    pub fn default_policy(&self) -> TransmissionPolicy {
        self.tables.read().default
    }

    /// First defined policy in order: per-position override, whole-call
    /// override, stored parameter/return policy, method policy, class policy,
    /// system default.
    pub fn resolve(
        &self,
        position: Position,
        iface: &str,
        method: &str,
        runtime_class: Option<&str>,
        over: &CallOverride,
    ) -> TransmissionPolicy {
        let at_position = match position {
            Position::Param(i) => over.per_param.get(&i).copied(),
            Position::Return => over.for_return,
        };
        if let Some(p) = at_position.or(over.whole_call) {
            return p;
        }
        let t = self.tables.read();
        let stored = match position {
            Position::Param(i) => t.param.get(&(iface.to_string(), method.to_string(), i)),
            Position::Return => t.ret.get(&key(iface, method)),
        };
        stored
            .or_else(|| t.method.get(&key(iface, method)))
            .or_else(|| runtime_class.and_then(|c| t.class.get(c)))
            .copied()
            .unwrap_or(t.default)
    }

    /// Human-readable listing of every stored policy, sorted.
    pub fn dump(&self) -> Vec<String> {
        let t = self.tables.read();
        let mut lines: Vec<String> = Vec::new();
        lines.extend(t.class.iter().map(|(c, p)| format!("class {c} = {p}")));
        lines.extend(
            t.method
                .iter()
                .map(|((i, m), p)| format!("method {i}.{m} = {p}")),
        );
        lines.extend(
            t.param
                .iter()
                .map(|((i, m, n), p)| format!("param {i}.{m}[{n}] = {p}")),
        );
        lines.extend(
            t.ret
                .iter()
                .map(|((i, m), p)| format!("return {i}.{m} = {p}")),
        );
        lines.sort();
        lines.push(format!("default = {}", t.default));
        lines
    }
}
