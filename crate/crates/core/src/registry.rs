//! Per-node tables: names, object numbers, component identities, and the
//! proxy intern table.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use thiserror::Error;

use crate::component::Component;
use crate::iface::{InterfaceDescriptor, MethodSig};
use crate::node::Proxy;
use crate::value::Ior;
use crate::wire::ListingEntry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("name `{0}` is already bound to another deployment")]
    NameInUse(String),
    #[error("invalid deployment name `{0}`")]
    InvalidName(String),
}

/// Memoized dispatch structure for one (class, interface) pair: which
/// signatures the endpoint accepts.
#[derive(Debug)]
pub struct Skeleton {
    methods: HashMap<String, MethodSig>,
}

impl Skeleton {
    pub fn method(&self, name: &str) -> Option<&MethodSig> {
        self.methods.get(name)
    }

    pub fn method_names(&self) -> BTreeSet<&str> {
        self.methods.keys().map(String::as_str).collect()
    }
}

/// One component bound to one interface on this node.
#[derive(Debug)]
pub struct Deployment {
    component: Component,
    iface: Arc<InterfaceDescriptor>,
    skeleton: Arc<Skeleton>,
    object_number: OnceLock<u64>,
}

impl Deployment {
    pub fn component(&self) -> &Component {
        &self.component
    }

    pub fn interface(&self) -> &Arc<InterfaceDescriptor> {
        &self.iface
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        &self.skeleton
    }

    /// Assigned lazily; `None` until first exported by reference.
    pub fn object_number(&self) -> Option<u64> {
        self.object_number.get().copied()
    }
}

#[derive(Default)]
struct Tables {
    by_identity: HashMap<(u64, String), Arc<Deployment>>,
    order: Vec<Arc<Deployment>>,
    names: HashMap<String, Arc<Deployment>>,
    objects: HashMap<u64, Arc<Deployment>>,
    next_number: u64,
    skeletons: HashMap<(String, String), Arc<Skeleton>>,
    proxies: HashMap<Ior, Proxy>,
}

/// All tables sit behind one lock so check-then-assign steps are atomic.
#[derive(Default)]
pub struct Registry {
    tables: RwLock<Tables>,
}

pub fn validate_name(name: &str) -> Result<(), RegistryError> {
    let bad = name.is_empty()
        || name
            .chars()
            .any(|c| matches!(c, '/' | '?' | '#' | '%') || c.is_whitespace() || c.is_control());
    if bad {
        Err(RegistryError::InvalidName(name.to_string()))
    } else {
        Ok(())
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The deployment for (component identity, interface), created on first
    /// request. Compatibility must already have been checked.
    pub fn deployment_for(
        &self,
        component: &Component,
        iface: &Arc<InterfaceDescriptor>,
    ) -> Arc<Deployment> {
        let key = (component.identity(), iface.name().to_string());
        if let Some(d) = self.tables.read().by_identity.get(&key) {
            return Arc::clone(d);
        }
        let mut t = self.tables.write();
        if let Some(d) = t.by_identity.get(&key) {
            return Arc::clone(d);
        }
        let skel_key = (
            component.class().name().to_string(),
            iface.name().to_string(),
        );
        let skeleton = Arc::clone(t.skeletons.entry(skel_key).or_insert_with(|| {
            Arc::new(Skeleton {
                methods: iface
                    .methods()
                    .iter()
                    .map(|m| (m.name.clone(), m.clone()))
                    .collect(),
            })
        }));
        let dep = Arc::new(Deployment {
            component: component.clone(),
            iface: Arc::clone(iface),
            skeleton,
            object_number: OnceLock::new(),
        });
        t.by_identity.insert(key, Arc::clone(&dep));
        t.order.push(Arc::clone(&dep));
        dep
    }

    /// Idempotent for the same deployment; a name belongs to one deployment.
    pub fn bind_name(&self, name: &str, dep: &Arc<Deployment>) -> Result<(), RegistryError> {
        validate_name(name)?;
        let mut t = self.tables.write();
        match t.names.get(name) {
            Some(existing) if Arc::ptr_eq(existing, dep) => Ok(()),
            Some(_) => Err(RegistryError::NameInUse(name.to_string())),
            None => {
                t.names.insert(name.to_string(), Arc::clone(dep));
                Ok(())
            }
        }
    }

    pub fn lookup_name(&self, name: &str) -> Option<Arc<Deployment>> {
        self.tables.read().names.get(name).cloned()
    }

    /// The deployment's object number, assigning the next free one on first
    /// use.
    pub fn assign_number(&self, dep: &Arc<Deployment>) -> u64 {
        if let Some(n) = dep.object_number() {
            return n;
        }
        let mut t = self.tables.write();
        if let Some(n) = dep.object_number() {
            return n;
        }
        let n = t.next_number;
        t.next_number += 1;
        dep.object_number
            .set(n)
            .expect("number assigned under the table lock");
        t.objects.insert(n, Arc::clone(dep));
        n
    }

    /// Lazy, idempotent anonymous deployment returning the component's IOR.
    pub fn export_ref(
        &self,
        component: &Component,
        iface: &Arc<InterfaceDescriptor>,
        host: &str,
        port: u16,
    ) -> Ior {
        let dep = self.deployment_for(component, iface);
        let n = self.assign_number(&dep);
        Ior::new(host, u64::from(port), n, iface.name())
            .expect("node identity is a valid ior host/port")
    }

    pub fn resolve(&self, object_number: u64) -> Option<Arc<Deployment>> {
        self.tables.read().objects.get(&object_number).cloned()
    }

    /// Number of entries in the object table.
    pub fn object_count(&self) -> usize {
        self.tables.read().objects.len()
    }

    pub fn deployment_count(&self) -> usize {
        self.tables.read().order.len()
    }

    /// One proxy per distinct IOR.
    pub fn intern_proxy<F>(&self, ior: &Ior, make: F) -> Proxy
    where
        F: FnOnce() -> Proxy,
    {
        if let Some(p) = self.tables.read().proxies.get(ior) {
            return p.clone();
        }
        let mut t = self.tables.write();
        t.proxies.entry(ior.clone()).or_insert_with(make).clone()
    }

    pub fn proxy_count(&self) -> usize {
        self.tables.read().proxies.len()
    }

    /// Deployments that are reachable over HTTP (named or numbered), sorted
    /// by first name then object number.
    pub fn listing(&self) -> Vec<ListingEntry> {
        let t = self.tables.read();
        let mut rows: Vec<ListingEntry> = t
            .order
            .iter()
            .filter_map(|dep| {
                let mut names: Vec<String> = t
                    .names
                    .iter()
                    .filter(|(_, d)| Arc::ptr_eq(d, dep))
                    .map(|(n, _)| n.clone())
                    .collect();
                names.sort();
                let object_number = dep.object_number();
                if names.is_empty() && object_number.is_none() {
                    return None;
                }
                Some(ListingEntry {
                    names,
                    object_number,
                    interface: dep.iface.name().to_string(),
                })
            })
            .collect();
        rows.sort_by(|a, b| {
            let ka = (
                a.names.is_empty(),
                a.names.first().cloned(),
                a.object_number,
            );
            let kb = (
                b.names.is_empty(),
                b.names.first().cloned(),
                b.object_number,
            );
            ka.cmp(&kb)
        });
        rows
    }
}
