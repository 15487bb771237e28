//! A node: one runtime per address space, serving deployed components over
//! HTTP and acting as the client for proxies it hands out.

mod client;
mod marshal;
mod server;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::RwLock;

pub use client::{CallOptions, Proxy};
pub use marshal::PolicyCtx;
pub use server::{HttpRequest, HttpResponse};

use crate::component::{Class, Component, Datum};
use crate::error::{Error, Result};
use crate::iface::{check_closure, check_compat, ClassDescriptor, InterfaceDescriptor};
use crate::policy::PolicyStore;
use crate::registry::{Registry, RegistryError};
use crate::value::{FieldList, Ior, TypeEnvironment};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub host: String,
    /// 0 binds an ephemeral port; the bound port becomes the node identity.
    pub port: u16,
    pub env: TypeEnvironment,
}

impl NodeConfig {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        NodeConfig {
            host: host.into(),
            port,
            env: TypeEnvironment::new(),
        }
    }

    pub fn with_env(mut self, env: TypeEnvironment) -> Self {
        self.env = env;
        self
    }
}

type Constructor = Arc<dyn Fn(Vec<(String, Datum)>) -> Result<Component> + Send + Sync>;

pub(crate) struct NodeShared {
    host: String,
    port: u16,
    env: RwLock<TypeEnvironment>,
    policy: PolicyStore,
    registry: Registry,
    constructors: RwLock<HashMap<String, Constructor>>,
    agent: ureq::Agent,
}

/// Runtime instance owning the name, object and proxy tables, the type
/// environment and the policy store. Dropping it stops the HTTP server.
pub struct Node {
    shared: Arc<NodeShared>,
    server: Option<server::ServerHandle>,
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Node({}:{})", self.shared.host, self.shared.port)
    }
}

impl Node {
    /// Binds `host:port` and starts serving.
    pub fn start(config: NodeConfig) -> Result<Node> {
        let listener = server::bind(&config.host, config.port)?;
        let port = listener.port();
        let shared = Arc::new(NodeShared::new(config.host, port, config.env));
        let handle = server::spawn(listener, Arc::downgrade(&shared));
        Ok(Node {
            shared,
            server: Some(handle),
        })
    }

    /// A node that owns tables and can act as a client but listens nowhere.
    /// Requests can still be fed to [`Node::handle_request`] directly.
    pub fn detached(host: impl Into<String>, port: u16, env: TypeEnvironment) -> Node {
        Node {
            shared: Arc::new(NodeShared::new(host.into(), port, env)),
            server: None,
        }
    }

    pub fn host(&self) -> &str {
        &self.shared.host
    }

    pub fn port(&self) -> u16 {
        self.shared.port
    }

    pub fn base_url(&self) -> String {
        client::base_url(&self.shared.host, self.shared.port)
    }

    pub fn policy(&self) -> &PolicyStore {
        &self.shared.policy
    }

    pub fn registry(&self) -> &Registry {
        &self.shared.registry
    }

    pub fn env(&self) -> TypeEnvironment {
        self.shared.env.read().clone()
    }

    pub fn register_interface(&self, iface: InterfaceDescriptor) -> Result<()> {
        self.shared
            .env
            .write()
            .add_interface(iface)
            .map_err(|e| Error::Definition(e.to_string()))
    }

    pub fn register_record(&self, name: &str, fields: FieldList) -> Result<()> {
        self.shared
            .env
            .write()
            .add_record(name, fields)
            .map_err(|e| Error::Definition(e.to_string()))
    }

    /// Makes the class known to this node's type environment and, if it has
    /// a constructor, lets by-value copies of it arrive as live components.
    pub fn register_class<T: Send + Sync + 'static>(&self, class: &Arc<Class<T>>) -> Result<()> {
        self.shared.register_class_descriptor(class.descriptor())?;
        if class.has_constructor() {
            let class = Arc::clone(class);
            self.shared.constructors.write().insert(
                class.descriptor().name().to_string(),
                Arc::new(move |f| class.construct(f)),
            );
        }
        Ok(())
    }

    /// Exposes `component` under `iface` at `http://host:port/<name>`.
    pub fn deploy(
        &self,
        iface: &InterfaceDescriptor,
        component: &Component,
        name: &str,
    ) -> Result<String> {
        crate::registry::validate_name(name).map_err(registry_error)?;
        let dep = self.shared.prepare_deployment(iface, component)?;
        self.shared
            .registry
            .bind_name(name, &dep)
            .map_err(registry_error)?;
        Ok(format!("{}/{}", self.base_url(), name))
    }

    /// Deployment without a name, addressable only through its IOR.
    pub fn deploy_anonymous(
        &self,
        iface: &InterfaceDescriptor,
        component: &Component,
    ) -> Result<Ior> {
        self.shared.export(iface.name(), Some(iface), component)
    }

    /// Binds another name to an existing deployment of `component`.
    pub fn bind_name(
        &self,
        name: &str,
        iface: &InterfaceDescriptor,
        component: &Component,
    ) -> Result<()> {
        let dep = self.shared.prepare_deployment(iface, component)?;
        self.shared
            .registry
            .bind_name(name, &dep)
            .map_err(registry_error)
    }

    pub fn handle_request(&self, req: &HttpRequest) -> HttpResponse {
        server::handle_request(&self.shared, req)
    }

    pub fn marshal_outbound(
        &self,
        datum: &Datum,
        declared: &crate::value::TypeRef,
        ctx: &PolicyCtx<'_>,
    ) -> Result<crate::value::Value> {
        marshal::marshal_outbound(&self.shared, datum, declared, ctx)
    }

    /// Turns a received value into local data: references to this node
    /// become the original components, other references become interned
    /// proxies, and by-value copies of constructible classes become fresh
    /// components.
    pub fn materialize(&self, v: &crate::value::Value) -> Result<Datum> {
        marshal::materialize(&self.shared, v)
    }

    /// Fetches the remote deployment's descriptor and IOR and returns the
    /// interned proxy for it.
    pub fn get_component_by_name(&self, name: &str, host: &str, port: u16) -> Result<Proxy> {
        client::get_component_by_name(&self.shared, name, host, port, DEFAULT_TIMEOUT)
    }

    /// Stops serving HTTP. Tables stay usable.
    pub fn shutdown(&mut self) {
        self.server.take();
    }
}

fn registry_error(e: RegistryError) -> Error {
    match e {
        RegistryError::NameInUse(n) => Error::NameInUse(n),
        RegistryError::InvalidName(n) => Error::InvalidName(n),
    }
}

impl NodeShared {
    fn new(host: String, port: u16, env: TypeEnvironment) -> Self {
        NodeShared {
            host,
            port,
            env: RwLock::new(env),
            policy: PolicyStore::new(),
            registry: Registry::new(),
            constructors: RwLock::new(HashMap::new()),
            agent: ureq::AgentBuilder::new().build(),
        }
    }

    fn register_class_descriptor(&self, desc: &ClassDescriptor) -> Result<()> {
        let mut env = self.env.write();
        if env.class(desc.name()) == Some(desc) {
            return Ok(());
        }
        env.add_class(desc.clone())
            .map_err(|e| Error::Definition(e.to_string()))
    }

    /// Deploy-time checks followed by get-or-create of the deployment.
    fn prepare_deployment(
        &self,
        iface: &InterfaceDescriptor,
        component: &Component,
    ) -> Result<Arc<crate::registry::Deployment>> {
        let class = component.class();
        if let Err(missing) = check_compat(class, iface) {
            return Err(Error::IncompatibleComponent {
                class: class.name().to_string(),
                interface: iface.name().to_string(),
                missing,
            });
        }
        let shared_iface = {
            let env = self.env.read();
            if let Some(existing) = env.interface(iface.name()) {
                if existing != iface {
                    return Err(Error::Definition(format!(
                        "interface `{}` differs from the one already known to this node",
                        iface.name()
                    )));
                }
            }
            check_closure(iface, &env).map_err(Error::NonInterfaceSignature)?;
            Arc::new(iface.clone())
        };
        self.register_class_descriptor(class)?;
        {
            let mut env = self.env.write();
            if env.interface(iface.name()).is_none() {
                env.add_interface(iface.clone())
                    .map_err(|e| Error::Definition(e.to_string()))?;
            }
        }
        Ok(self.registry.deployment_for(component, &shared_iface))
    }

    /// IOR for `component` under the named interface, deploying it
    /// anonymously on first use.
    fn export(
        &self,
        iface_name: &str,
        given: Option<&InterfaceDescriptor>,
        component: &Component,
    ) -> Result<Ior> {
        let iface = match given {
            Some(i) => i.clone(),
            None => self
                .env
                .read()
                .interface(iface_name)
                .cloned()
                .ok_or_else(|| Error::UnknownInterface(iface_name.to_string()))?,
        };
        let dep = self.prepare_deployment(&iface, component)?;
        let n = self.registry.assign_number(&dep);
        Ior::new(&self.host, u64::from(self.port), n, iface.name())
            .map_err(|e| Error::internal(e.to_string()))
    }

    fn is_local(&self, ior: &Ior) -> bool {
        ior.host() == self.host && ior.port() == self.port
    }
}
