use std::fmt;
use std::io;
use std::sync::{Arc, Weak};
use std::time::Duration;

use crate::component::Datum;
use crate::error::{Error, Result};
use crate::iface::{Descriptor, InterfaceDescriptor};
use crate::policy::{CallOverride, Position};
use crate::value::{type_check, Ior, Value};
use crate::wire::{
    decode_reply, encode_call, CallEnvelope, ReplyEnvelope, CONTENT_TYPE, RESOLVE_METHOD,
    RETURN_POLICY_HEADER, SNAPSHOT_METHOD,
};

use super::marshal::{marshal_outbound, materialize, PolicyCtx};
use super::{NodeShared, DEFAULT_TIMEOUT};

#[derive(Debug, Clone)]
pub struct CallOptions {
    pub over: CallOverride,
    pub timeout: Duration,
}

impl Default for CallOptions {
    fn default() -> Self {
        CallOptions {
            over: CallOverride::default(),
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl CallOptions {
    pub fn with_override(over: CallOverride) -> Self {
        CallOptions {
            over,
            ..Default::default()
        }
    }
}

struct ProxyInner {
    ior: Ior,
    iface: InterfaceDescriptor,
    node: Weak<NodeShared>,
}

/// Local stand-in for a component on another node. Offers exactly the
/// methods of the interface it was deployed under.
#[derive(Clone)]
pub struct Proxy(Arc<ProxyInner>);

impl fmt::Debug for Proxy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Proxy({})", self.0.ior)
    }
}

pub(crate) fn base_url(host: &str, port: u16) -> String {
    if host.contains(':') {
        format!("http://[{host}]:{port}")
    } else {
        format!("http://{host}:{port}")
    }
}

impl Proxy {
    pub fn ior(&self) -> &Ior {
        &self.0.ior
    }

    pub fn interface(&self) -> &InterfaceDescriptor {
        &self.0.iface
    }

    pub fn same_identity(&self, other: &Proxy) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn node(&self) -> Result<Arc<NodeShared>> {
        self.0
            .node
            .upgrade()
            .ok_or_else(|| Error::Network("owning node has shut down".into()))
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/obj/{}",
            base_url(self.0.ior.host(), self.0.ior.port()),
            self.0.ior.object_number()
        )
    }

    pub fn invoke(&self, method: &str, args: Vec<Datum>) -> Result<Datum> {
        self.invoke_with(method, args, &CallOptions::default())
    }

    /// Marshals arguments per the calling node's policies and `opts`,
    /// performs the remote call, and materializes the result.
    pub fn invoke_with(&self, method: &str, args: Vec<Datum>, opts: &CallOptions) -> Result<Datum> {
        let sig = self
            .0
            .iface
            .method(method)
            .ok_or_else(|| Error::unknown_method(format!("no such method: {method}")))?;
        if sig.params.len() != args.len() {
            return Err(Error::type_mismatch(format!(
                "{method} takes {} arguments, got {}",
                sig.params.len(),
                args.len()
            )));
        }
        let node = self.node()?;
        let wire_args = args
            .iter()
            .zip(&sig.params)
            .enumerate()
            .map(|(i, (arg, ty))| {
                let ctx = PolicyCtx {
                    iface: self.0.iface.name(),
                    method,
                    position: Position::Param(i),
                    over: &opts.over,
                };
                marshal_outbound(&node, arg, ty, &ctx)
            })
            .collect::<Result<Vec<_>>>()?;
        let call = CallEnvelope {
            method: method.to_string(),
            args: wire_args,
        };
        let header = opts
            .over
            .return_policy()
            .map(|p| (RETURN_POLICY_HEADER, p.as_str()));
        let result = call_remote(&node.agent, &self.endpoint(), &call, header, opts.timeout)?;
        {
            let env = node.env.read();
            type_check(&result, &sig.returns, &env)
                .map_err(|m| Error::type_mismatch(format!("reply {m}")))?;
        }
        materialize(&node, &result)
    }

    /// By-value copy of the remote component's state.
    pub(crate) fn fetch_snapshot(&self) -> Result<Value> {
        let node = self.node()?;
        let call = CallEnvelope {
            method: SNAPSHOT_METHOD.to_string(),
            args: vec![],
        };
        call_remote(&node.agent, &self.endpoint(), &call, None, DEFAULT_TIMEOUT)
    }
}

fn transport_error(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Status(code, _) => Error::Network(format!("HTTP status {code}")),
        ureq::Error::Transport(t) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<io::Error>())
                .is_some_and(|io| {
                    matches!(
                        io.kind(),
                        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock
                    )
                });
            if timed_out {
                Error::Timeout(t.to_string())
            } else {
                Error::Network(t.to_string())
            }
        }
    }
}

fn read_body(resp: ureq::Response) -> Result<String> {
    resp.into_string()
        .map_err(|e| Error::Network(e.to_string()))
}

/// POSTs a call envelope and unwraps the reply. Faults become
/// [`Error::Fault`].
pub(crate) fn call_remote(
    agent: &ureq::Agent,
    url: &str,
    call: &CallEnvelope,
    header: Option<(&str, &str)>,
    timeout: Duration,
) -> Result<Value> {
    let mut req = agent
        .post(url)
        .timeout(timeout)
        .set("Content-Type", CONTENT_TYPE);
    if let Some((k, v)) = header {
        req = req.set(k, v);
    }
    let resp = req
        .send_string(&encode_call(call))
        .map_err(transport_error)?;
    let body = read_body(resp)?;
    match decode_reply(&body).map_err(|e| Error::Network(format!("unreadable reply: {e}")))? {
        ReplyEnvelope::Result(v) => Ok(v),
        ReplyEnvelope::Fault(f) => Err(Error::Fault(f)),
    }
}

pub(crate) fn http_get(agent: &ureq::Agent, url: &str, timeout: Duration) -> Result<String> {
    let resp = agent
        .get(url)
        .timeout(timeout)
        .call()
        .map_err(transport_error)?;
    read_body(resp)
}

pub(crate) fn intern(node: &Arc<NodeShared>, ior: &Ior) -> Result<Proxy> {
    let iface = node
        .env
        .read()
        .interface(ior.interface())
        .cloned()
        .ok_or_else(|| Error::UnknownInterface(ior.interface().to_string()))?;
    Ok(node.registry.intern_proxy(ior, || {
        Proxy(Arc::new(ProxyInner {
            ior: ior.clone(),
            iface,
            node: Arc::downgrade(node),
        }))
    }))
}

pub(crate) fn get_component_by_name(
    node: &Arc<NodeShared>,
    name: &str,
    host: &str,
    port: u16,
    timeout: Duration,
) -> Result<Proxy> {
    let url = format!("{}/{}", base_url(host, port), name);
    let doc = http_get(&node.agent, &format!("{url}?wsdl"), timeout)?;
    if let Ok(ReplyEnvelope::Fault(f)) = decode_reply(&doc) {
        return Err(Error::Fault(f));
    }
    let remote = Descriptor::parse(&doc).map_err(|e| Error::Network(e.to_string()))?;
    let iface_name = remote.interface.name().to_string();
    {
        let env = node.env.read();
        let local = env
            .interface(&iface_name)
            .ok_or_else(|| Error::UnknownInterface(iface_name.clone()))?;
        if *local != remote.interface {
            return Err(Error::UnknownInterface(format!(
                "{iface_name} (remote definition differs from the local one)"
            )));
        }
    }
    let call = CallEnvelope {
        method: RESOLVE_METHOD.to_string(),
        args: vec![],
    };
    match call_remote(&node.agent, &url, &call, None, timeout)? {
        Value::Ref(ior) if ior.interface() == iface_name => intern(node, &ior),
        other => Err(Error::type_mismatch(format!(
            "name resolution returned {} instead of a reference to {iface_name}",
            other.tag()
        ))),
    }
}
