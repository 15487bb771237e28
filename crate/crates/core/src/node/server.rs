use std::io::Read;
use std::sync::{Arc, Weak};
use std::thread::{self, JoinHandle};

use crate::component::Datum;
use crate::error::{Error, Result};
use crate::iface::describe;
use crate::policy::{CallOverride, Position};
use crate::registry::Deployment;
use crate::value::{type_check, Value};
use crate::wire::{
    decode_call, encode_listing, encode_reply, Fault, FaultCode, ReplyEnvelope, CONTENT_TYPE,
    RESOLVE_METHOD, RETURN_POLICY_HEADER, SNAPSHOT_METHOD,
};

use super::marshal::{marshal_outbound, materialize, snapshot_value, PolicyCtx};
use super::NodeShared;

/// Largest request body accepted.
const MAX_BODY: u64 = 16 * 1024 * 1024;

/// Transport-independent view of one HTTP request.
#[derive(Debug, Clone, Default)]
pub struct HttpRequest {
    pub method: String,
    /// Path plus optional query, e.g. `/bob?wsdl`.
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpRequest {
    pub fn get(url: &str) -> Self {
        HttpRequest {
            method: "GET".into(),
            url: url.into(),
            ..Default::default()
        }
    }

    pub fn post(url: &str, body: impl Into<Vec<u8>>) -> Self {
        HttpRequest {
            method: "POST".into(),
            url: url.into(),
            body: body.into(),
            ..Default::default()
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: String,
}

impl HttpResponse {
    fn json(body: String) -> Self {
        HttpResponse {
            status: 200,
            content_type: CONTENT_TYPE,
            body,
        }
    }

    fn fault(code: FaultCode, message: impl Into<String>) -> Self {
        Self::json(encode_reply(&ReplyEnvelope::Fault(Fault::new(
            code, message,
        ))))
    }

    fn bad_request(message: &str) -> Self {
        HttpResponse {
            status: 400,
            content_type: "text/plain; charset=utf-8",
            body: message.to_string(),
        }
    }
}

enum Target<'a> {
    Name(&'a str),
    Object(u64),
    Invalid,
}

fn parse_target(path: &str) -> Target<'_> {
    let Some(rest) = path.strip_prefix('/') else {
        return Target::Invalid;
    };
    if let Some(num) = rest.strip_prefix("obj/") {
        if !num.is_empty() && num.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(n) = num.parse() {
                return Target::Object(n);
            }
        }
        return Target::Invalid;
    }
    if rest.is_empty() || rest.contains('/') {
        Target::Invalid
    } else {
        Target::Name(rest)
    }
}

fn lookup(
    node: &Arc<NodeShared>,
    path: &str,
) -> std::result::Result<Arc<Deployment>, HttpResponse> {
    let found = match parse_target(path) {
        Target::Name(n) => node.registry.lookup_name(n),
        Target::Object(n) => node.registry.resolve(n),
        Target::Invalid => None,
    };
    found.ok_or_else(|| {
        HttpResponse::fault(FaultCode::UnknownService, format!("no service at {path}"))
    })
}

pub(crate) fn handle_request(node: &Arc<NodeShared>, req: &HttpRequest) -> HttpResponse {
    let (path, query) = match req.url.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (req.url.as_str(), None),
    };
    match (req.method.as_str(), path, query) {
        ("GET", "/", None) => HttpResponse::json(encode_listing(&node.registry.listing())),
        ("GET", _, Some("wsdl")) => match lookup(node, path) {
            Ok(dep) => HttpResponse::json(describe(dep.interface(), &node.env.read())),
            Err(fault) => fault,
        },
        ("POST", _, None) => {
            let reply = match handle_call(node, path, req) {
                Ok(v) => ReplyEnvelope::Result(v),
                Err(e) => ReplyEnvelope::Fault(e.to_fault()),
            };
            HttpResponse::json(encode_reply(&reply))
        }
        ("GET" | "POST", _, _) => HttpResponse::bad_request("unsupported path or query"),
        _ => HttpResponse::bad_request("unsupported method"),
    }
}

fn handle_call(node: &Arc<NodeShared>, path: &str, req: &HttpRequest) -> Result<Value> {
    let text = std::str::from_utf8(&req.body)
        .map_err(|e| Error::fault(FaultCode::BadEnvelope, format!("body is not UTF-8: {e}")))?;
    let call =
        decode_call(text).map_err(|e| Error::fault(FaultCode::BadEnvelope, e.to_string()))?;
    let dep = match lookup(node, path) {
        Ok(d) => d,
        Err(_) => return Err(Error::unknown_service(format!("no service at {path}"))),
    };
    let iface = dep.interface();

    match call.method.as_str() {
        RESOLVE_METHOD | SNAPSHOT_METHOD if !call.args.is_empty() => {
            return Err(Error::type_mismatch(format!(
                "{} takes no arguments",
                call.method
            )))
        }
        RESOLVE_METHOD => {
            let n = node.registry.assign_number(&dep);
            return crate::value::Ior::new(&node.host, u64::from(node.port), n, iface.name())
                .map(Value::Ref)
                .map_err(|e| Error::internal(e.to_string()));
        }
        SNAPSHOT_METHOD => {
            return snapshot_value(node, dep.component(), iface.name())
                .map_err(|e| Error::internal(format!("snapshot failed: {e}")))
        }
        _ => {}
    }

    let sig = dep
        .skeleton()
        .method(&call.method)
        .ok_or_else(|| Error::unknown_method(format!("no such method: {}", call.method)))?;
    if sig.params.len() != call.args.len() {
        return Err(Error::type_mismatch(format!(
            "{} takes {} arguments, got {}",
            sig.name,
            sig.params.len(),
            call.args.len()
        )));
    }
    {
        let env = node.env.read();
        for (i, (arg, ty)) in call.args.iter().zip(&sig.params).enumerate() {
            type_check(arg, ty, &env)
                .map_err(|m| Error::type_mismatch(format!("argument {i} {m}")))?;
        }
    }
    let return_override = match req.header(RETURN_POLICY_HEADER) {
        None => CallOverride::default(),
        Some(p) => CallOverride::default().returning(
            p.parse()
                .map_err(|e: String| Error::fault(FaultCode::BadEnvelope, e))?,
        ),
    };

    let args = call
        .args
        .iter()
        .map(|a| materialize(node, a))
        .collect::<Result<Vec<Datum>>>()
        .map_err(|e| match e {
            Error::Fault(_) => e,
            other => Error::type_mismatch(other.to_string()),
        })?;
    let result = dep
        .component()
        .invoke(&sig.name, args)
        .map_err(|e| Error::internal(e.to_string()))?;
    let ctx = PolicyCtx {
        iface: iface.name(),
        method: &sig.name,
        position: Position::Return,
        over: &return_override,
    };
    marshal_outbound(node, &result, &sig.returns, &ctx)
        .map_err(|e| Error::internal(format!("could not marshal result: {e}")))
}

pub(crate) struct Listener {
    server: Arc<tiny_http::Server>,
    port: u16,
}

impl Listener {
    pub(crate) fn port(&self) -> u16 {
        self.port
    }
}

pub(crate) fn bind(host: &str, port: u16) -> Result<Listener> {
    let server = tiny_http::Server::http((host, port))
        .map_err(|e| Error::Network(format!("bind {host}:{port}: {e}")))?;
    let port = server
        .server_addr()
        .to_ip()
        .map(|a| a.port())
        .ok_or_else(|| Error::Network("listener has no IP address".into()))?;
    Ok(Listener {
        server: Arc::new(server),
        port,
    })
}

/// Accept loop; dropping the handle stops it.
pub(crate) struct ServerHandle {
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub(crate) fn spawn(listener: Listener, node: Weak<NodeShared>) -> ServerHandle {
    let server = Arc::clone(&listener.server);
    let thread = thread::Builder::new()
        .name(format!("refbus-accept-{}", listener.port))
        .spawn(move || {
            for request in listener.server.incoming_requests() {
                let Some(node) = node.upgrade() else { break };
                // One thread per request: a call may block on a nested call
                // back into this node.
                thread::spawn(move || serve(&node, request));
            }
        })
        .expect("spawn accept thread");
    ServerHandle {
        server,
        thread: Some(thread),
    }
}

fn serve(node: &Arc<NodeShared>, mut request: tiny_http::Request) {
    let mut body = Vec::new();
    let read = request
        .as_reader()
        .take(MAX_BODY + 1)
        .read_to_end(&mut body);
    let response = if read.is_err() || body.len() as u64 > MAX_BODY {
        HttpResponse::bad_request("unreadable or oversized body")
    } else {
        let req = HttpRequest {
            method: request.method().as_str().to_ascii_uppercase(),
            url: request.url().to_string(),
            headers: request
                .headers()
                .iter()
                .map(|h| {
                    (
                        h.field.as_str().as_str().to_string(),
                        h.value.as_str().to_string(),
                    )
                })
                .collect(),
            body,
        };
        handle_request(node, &req)
    };
    log::debug!(
        "{} {} -> {}",
        request.method(),
        request.url(),
        response.status
    );
    let header =
        tiny_http::Header::from_bytes(&b"Content-Type"[..], response.content_type.as_bytes())
            .expect("static header is valid");
    let reply = tiny_http::Response::from_string(response.body)
        .with_status_code(response.status)
        .with_header(header);
    if let Err(e) = request.respond(reply) {
        log::debug!("client went away: {e}");
    }
}
