//! Envelope encoding for values, calls, replies and the node listing.
//!
//! The concrete syntax is compact self-tagging JSON. Encoding is
//! deterministic: record fields keep declaration order and no whitespace is
//! emitted.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Number, Value as Json};
use thiserror::Error;

use crate::value::{Finite, Ior, Record, Value};

pub const CONTENT_TYPE: &str = "application/json";

/// Built-in call returning the IOR of the addressed deployment.
pub const RESOLVE_METHOD: &str = "__resolve";
/// Built-in call returning a by-value copy of the addressed component.
pub const SNAPSHOT_METHOD: &str = "__snapshot";
/// Request header carrying a per-call return-value policy.
pub const RETURN_POLICY_HEADER: &str = "X-Refbus-Return-Policy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultCode {
    UnknownService,
    UnknownMethod,
    TypeMismatch,
    BadEnvelope,
    Internal,
}

impl FaultCode {
    pub const ALL: [FaultCode; 5] = [
        FaultCode::UnknownService,
        FaultCode::UnknownMethod,
        FaultCode::TypeMismatch,
        FaultCode::BadEnvelope,
        FaultCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultCode::UnknownService => "UNKNOWN_SERVICE",
            FaultCode::UnknownMethod => "UNKNOWN_METHOD",
            FaultCode::TypeMismatch => "TYPE_MISMATCH",
            FaultCode::BadEnvelope => "BAD_ENVELOPE",
            FaultCode::Internal => "INTERNAL",
        }
    }
}

impl fmt::Display for FaultCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultCode {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| WireError(format!("unknown fault code `{s}`")))
    }
}

/// Malformed envelope text. Always reported to peers as `BAD_ENVELOPE`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad envelope: {0}")]
pub struct WireError(pub String);

fn bad(msg: impl Into<String>) -> WireError {
    WireError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallEnvelope {
    pub method: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub code: FaultCode,
    pub message: String,
}

impl Fault {
    pub fn new(code: FaultCode, message: impl Into<String>) -> Self {
        Fault {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyEnvelope {
    Result(Value),
    Fault(Fault),
}

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Null => json!({ "t": "null" }),
        Value::Bool(b) => json!({ "t": "bool", "v": b }),
        Value::Int(i) => json!({ "t": "i64", "v": i }),
        Value::Float(f) => {
            let n = Number::from_f64(f.get()).expect("finite by construction");
            json!({ "t": "f64", "v": Json::Number(n) })
        }
        Value::Str(s) => json!({ "t": "str", "v": s }),
        Value::List(items) => {
            json!({ "t": "list", "v": items.iter().map(value_to_json).collect::<Vec<_>>() })
        }
        Value::Record(rec) => {
            let mut fields = Map::new();
            for (name, fv) in rec.fields() {
                fields.insert(name.clone(), value_to_json(fv));
            }
            json!({ "t": "rec", "type": rec.type_name(), "v": fields })
        }
        Value::Ref(ior) => json!({
            "t": "ref",
            "v": {
                "host": ior.host(),
                "port": ior.port(),
                "obj": ior.object_number(),
                "iface": ior.interface(),
            }
        }),
    }
}

pub fn encode_value(v: &Value) -> String {
    value_to_json(v).to_string()
}

fn expect_keys(obj: &Map<String, Json>, keys: &[&str], what: &str) -> Result<(), WireError> {
    if obj.len() != keys.len() || !keys.iter().all(|k| obj.contains_key(*k)) {
        let got: Vec<&str> = obj.keys().map(String::as_str).collect();
        return Err(bad(format!("{what} expects keys {keys:?}, got {got:?}")));
    }
    Ok(())
}

fn non_empty_str<'a>(j: &'a Json, what: &str) -> Result<&'a str, WireError> {
    match j.as_str() {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(bad(format!("{what} must be a non-empty string"))),
    }
}

pub fn value_from_json(j: &Json) -> Result<Value, WireError> {
    let obj = j
        .as_object()
        .ok_or_else(|| bad("value must be an object"))?;
    let tag = obj
        .get("t")
        .and_then(Json::as_str)
        .ok_or_else(|| bad("value without string tag `t`"))?;
    if tag == "null" {
        expect_keys(obj, &["t"], "null")?;
        return Ok(Value::Null);
    }
    if tag == "rec" {
        expect_keys(obj, &["t", "type", "v"], "rec")?;
    } else {
        expect_keys(obj, &["t", "v"], tag)?;
    }
    let payload = &obj["v"];
    match tag {
        "bool" => payload
            .as_bool()
            .map(Value::Bool)
            .ok_or_else(|| bad("bool payload")),
        "i64" => payload
            .as_i64()
            .map(Value::Int)
            .ok_or_else(|| bad("i64 payload")),
        "f64" => {
            let f = payload.as_f64().ok_or_else(|| bad("f64 payload"))?;
            Finite::new(f)
                .map(Value::Float)
                .map_err(|e| bad(e.to_string()))
        }
        "str" => payload
            .as_str()
            .map(|s| Value::Str(s.to_string()))
            .ok_or_else(|| bad("str payload")),
        "list" => payload
            .as_array()
            .ok_or_else(|| bad("list payload"))?
            .iter()
            .map(value_from_json)
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List),
        "rec" => {
            let type_name = non_empty_str(&obj["type"], "record type")?;
            let fields = payload
                .as_object()
                .ok_or_else(|| bad("rec payload"))?
                .iter()
                .map(|(k, fv)| Ok((k.clone(), value_from_json(fv)?)))
                .collect::<Result<Vec<_>, WireError>>()?;
            Record::new(type_name, fields)
                .map(Value::Record)
                .map_err(|e| bad(e.to_string()))
        }
        "ref" => {
            let r = payload.as_object().ok_or_else(|| bad("ref payload"))?;
            expect_keys(r, &["host", "port", "obj", "iface"], "ref")?;
            let host = non_empty_str(&r["host"], "ref host")?;
            let port = r["port"].as_u64().ok_or_else(|| bad("ref port"))?;
            let obj_no = r["obj"].as_u64().ok_or_else(|| bad("ref obj"))?;
            let iface = non_empty_str(&r["iface"], "ref iface")?;
            Ior::new(host, port, obj_no, iface)
                .map(Value::Ref)
                .map_err(|e| bad(e.to_string()))
        }
        other => Err(bad(format!("unknown tag `{other}`"))),
    }
}

fn parse(text: &str) -> Result<Json, WireError> {
    serde_json::from_str(text).map_err(|e| bad(format!("syntax: {e}")))
}

pub fn decode_value(text: &str) -> Result<Value, WireError> {
    value_from_json(&parse(text)?)
}

pub fn encode_call(call: &CallEnvelope) -> String {
    json!({
        "method": call.method,
        "args": call.args.iter().map(value_to_json).collect::<Vec<_>>(),
    })
    .to_string()
}

pub fn decode_call(text: &str) -> Result<CallEnvelope, WireError> {
    let doc = parse(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| bad("call must be an object"))?;
    expect_keys(obj, &["method", "args"], "call")?;
    let method = non_empty_str(&obj["method"], "method")?.to_string();
    let args = obj["args"]
        .as_array()
        .ok_or_else(|| bad("args must be an array"))?
        .iter()
        .map(value_from_json)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CallEnvelope { method, args })
}

pub fn encode_reply(reply: &ReplyEnvelope) -> String {
    match reply {
        ReplyEnvelope::Result(v) => json!({ "result": value_to_json(v) }).to_string(),
        ReplyEnvelope::Fault(f) => json!({
            "fault": { "code": f.code.as_str(), "message": f.message }
        })
        .to_string(),
    }
}

pub fn decode_reply(text: &str) -> Result<ReplyEnvelope, WireError> {
    let doc = parse(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| bad("reply must be an object"))?;
    if obj.contains_key("result") {
        expect_keys(obj, &["result"], "reply")?;
        return value_from_json(&obj["result"]).map(ReplyEnvelope::Result);
    }
    expect_keys(obj, &["fault"], "reply")?;
    let f = obj["fault"]
        .as_object()
        .ok_or_else(|| bad("fault must be an object"))?;
    expect_keys(f, &["code", "message"], "fault")?;
    let code = f["code"]
        .as_str()
        .ok_or_else(|| bad("fault code"))?
        .parse()?;
    let message = f["message"].as_str().ok_or_else(|| bad("fault message"))?;
    Ok(ReplyEnvelope::Fault(Fault::new(code, message)))
}

/// One row of the `GET /` listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListingEntry {
    pub names: Vec<String>,
    pub object_number: Option<u64>,
    pub interface: String,
}

pub fn encode_listing(entries: &[ListingEntry]) -> String {
    let rows: Vec<Json> = entries
        .iter()
        .map(|e| json!({ "names": e.names, "obj": e.object_number, "iface": e.interface }))
        .collect();
    json!({ "deployments": rows }).to_string()
}

pub fn decode_listing(text: &str) -> Result<Vec<ListingEntry>, WireError> {
    let doc = parse(text)?;
    let rows = doc
        .get("deployments")
        .and_then(Json::as_array)
        .ok_or_else(|| bad("listing without deployments"))?;
    rows.iter()
        .map(|row| {
            let names = row
                .get("names")
                .and_then(Json::as_array)
                .ok_or_else(|| bad("listing row without names"))?
                .iter()
                .map(|n| {
                    n.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| bad("name must be a string"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let object_number = match row.get("obj") {
                Some(Json::Null) | None => None,
                Some(n) => Some(n.as_u64().ok_or_else(|| bad("obj must be an integer"))?),
            };
            let interface =
                non_empty_str(row.get("iface").unwrap_or(&Json::Null), "iface")?.to_string();
            Ok(ListingEntry {
                names,
                object_number,
                interface,
            })
        })
        .collect()
}
