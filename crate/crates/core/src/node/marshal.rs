use std::sync::Arc;

use crate::component::{Datum, ObjRef};
use crate::error::{Error, Result};
use crate::iface::check_compat;
use crate::policy::{CallOverride, Position, TransmissionPolicy};
use crate::value::{FieldList, Record, TypeRef, Value};

use super::NodeShared;

/// Snapshots of snapshots nest at most this deep; cyclic by-value graphs
/// fail instead of recursing forever.
const MAX_DEPTH: usize = 64;

/// The signature position a datum is being transmitted for.
#[derive(Debug, Clone, Copy)]
pub struct PolicyCtx<'a> {
    pub iface: &'a str,
    pub method: &'a str,
    pub position: Position,
    pub over: &'a CallOverride,
}

pub(crate) fn marshal_outbound(
    node: &Arc<NodeShared>,
    d: &Datum,
    declared: &TypeRef,
    ctx: &PolicyCtx<'_>,
) -> Result<Value> {
    marshal_at(node, d, declared, ctx, 0)
}

fn mismatch(declared: &TypeRef, d: &Datum) -> Error {
    Error::type_mismatch(format!("expected {declared}, found {}", d.tag()))
}

fn marshal_at(
    node: &Arc<NodeShared>,
    d: &Datum,
    declared: &TypeRef,
    ctx: &PolicyCtx<'_>,
    depth: usize,
) -> Result<Value> {
    if depth > MAX_DEPTH {
        return Err(Error::type_mismatch(
            "by-value object graph too deep (cyclic?)",
        ));
    }
    match (declared, d) {
        (_, Datum::Null)
            if matches!(
                declared,
                TypeRef::Null | TypeRef::Record(_) | TypeRef::Interface(_)
            ) =>
        {
            Ok(Value::Null)
        }
        (TypeRef::Bool, Datum::Bool(b)) => Ok(Value::Bool(*b)),
        (TypeRef::Int, Datum::Int(i)) => Ok(Value::Int(*i)),
        (TypeRef::Float, Datum::Float(f)) => Ok(Value::Float(*f)),
        (TypeRef::Str, Datum::Str(s)) => Ok(Value::Str(s.clone())),
        (TypeRef::ListOf(elem), Datum::List(items)) => items
            .iter()
            .map(|item| marshal_at(node, item, elem, ctx, depth + 1))
            .collect::<Result<Vec<_>>>()
            .map(Value::List),
        (TypeRef::Record(name), Datum::Record(rec)) => {
            if rec.type_name() != name {
                return Err(Error::type_mismatch(format!(
                    "expected record {name}, found record {}",
                    rec.type_name()
                )));
            }
            let shape =
                node.env.read().record_shape(name).cloned().ok_or_else(|| {
                    Error::type_mismatch(format!("unresolved record type {name}"))
                })?;
            marshal_record(node, rec, &shape, ctx, depth)
        }
        (TypeRef::Interface(name), Datum::Record(rec)) => {
            // A by-value copy that arrived without a local constructor,
            // passed on again.
            let shape = copy_shape(node, name, rec.type_name())?;
            marshal_record(node, rec, &shape, ctx, depth)
        }
        (TypeRef::Interface(name), Datum::Object(obj)) => {
            marshal_object(node, obj, name, ctx, depth)
        }
        _ => Err(mismatch(declared, d)),
    }
}

fn copy_shape(node: &Arc<NodeShared>, iface: &str, class: &str) -> Result<FieldList> {
    let env = node.env.read();
    let cls = env.class(class).ok_or_else(|| {
        Error::type_mismatch(format!("record {class} is not a copy of a known class"))
    })?;
    let ifc = env
        .interface(iface)
        .ok_or_else(|| Error::UnknownInterface(iface.to_string()))?;
    check_compat(cls, ifc)
        .map_err(|_| Error::type_mismatch(format!("class {class} does not conform to {iface}")))?;
    Ok(cls.state_fields().clone())
}

fn marshal_record(
    node: &Arc<NodeShared>,
    rec: &Record<Datum>,
    shape: &FieldList,
    ctx: &PolicyCtx<'_>,
    depth: usize,
) -> Result<Value> {
    if rec.fields().len() != shape.len() {
        return Err(Error::type_mismatch(format!(
            "record {} has {} fields, expected {}",
            rec.type_name(),
            rec.fields().len(),
            shape.len()
        )));
    }
    let mut fields = Vec::with_capacity(shape.len());
    for ((name, fv), (want, ty)) in rec.fields().iter().zip(shape) {
        if name != want {
            return Err(Error::type_mismatch(format!(
                "record {} field {name}, expected {want}",
                rec.type_name()
            )));
        }
        fields.push((name.clone(), marshal_at(node, fv, ty, ctx, depth + 1)?));
    }
    Record::new(rec.type_name(), fields)
        .map(Value::Record)
        .map_err(|e| Error::type_mismatch(e.to_string()))
}

fn marshal_object(
    node: &Arc<NodeShared>,
    obj: &ObjRef,
    iface: &str,
    ctx: &PolicyCtx<'_>,
    depth: usize,
) -> Result<Value> {
    let policy = node.policy.resolve(
        ctx.position,
        ctx.iface,
        ctx.method,
        obj.runtime_class(),
        ctx.over,
    );
    match obj {
        ObjRef::Local(c) => {
            let class = c.class();
            {
                let env = node.env.read();
                let ifc = env
                    .interface(iface)
                    .ok_or_else(|| Error::UnknownInterface(iface.to_string()))?;
                if check_compat(class, ifc).is_err() {
                    return Err(Error::type_mismatch(format!(
                        "component of class {} does not conform to {iface}",
                        class.name()
                    )));
                }
            }
            match policy {
                TransmissionPolicy::ByReference => node.export(iface, None, c).map(Value::Ref),
                TransmissionPolicy::ByValue => {
                    node.register_class_descriptor(class)?;
                    let snap = c.snapshot();
                    marshal_record(node, &snap, class.state_fields(), ctx, depth)
                }
            }
        }
        ObjRef::Remote(p) => {
            if p.interface().name() != iface {
                return Err(Error::type_mismatch(format!(
                    "proxy for {} where {iface} expected",
                    p.interface().name()
                )));
            }
            match policy {
                // Forwarded verbatim so the reference keeps pointing at the
                // component's home node.
                TransmissionPolicy::ByReference => Ok(Value::Ref(p.ior().clone())),
                TransmissionPolicy::ByValue => p.fetch_snapshot(),
            }
        }
    }
}

/// Snapshot of a local component with nested objects marshaled by value.
pub(crate) fn snapshot_value(
    node: &Arc<NodeShared>,
    obj: &crate::component::Component,
    iface: &str,
) -> Result<Value> {
    let over = CallOverride::whole(TransmissionPolicy::ByValue);
    let ctx = PolicyCtx {
        iface,
        method: crate::wire::SNAPSHOT_METHOD,
        position: Position::Return,
        over: &over,
    };
    marshal_object(node, &ObjRef::Local(obj.clone()), iface, &ctx, 0)
}

pub(crate) fn materialize(node: &Arc<NodeShared>, v: &Value) -> Result<Datum> {
    Ok(match v {
        Value::Null => Datum::Null,
        Value::Bool(b) => Datum::Bool(*b),
        Value::Int(i) => Datum::Int(*i),
        Value::Float(f) => Datum::Float(*f),
        Value::Str(s) => Datum::Str(s.clone()),
        Value::List(items) => Datum::List(
            items
                .iter()
                .map(|i| materialize(node, i))
                .collect::<Result<_>>()?,
        ),
        Value::Record(rec) => {
            let fields = rec
                .fields()
                .iter()
                .map(|(n, fv)| Ok((n.clone(), materialize(node, fv)?)))
                .collect::<Result<Vec<_>>>()?;
            let ctor = node.constructors.read().get(rec.type_name()).cloned();
            match ctor {
                Some(ctor) => Datum::Object(ObjRef::Local(ctor(fields)?)),
                None => Datum::Record(
                    Record::new(rec.type_name(), fields).expect("validated on decode"),
                ),
            }
        }
        Value::Ref(ior) if node.is_local(ior) => {
            let dep = node.registry.resolve(ior.object_number()).ok_or_else(|| {
                Error::unknown_service(format!("no object {} on this node", ior.object_number()))
            })?;
            Datum::Object(ObjRef::Local(dep.component().clone()))
        }
        Value::Ref(ior) => Datum::Object(ObjRef::Remote(super::client::intern(node, ior)?)),
    })
}
