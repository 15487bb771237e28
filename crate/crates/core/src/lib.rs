//! refbus: expose specific, already-running component instances for remote
//! invocation over HTTP.
//!
//! A [`Node`] deploys a [`Component`] under an [`InterfaceDescriptor`] the
//! component's class merely *could* implement. Callers reach it through a
//! named endpoint (`POST /<name>`) or through an [`Ior`], a four-field
//! remote reference. Whether a component argument or result travels as a
//! copy of its state or as an `Ior` is decided per position by the
//! [`PolicyStore`]; components sent by reference are deployed on the fly.
//!
//! ```no_run
//! use refbus::{Class, ClassDescriptor, Datum, InterfaceDescriptor, MethodSig, Node, NodeConfig, TypeRef};
//!
//! struct Student { name: String }
//!
//! let class = Class::builder(
//!     ClassDescriptor::new("Student")
//!         .with_state("name", TypeRef::Str)
//!         .with_method(MethodSig::new("getName", vec![], TypeRef::Str)),
//! )
//! .method("getName", |s: &Student, _| Ok(Datum::from(s.name.as_str())))
//! .snapshot(|s| vec![("name".into(), Datum::from(s.name.as_str()))])
//! .build()?;
//!
//! let iface = InterfaceDescriptor::new("INamedEntity", vec![MethodSig::new("getName", vec![], TypeRef::Str)])?;
//! let node = Node::start(NodeConfig::new("127.0.0.1", 5001))?;
//! let url = node.deploy(&iface, &class.instantiate(Student { name: "Bobby Jones".into() }), "bob")?;
//! assert_eq!(url, "http://127.0.0.1:5001/bob");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod component;
pub mod error;
pub mod iface;
pub mod node;
pub mod policy;
pub mod registry;
pub mod value;
pub mod wire;

pub use component::{Class, ClassBuilder, Component, Datum, ObjRef};
pub use error::{Error, Result};
pub use iface::{
    check_closure, check_compat, describe, ClassDescriptor, Descriptor, InterfaceDescriptor,
    MethodSig, SigPosition, Violation, ViolationKind,
};
pub use node::{CallOptions, HttpRequest, HttpResponse, Node, NodeConfig, PolicyCtx, Proxy};
pub use policy::{CallOverride, PolicyStore, Position, TransmissionPolicy};
pub use value::{type_check, value_equals, Finite, Ior, Record, TypeEnvironment, TypeRef, Value};
pub use wire::{Fault, FaultCode};
