use thiserror::Error;

use crate::iface::{MethodSig, Violation};
use crate::wire::{Fault, FaultCode};

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A failure carrying one of the closed wire fault codes, raised locally
    /// or received from a peer.
    #[error("{}: {}", .0.code, .0.message)]
    Fault(Fault),
    #[error("unknown interface `{0}`")]
    UnknownInterface(String),
    #[error("class `{class}` is not compatible with `{interface}`; missing {}", list_methods(.missing))]
    IncompatibleComponent {
        class: String,
        interface: String,
        missing: Vec<MethodSig>,
    },
    #[error("interface signature names non-interface types: {}", list_violations(.0))]
    NonInterfaceSignature(Vec<Violation>),
    #[error("name `{0}` is already bound to another deployment")]
    NameInUse(String),
    #[error("invalid deployment name `{0}`")]
    InvalidName(String),
    #[error("network: {0}")]
    Network(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("definition: {0}")]
    Definition(String),
}

fn list_methods(ms: &[MethodSig]) -> String {
    ms.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn list_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn fault(code: FaultCode, message: impl Into<String>) -> Self {
        Error::Fault(Fault::new(code, message))
    }

    pub fn unknown_service(message: impl Into<String>) -> Self {
        Self::fault(FaultCode::UnknownService, message)
    }

    pub fn unknown_method(message: impl Into<String>) -> Self {
        Self::fault(FaultCode::UnknownMethod, message)
    }

    pub fn type_mismatch(message: impl Into<String>) -> Self {
        Self::fault(FaultCode::TypeMismatch, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::fault(FaultCode::Internal, message)
    }

    pub fn fault_code(&self) -> Option<FaultCode> {
        match self {
            Error::Fault(f) => Some(f.code),
            _ => None,
        }
    }

    /// The fault a server reports when this error escapes a call.
    pub fn to_fault(&self) -> Fault {
        match self {
            Error::Fault(f) => f.clone(),
            Error::UnknownInterface(_) => Fault::new(FaultCode::TypeMismatch, self.to_string()),
            other => Fault::new(FaultCode::Internal, other.to_string()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
