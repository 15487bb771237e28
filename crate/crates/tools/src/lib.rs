//! Tooling around `refbus`: the example classes, the scenario harness and
//! the inspector used by the `refbus-inspect` binary.

pub mod classes;
pub mod inspect;
pub mod scenario;
