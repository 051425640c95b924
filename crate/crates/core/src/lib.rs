#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod automorphisms;
pub mod domains;
pub mod error;
pub mod holomap;
pub mod kobayashi;
pub mod lemmas;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod scaling;

pub use domains::{DomainKind, DomainSpec};
pub use error::{Error, Result};
pub use holomap::{HoloMap, Holomorphic};
pub use linalg::{COperator, CVector, FlagIndex};
pub use report::{Entry, Report, Table};
pub use sampling::Streams;
