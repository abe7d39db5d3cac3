pub mod decompose;
pub mod engulfing;
pub mod error;
pub mod funcs;
pub mod group;
pub mod hnsections;
pub mod optim;
pub mod quasimetric;
pub mod report;
pub mod sampling;
pub mod sections;
pub mod threehop;
pub mod validate;

pub use error::{HeisError, Result};
pub use funcs::{Builtin, HConvexFn};
pub use group::{HPoint, HorizontalVector, PlaneTrace, TraceKind};
