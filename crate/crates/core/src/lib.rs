//! Coordinate-chart Riemannian geometry and numerical verification of
//! Clairaut, Ricci-soliton and anti-invariant theorems for Riemannian maps.

pub mod clairaut;
pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod kaehler;
pub mod linalg;
pub mod randomized;
pub mod report;
pub mod rmap;
pub mod sampling;
pub mod soliton;
pub mod symexpr;

pub use error::{GeomError, Result};
pub use geometry::{ChartedManifold, Christoffel, Riemann, ScalarField, VectorField};
pub use linalg::{Matrix, Vector};
pub use report::{CheckReport, Residual, Verdict};
pub use rmap::{FrameSplit, SmoothMap, Tension};
pub use sampling::SampleSpec;
pub use symexpr::{parse, Expr, SymbolTable};
