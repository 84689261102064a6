//! Finite-difference laboratory for unit-sphere director fields on twisted
//! tori.
//!
//! The crate discretizes maps d: Tⁿ → S² (n = 2, 3) on a uniform lattice
//! whose faces are identified up to a per-axis sign, evolves the harmonic-map
//! heat flow ∂ₜd = Δd + |∇d|²d, and instruments the spherical-chart calculus
//! around it: moving frames, tension-field decompositions, discrete Sobolev
//! norms, and a battery of identity residuals and inequality ratios that are
//! checked exactly (to discretization order) or tracked under grid
//! refinement.

pub mod director;
pub mod energy;
pub mod error;
pub mod estimates;
pub mod field;
pub mod flow;
pub mod frame;
pub mod grid;
pub mod norms;
pub mod report;
pub mod snapshot;
pub mod suite;

pub use director::{ChartAxis, ChartFields, DirectorField, FrameVectors};
pub use error::{Error, Result};
pub use field::SampledField;
pub use grid::{GridMeta, Mask, Parity, TorusGrid};
pub use report::{EstimateReport, ReportEntry};

/// Default pole-exclusion threshold: chart nodes with sin θ below this are
/// masked out of every chart-side statistic.
pub const DEFAULT_EPS_POLE: f64 = 0.05;
