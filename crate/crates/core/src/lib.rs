//! Constructive sup-norm approximation on the cube `[-1, 1]^n`.

pub mod activation;
pub mod cascade;
pub mod corpus;
pub mod error;
pub mod grid;
pub mod hilbert;
pub mod layernet;
pub mod shallow;
pub mod study;
mod textfmt;

pub use activation::Activation;
pub use corpus::TargetFunction;
pub use error::{Error, Result};
pub use grid::{make_grid, sup_norm_diff, Grid, PointSet};
pub use shallow::{fit_shallow, FitConfig, ShallowNet};
pub use cascade::{train_cascade, CascadeModel, ErrorTrace, FeatureMode};
pub use layernet::{train_layernet_ge, train_layernet_lt, BoundReport, ChainConfig, LayerMap, LayerNetModel};
pub use study::{depth_study, emit_report, hilbert_k_study, rate_study_shallow, RateReport, ReportFormat, StudyConfig};
