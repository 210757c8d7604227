//! Torus graph models for multivariate circular data.
//!
//! A torus graph is the exponential family on the d-torus whose sufficient
//! statistics are the first circular moments of each angle and the cosines
//! and sines of all pairwise differences and sums. Parameters are estimated
//! in closed form by score matching; zero coupling blocks are conditional
//! independences and are tested with Wald χ² statistics.
//!
//! ```
//! use torus_graph::estimation::fit_closed_form;
//! use torus_graph::inference::{all_edge_tests, asymptotic_cov_for_fit, build_graph, Correction, EdgeMode};
//! use torus_graph::simulation::{gen_chain, ChainSpec};
//! use torus_graph::FamilyMask;
//!
//! let (data, _truth) = gen_chain(840, &ChainSpec::default(), 7).unwrap();
//! let fit = fit_closed_form(&data, &FamilyMask::full(data.d())).unwrap();
//! let cov = asymptotic_cov_for_fit(&data, &fit).unwrap();
//! let tests = all_edge_tests(&fit, &cov, EdgeMode::Full4).unwrap();
//! let graph = build_graph(data.d(), &tests, 0.001, Correction::Bonferroni).unwrap();
//! assert!(graph.has_edge(0, 1));
//! ```

pub mod circular;
pub mod data;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod margins;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod simulation;

pub use data::AngleMatrix;
pub use error::{Result, TorusError};
pub use model::{FamilyKind, FamilyMask, Layout, MeanCenteredParams, TorusGraphParams};
