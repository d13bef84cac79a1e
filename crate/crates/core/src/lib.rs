//! Clustering of high-dimensional data with Gaussian mixtures whose
//! components live near low-dimensional affine subspaces.
//!
//! Each component `i` is described by a mean, an orthonormal basis of its
//! specific subspace, the variances `a_ij` inside that subspace and a single
//! noise variance `b_i` outside it. Constraining which of these are shared
//! across components gives a family of parsimonious models, all fitted by
//! the same EM driver.
//!
//! ```no_run
//! use hddc::{fit, DataMatrix, DimPolicy, EmConfig, ModelKind};
//!
//! let data = DataMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.5], vec![9.0, 8.0]]).unwrap();
//! let model: ModelKind = "[a_i b_i Q_i d_i]".parse().unwrap();
//! let report = fit(&data, 2, model, &DimPolicy::scree(0.2), &EmConfig::default()).unwrap();
//! println!("{} dims={:?}", report.bic, report.dims());
//! ```

pub mod baselines;
pub mod cli;
pub mod benchmark;
pub mod data;
pub mod em;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod selection;
pub mod synthgen;

pub use baselines::{fit_baseline, BaselineParams, Covariance};
pub use data::DataMatrix;
pub use em::{fit, EmConfig, FitReport, FittedParams, InitKind, Responsibilities};
pub use error::{Error, Result};
pub use linalg::{eig_desc, gram_top_eig, top_eig, EigenPairs, SymMatrix};
pub use model::{
    baseline_param_count, enumerate_models, param_count, BaselineKind, Component, Family, MixtureParams,
    ModelKind, ParamCountInputs, SubspaceModel,
};
pub use selection::{bic, scree_dimension, select, DimPolicy, SelectionGrid, SelectionReport};
pub use metrics::{condition_ratio, recognition_rate, ConfusionMatrix, RecognitionResult};
pub use synthgen::{random_orientation, simulate, simulate_full_rank, FullRankSpec, SimSpec};
