//! Uniformity, box and cut norms on finite abelian groups and tensors, with
//! dense-model and Koopman–von Neumann decompositions built on them.

pub mod boxnorms;
pub mod budget;
pub mod decompose;
pub mod dualsearch;
pub mod error;
pub mod fourier;
pub mod groups;
pub mod harness;
pub mod interval;
pub mod numeric;
pub mod pseudorandom;
pub mod search;
pub mod uniformity;

pub use boxnorms::{DualFamily, TensorFunction};
pub use budget::Budget;
pub use decompose::{DecompositionResult, DenseModelOptions, DualOracle};
pub use dualsearch::DualFunction;
pub use error::{Error, Result};
pub use groups::{CubeIndex, FiniteAbelianGroup, GroupFunction};
pub use harness::{ExperimentId, ExperimentReport, Grid, ReportFormat};
pub use interval::{CutoffProfile, IntervalFunction};
pub use pseudorandom::{MajorantCertificate, MajorantKind, MajorantSpec, PsiReference};
pub use search::{SearchMode, SearchOptions, SearchStats};
pub use uniformity::{CubeFamily, MethodChoice, NormMethod, NormResult, WeakNormEstimate};
