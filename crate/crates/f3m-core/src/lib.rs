//! Hierarchical, kernel-independent approximate kernel matrix-vector
//! multiplication for tall-and-skinny data (up to 7 dimensions), with a
//! controllable accuracy/speed trade-off.
//!
//! The engine recursively partitions both point sets into an enclosing-cube
//! box tree, classifies box-pair interactions as near, far, smooth or small
//! field, approximates the far and smooth fields by barycentric Chebyshev
//! interpolation of the kernel, and computes the rest exactly. An exact dense
//! oracle, the subset relative-error metric, synthetic dataset generators and
//! a conjugate-gradient kernel ridge regression solver round out the crate.
//!
//! ```
//! use f3m_core::{
//!     data::{generate, solve_gamma_for_ev, DatasetKind, DatasetSpec},
//!     engine::{f3m_matvec, F3mConfig},
//!     kernel::KernelSpec,
//! };
//! use ndarray::Array1;
//!
//! let x = generate(&DatasetSpec {
//!     kind: DatasetKind::Uniform,
//!     n: 2000,
//!     d: 3,
//!     seed: 7,
//!     target_ev: None,
//! })
//! .unwrap();
//! let gamma = solve_gamma_for_ev(x.view(), 1.0).unwrap();
//! let kernel = KernelSpec::gaussian(gamma).unwrap();
//! let b = Array1::from_elem(2000, 1.0);
//! let (v, stats) = f3m_matvec(x.view(), x.view(), b.view(), &kernel, &F3mConfig::default()).unwrap();
//! assert_eq!(v.len(), 2000);
//! assert!(stats.final_depth >= 1);
//! ```

pub mod data;
pub mod engine;
pub mod error;
pub mod interp;
pub mod io;
pub mod kernel;
pub mod krr;
pub mod oracle;
pub mod tree;

pub use engine::{account, classify, f3m_matvec, F3mConfig, GridKind, Precision, RunStats};
pub use error::{Error, Result};
pub use kernel::{kernel_eval, near_field_apply, KernelSpec};
pub use oracle::{dense_matvec, scaling_slope, subset_error};
