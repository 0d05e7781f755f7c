//! Safe decision regions for two-class data, and a cost-ensemble SVM that
//! approximates them.
//!
//! The crate has two halves. When the class-conditional densities are known
//! exponential-family distributions (Gaussian in closed form), [`exact_sdr`]
//! computes the region of inputs whose posterior safe-class probability
//! clears a requested confidence exactly, including the hyperplane /
//! ellipsoid / quadric taxonomy of its boundary. When only samples are
//! available, [`mcsvm`] trains a multi-cost SVM — one shared hyperplane
//! fitted across many misclassification-cost weights so the direction does
//! not chase the class imbalance — and [`calibration`] picks the offset so a
//! chosen error ratio is bounded by a risk level ε.
//!
//! [`sampling`] provides seeded, bit-reproducible Gaussian-mixture datasets;
//! [`kernels`] the kernel functions; [`experiments`] metrics, contour
//! export, and the built-in end-to-end studies behind the `sdr` CLI.

pub mod calibration;
pub mod error;
pub mod exact_sdr;
pub mod experiments;
pub mod kernels;
pub mod mcsvm;
pub mod sampling;

pub use error::{Error, Result};
