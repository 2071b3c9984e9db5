//! Vector step-size adaptation for online, continual prediction.
//!
//! The crate is organised bottom-up:
//!
//! * [`vector`], [`linalg`], [`rule`] and [`fd`] hold the shared machinery: the
//!   weight/step-size/update vectors, the [`UpdateRule`] probe/commit contract
//!   and centered finite-difference Jacobian products.
//! * [`baselines`] has the quasi-second-order optimizers (AdaGrad, RMSProp,
//!   AdaDelta, Adam, AMSGrad), hypergradient descent and IDBD.
//! * [`adagain`] is the AdaGain meta-descent family: quadratic, diagonal-linear
//!   and finite-difference forms.
//! * [`smd`] is stochastic meta-descent with forgetting.
//! * [`td`] has LMS and off-policy linear TD(λ) as update rules together with
//!   their closed-form Jacobian products.
//! * [`problems`] has the benchmark environments and analytic oracles.
//! * [`harness`] runs experiments and sweeps and writes CSV records.

pub mod adagain;
pub mod baselines;
pub mod error;
pub mod fd;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod rule;
pub mod smd;
pub mod td;
pub mod vector;

pub use error::{Error, Result};
pub use linalg::{Jacobian, Matrix};
pub use rule::UpdateRule;
pub use vector::{apply_update, StepSizeVector, UpdateVector, WeightVector};
