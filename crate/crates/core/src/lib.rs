//! Spatial-reasoning supervision for autoregressive action policies, on a
//! synthetic manipulation world with a controllable spurious correlation.

pub mod sim;
pub mod labeler;
pub mod prompting;
pub mod autodiff;
pub mod io;
pub mod policy;
pub mod experiment;
