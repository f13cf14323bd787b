//! Bounds on Eve's conditional entropy for device-independent QKD from the
//! pair of Bell correlators (X, Y), with a certified branch-and-bound path
//! and a lossy two-qubit experiment model.

pub mod certify;
pub mod cli;
pub mod corr;
pub mod easy_bound;
pub mod entropy;
pub mod error;
pub mod hard_bound;
pub mod keyrate;
pub mod optim;

pub use corr::{
    angles_to_weights, beta_of, normalize_signs, t_to_weights, weights_to_t, AngleModel,
    BellDiagonalWeights, BellTest, Correlators, NoiseParams, TVector, WeightOrdering,
};
pub use error::{Error, Result};
