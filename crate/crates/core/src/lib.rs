//! Trust scores for black-box classifiers.
//!
//! Each class's training data is reduced to its estimated high-density set
//! (points whose k-NN radius is below a data-driven threshold). A test
//! prediction is then scored by how much closer it is to the predicted
//! class's set than to the nearest competing class's set.
//!
//! ```
//! use ndarray::array;
//! use trustscore::dataset::LabeledDataset;
//! use trustscore::trust::{fit_trust_model, FilteringStrategy};
//!
//! let train = LabeledDataset::new(array![[0.0], [1.0], [9.0], [10.0]], vec![0, 0, 1, 1]).unwrap();
//! let model = fit_trust_model(&train, 0.0, 1, FilteringStrategy::Density).unwrap();
//! let score = model.trust_score(&[3.0], 0).unwrap();
//! assert_eq!(score.value, 3.0); // 6 to class 1, 2 to class 0
//! ```

pub mod cli;
pub mod dataset;
pub mod density;
pub mod error;
pub mod eval;
pub mod models;
pub mod neighbor;
pub mod synth;
pub mod trust;

pub use error::{Error, Result};
