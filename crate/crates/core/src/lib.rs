//! Explaining anomalies found by autoencoders.
//!
//! An instance's reconstruction errors are ranked, the features carrying
//! most of the error are each attributed to the inputs with Kernel SHAP
//! (or LIME, as a baseline), and every attribution is split into features
//! pushing the reconstruction away from the true value (contributing) and
//! towards it (offsetting).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common case.

pub mod attribution;
pub mod autoencoder;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explainer;
mod scalar;

pub use attribution::{
    exact_shapley, kernel_shap, lime_explain, mask_instance, shapley_kernel_weight, weighted_least_squares,
    Attribution, Coalitions, LimeConfig, ScalarTarget, ShapConfig, TargetId,
};
pub use autoencoder::{
    per_feature_errors, perfect_linear_ae, Activation, Autoencoder, ErrorList, Layer, LayerGrad, PerfectModel,
    TrainConfig, TrainReport,
};
pub use dataset::{
    gen_binary_logic, gen_linear_artificial, inject_noise_feature, iqr_threshold, load_csv, minmax_normalize,
    sample_background, save_csv, BackgroundSet, Dataset, NormStats,
};
pub use error::{Error, Result};
pub use explainer::{
    build_explanatory_feature_set, explain_instance, explain_total_error, select_explainers, shap_for_top_features,
    split_contrib_offset, top_m_features, ExplainConfig, Explanation, ExplanatoryFeatureSet, FeatureExplanation,
    Method, Selection,
};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type NormStats64 = NormStats<f64>;
pub type BackgroundSet64 = BackgroundSet<f64>;
pub type Autoencoder64 = Autoencoder<f64>;
pub type ErrorList64 = ErrorList<f64>;
pub type Attribution64 = Attribution<f64>;
pub type Explanation64 = Explanation<f64>;

pub type Dataset32 = Dataset<f32>;
pub type Autoencoder32 = Autoencoder<f32>;
pub type Attribution32 = Attribution<f32>;
pub type Explanation32 = Explanation<f32>;
