//! Evaluation harnesses: ground-truth correctness on known feature
//! dependencies, robustness to an injected noise feature (MRR, SHAP vs
//! LIME), and anomaly-score reduction by explanation-guided substitution.

mod correctness;
mod effectiveness;
mod robustness;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use correctness::{
    eval_correctness, eval_correctness_binary, expected_explanation_set, BinaryCorrectnessConfig,
    BinaryCorrectnessReport, CorrectnessConfig, CorrectnessReport, ExpectedExplanation, Mismatch,
};
pub use effectiveness::{
    eval_effectiveness, eval_effectiveness_synthetic, EffectivenessConfig, EffectivenessReport, MethodScores,
    NamedTest, PolicyScores, SetMethod, SyntheticEffectivenessConfig,
};
pub use robustness::{eval_robustness, RobustnessCell, RobustnessConfig, RobustnessReport};
pub use stats::{paired_t_test, TTest};

use crate::autoencoder::Autoencoder;
use crate::error::{Error, Result};
use crate::explainer::ExplanatoryFeatureSet;
use crate::scalar::Scalar;

/// Reciprocal of the 1-based rank of `feature` in the set; 0 when absent.
pub fn mrr_of_feature(set: &ExplanatoryFeatureSet, feature: usize) -> f64 {
    set.position(feature).map_or(0.0, |r| 1.0 / r as f64)
}

/// Replacement value for substituted features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Dataset mean of the feature.
    Mean,
    /// The autoencoder's reconstruction of the unmodified instance.
    Predicted,
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::Mean, Policy::Predicted];
}

pub struct SubstitutionContext<'a, T> {
    pub means: &'a [T],
    pub model: &'a Autoencoder<T>,
}

pub fn substitute_values<T: Scalar>(
    x: &[T],
    features: &[usize],
    policy: Policy,
    ctx: &SubstitutionContext<'_, T>,
) -> Result<Vec<T>> {
    if let Some(&bad) = features.iter().find(|&&f| f >= x.len()) {
        return Err(Error::InvalidIndex {
            index: bad,
            len: x.len(),
        });
    }
    let source: Vec<T> = match policy {
        Policy::Mean => {
            if ctx.means.len() != x.len() {
                return Err(Error::WidthMismatch {
                    expected: x.len(),
                    actual: ctx.means.len(),
                });
            }
            ctx.means.to_vec()
        }
        Policy::Predicted => {
            if features.is_empty() {
                return Ok(x.to_vec());
            }
            ctx.model.forward(x)?
        }
    };
    let mut out = x.to_vec();
    for &f in features {
        out[f] = source[f];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{perfect_linear_ae, PerfectModel};

    fn set(features: Vec<usize>) -> ExplanatoryFeatureSet {
        ExplanatoryFeatureSet {
            provenance: features.clone(),
            features,
        }
    }

    #[test]
    fn mrr_definition() {
        let s = set(vec![7, 2, 9]);
        assert_eq!(mrr_of_feature(&s, 7), 1.0);
        assert_eq!(mrr_of_feature(&s, 9), 1.0 / 3.0);
        assert_eq!(mrr_of_feature(&s, 4), 0.0);
    }

    #[test]
    fn substitution() {
        let m = perfect_linear_ae::<f64>(PerfectModel::Model1);
        let means = [0.5, 0.5, 0.5, 0.5, 1.0, 1.0];
        let ctx = SubstitutionContext {
            means: &means,
            model: &m,
        };
        let x = [0.447, 0.608, 0.445, 0.869, 0.34, 1.314];
        assert_eq!(substitute_values(&x, &[], Policy::Mean, &ctx).unwrap(), x.to_vec());
        assert_eq!(substitute_values(&x, &[], Policy::Predicted, &ctx).unwrap(), x.to_vec());

        let fixed = substitute_values(&x, &[4], Policy::Predicted, &ctx).unwrap();
        assert_eq!(m.anomaly_score(&fixed).unwrap(), 0.0);

        let at_mean = [0.5, 0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(
            substitute_values(&at_mean, &[0], Policy::Mean, &ctx).unwrap(),
            at_mean.to_vec()
        );
        assert!(substitute_values(&x, &[6], Policy::Mean, &ctx).is_err());
    }
}
