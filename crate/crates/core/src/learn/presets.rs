//! Named learner configurations and a model type that wraps either learner.

use serde::{Deserialize, Serialize};

use super::gbdt::{gbdt_predict, gbdt_train, GbdtConfig, GbdtModel, Objective};
use super::mlp::{mlp_predict, mlp_train, Activation, LayerSpec, Loss, MlpConfig, MlpModel, Optimizer};
use super::{check_schema, LearnError};
use crate::features::{degree_schema_id, graph_svd_schema_id, lp_svd_schema_id, FeatureVector, LP_BAG};
use crate::linalg::Matrix;

pub const LP_CLASSES: usize = 5;
pub const APSP_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum ModelConfig {
    Gbdt(GbdtConfig),
    Mlp(MlpConfig),
}

/// What a preset learns from an instance's cost record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresetTarget {
    /// Class id of the cheapest portfolio member.
    BestClass,
    /// Cost of the portfolio member with this key, optionally on a log scale.
    Cost { algorithm: String, log: bool },
}

impl PresetTarget {
    pub fn encode(&self, cost: f64) -> f64 {
        match self {
            PresetTarget::Cost { log: true, .. } => cost.max(1e-12).ln(),
            _ => cost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub schema_id: String,
    pub target: PresetTarget,
    pub config: ModelConfig,
}

impl Preset {
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self.config {
            ModelConfig::Gbdt(c) => c.seed = seed,
            ModelConfig::Mlp(c) => c.seed = seed,
        }
        self
    }

    pub fn is_lp(&self) -> bool {
        self.name.starts_with("lp-")
    }

    pub fn train(&self, x: &Matrix, y: &[f64]) -> Result<Model, LearnError> {
        Ok(match &self.config {
            ModelConfig::Gbdt(c) => Model::Gbdt(gbdt_train(c, x, y)?.with_schema(&self.schema_id)),
            ModelConfig::Mlp(c) => Model::Mlp(mlp_train(c, x, y)?.with_schema(&self.schema_id)),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn table_one(rule: &str, lr: f64, trees: usize, depth: usize, mcw: f64, gamma: f64, sub: f64, col: f64, alpha: f64) -> Preset {
    Preset {
        name: format!("lp-gbdt-{rule}"),
        schema_id: LP_BAG.to_string(),
        target: PresetTarget::Cost { algorithm: rule.to_string(), log: false },
        config: ModelConfig::Gbdt(GbdtConfig {
            learning_rate: lr,
            n_estimators: trees,
            max_depth: depth,
            min_child_weight: mcw,
            gamma,
            subsample: sub,
            colsample: col,
            reg_alpha: alpha,
            ..GbdtConfig::default()
        }),
    }
}

fn dense(units: &[(usize, Activation)], dropout: f64, output: LayerSpec) -> Vec<LayerSpec> {
    let mut layers: Vec<LayerSpec> = units.iter().map(|&(u, a)| LayerSpec::new(u, a, dropout)).collect();
    layers.push(output);
    layers
}

fn classifier_nn(name: &str, schema_id: String, layers: Vec<LayerSpec>, optimizer: Optimizer, epochs: usize) -> Preset {
    Preset {
        name: name.to_string(),
        schema_id,
        target: PresetTarget::BestClass,
        config: ModelConfig::Mlp(MlpConfig {
            layers,
            loss: Loss::CategoricalCrossEntropy,
            optimizer,
            batch_size: 64,
            epochs,
            seed: 0,
            validation_split: 0.1,
        }),
    }
}

fn classifier_tree(name: &str, schema_id: String, cfg: GbdtConfig) -> Preset {
    Preset { name: name.to_string(), schema_id, target: PresetTarget::BestClass, config: ModelConfig::Gbdt(cfg) }
}

/// Every named preset, LP presets first.
pub fn all_presets() -> Vec<Preset> {
    use Activation::{Elu, Relu, Sigmoid, Softmax};
    let mut presets = vec![
        table_one("dantzig", 0.1, 271, 5, 6.0, 0.0, 1.0, 1.0, 100.0),
        table_one("hybrid", 0.1, 137, 6, 6.0, 0.0, 0.8, 1.0, 10.0),
        table_one("devex", 0.1, 173, 4, 5.0, 0.0, 0.8, 1.0, 1e-5),
        table_one("steepest", 0.1, 173, 6, 4.0, 0.0, 0.9, 0.8, 100.0),
        table_one("greatest", 0.05, 371, 6, 1.0, 0.3, 0.8, 0.9, 1e-5),
        classifier_tree(
            "lp-gbdt-svd-classifier",
            lp_svd_schema_id(20),
            GbdtConfig {
                learning_rate: 0.1,
                n_estimators: 102,
                max_depth: 5,
                min_child_weight: 5.0,
                subsample: 0.8,
                colsample: 0.8,
                objective: Objective::SoftmaxCrossEntropy { classes: LP_CLASSES },
                ..GbdtConfig::default()
            },
        ),
        classifier_nn(
            "lp-nn-bag",
            LP_BAG.to_string(),
            dense(&[(64, Relu); 4], 0.1, LayerSpec::new(LP_CLASSES, Softmax, 0.0)),
            Optimizer::rmsprop(0.01, 0.2),
            50,
        ),
        classifier_nn(
            "lp-nn-svd",
            lp_svd_schema_id(20),
            dense(&[(512, Relu); 4], 0.0, LayerSpec::new(LP_CLASSES, Softmax, 0.0)),
            Optimizer::adam(0.001),
            100,
        ),
    ];
    for alg in ["dijkstra", "peng", "floyd_warshall"] {
        presets.push(Preset {
            name: format!("apsp-nn-runtime-{alg}"),
            schema_id: graph_svd_schema_id(20),
            target: PresetTarget::Cost { algorithm: alg.to_string(), log: true },
            config: ModelConfig::Mlp(MlpConfig {
                layers: dense(
                    &[(512, Elu), (256, Relu), (256, Relu), (256, Relu)],
                    0.25,
                    LayerSpec::new(1, Activation::Identity, 0.0),
                ),
                loss: Loss::MeanSquaredError,
                optimizer: Optimizer::adam(0.001),
                batch_size: 64,
                epochs: 100,
                seed: 0,
                validation_split: 0.1,
            }),
        });
    }
    presets.extend([
        classifier_nn(
            "apsp-nn-svd",
            graph_svd_schema_id(20),
            dense(&[(128, Elu), (128, Sigmoid), (128, Sigmoid), (128, Sigmoid), (128, Sigmoid)], 0.5, LayerSpec::new(APSP_CLASSES, Softmax, 0.0)),
            Optimizer::adam(0.001),
            300,
        ),
        classifier_nn(
            "apsp-nn-degree",
            degree_schema_id(50),
            dense(&[(128, Elu), (64, Sigmoid)], 0.5, LayerSpec::new(APSP_CLASSES, Softmax, 0.0)),
            Optimizer::adam(0.001),
            300,
        ),
        classifier_tree(
            "apsp-gbdt-svd",
            graph_svd_schema_id(5),
            GbdtConfig {
                learning_rate: 0.1,
                n_estimators: 64,
                max_depth: 6,
                min_child_weight: 1.0,
                objective: Objective::SoftmaxCrossEntropy { classes: APSP_CLASSES },
                ..GbdtConfig::default()
            },
        ),
        classifier_tree(
            "apsp-gbdt-degree",
            degree_schema_id(50),
            GbdtConfig {
                learning_rate: 0.1,
                n_estimators: 32,
                max_depth: 8,
                min_child_weight: 1.0,
                objective: Objective::SoftmaxCrossEntropy { classes: APSP_CLASSES },
                ..GbdtConfig::default()
            },
        ),
    ]);
    presets
}

pub fn preset(name: &str) -> Result<Preset, LearnError> {
    all_presets().into_iter().find(|p| p.name == name).ok_or_else(|| LearnError::UnknownPreset(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Model {
    Gbdt(GbdtModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn schema_id(&self) -> Option<&str> {
        match self {
            Model::Gbdt(m) => m.schema_id.as_deref(),
            Model::Mlp(m) => m.schema_id.as_deref(),
        }
    }

    pub fn is_classifier(&self) -> bool {
        match self {
            Model::Gbdt(m) => m.is_classifier(),
            Model::Mlp(m) => m.config.is_classifier(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix, LearnError> {
        match self {
            Model::Gbdt(m) => gbdt_predict(m, x),
            Model::Mlp(m) => mlp_predict(m, x),
        }
    }

    /// Predicts on feature vectors after checking that each carries the
    /// model's schema.
    pub fn predict_features(&self, features: &[FeatureVector]) -> Result<Matrix, LearnError> {
        for fv in features {
            check_schema(self.schema_id(), Some(&fv.schema_id))?;
        }
        let cols = features.first().map_or(0, |f| f.len());
        let data: Vec<f64> = features.iter().flat_map(|f| f.values.iter().copied()).collect();
        let x = Matrix::from_vec(features.len(), cols, data)
            .map_err(|_| LearnError::FeatureCount { expected: cols, found: data_len_mismatch(features, cols) })?;
        self.predict(&x)
    }

    /// Per-round (GBDT) or per-epoch (MLP) training curve as JSON.
    pub fn history_json(&self) -> serde_json::Value {
        match self {
            Model::Gbdt(m) => serde_json::json!({
                "initial_loss": m.initial_loss,
                "train_loss": m.train_loss,
            }),
            Model::Mlp(m) => serde_json::json!({ "epochs": m.history }),
        }
    }

    pub fn history_len(&self) -> usize {
        match self {
            Model::Gbdt(m) => m.train_loss.len(),
            Model::Mlp(m) => m.history.len(),
        }
    }
}

fn data_len_mismatch(features: &[FeatureVector], cols: usize) -> usize {
    features.iter().map(|f| f.len()).find(|&l| l != cols).unwrap_or(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::schema;

    #[test]
    fn preset_names_are_unique_and_schemas_resolve() {
        let presets = all_presets();
        assert_eq!(presets.len(), 15);
        let mut names: Vec<&str> = presets.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), presets.len());
        for p in &presets {
            schema(&p.schema_id).unwrap();
            match &p.config {
                ModelConfig::Gbdt(c) => c.validate().unwrap(),
                ModelConfig::Mlp(c) => c.validate().unwrap(),
            }
        }
    }

    #[test]
    fn table_one_values() {
        let ModelConfig::Gbdt(c) = preset("lp-gbdt-dantzig").unwrap().config else { panic!() };
        assert_eq!(
            (c.learning_rate, c.n_estimators, c.max_depth, c.min_child_weight, c.gamma, c.subsample, c.colsample, c.reg_alpha),
            (0.1, 271, 5, 6.0, 0.0, 1.0, 1.0, 100.0)
        );
        let ModelConfig::Gbdt(c) = preset("lp-gbdt-greatest").unwrap().config else { panic!() };
        assert_eq!(
            (c.learning_rate, c.n_estimators, c.max_depth, c.min_child_weight, c.gamma, c.subsample, c.colsample, c.reg_alpha),
            (0.05, 371, 6, 1.0, 0.3, 0.8, 0.9, 1e-5)
        );
        let ModelConfig::Mlp(c) = preset("apsp-nn-svd").unwrap().config else { panic!() };
        assert_eq!(c.layers.len(), 6);
        assert_eq!(c.epochs, 300);
        assert!(preset("nope").is_err());
    }

    #[test]
    fn predict_features_checks_the_schema() {
        let p = classifier_tree(
            "t",
            degree_schema_id(2),
            GbdtConfig { n_estimators: 2, objective: Objective::SoftmaxCrossEntropy { classes: 2 }, ..GbdtConfig::default() },
        );
        let x = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]]).unwrap();
        let model = p.train(&x, &[0.0, 1.0]).unwrap();
        let good = FeatureVector { schema_id: degree_schema_id(2), values: vec![0.0, 1.0, 2.0], flags: vec![] };
        assert_eq!(model.predict_features(&[good.clone()]).unwrap().cols(), 2);
        let bad = FeatureVector { schema_id: degree_schema_id(3), ..good };
        assert!(matches!(model.predict_features(&[bad]), Err(LearnError::SchemaMismatch { .. })));
    }
}
