//! Random forest over LLM-extracted categorical features.

pub mod categories;
pub mod extract;
pub mod forest;
pub mod metrics;
pub mod tree;

pub use categories::{decode, encode, CategoricalFeatures, Category, CategoryValue, EncodedVector};
pub use extract::{extract_categories, Extraction};
pub use forest::{
    stratified_split, train_forest, Forest, ForestConfig, ForestError, ForestPrediction, Predictor,
};
pub use metrics::{
    classification_report, skewed_eval, ClassificationReport, ConfusionMatrix, MetricsError,
};
pub use tree::{DecisionTree, Node, TreeConfig};
