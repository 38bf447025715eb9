//! Short-text clustering toolkit.

pub mod config;
pub mod corpus;
pub mod fuzzymatch;
pub mod hac;
pub mod metrics;
pub mod pipeline;
pub mod selection;
pub mod tweet2vec;
pub mod tweetterm;

pub use config::{PipelineConfig, Representation};
pub use corpus::{Corpus, GroundTruth, IntervalSpec, Tweet};
pub use hac::{Dendrogram, DistanceMatrix, Linkage, Metric};
pub use tweetterm::TermMatrix;
