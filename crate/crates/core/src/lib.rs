//! Segmentation of mixed text + categorical + count records.
//!
//! The pipeline has three stages: free-text summaries are preprocessed into a
//! bag-of-words corpus and clustered into latent topics ([`lda`]), the hard
//! topic assignments join the declared categorical columns as split-candidate
//! variables, and a model tree recursively partitions the records into
//! segments with a local negative binomial fit in each leaf ([`mobtree`],
//! [`negbin`]). The [`validate`] module assesses segment stability under
//! resampling and the fit of the local models.

pub mod corpus;
pub mod error;
pub mod lda;
pub mod mobtree;
pub mod negbin;
pub mod numeric;
pub mod validate;

pub use corpus::{DocTermCounts, Report, StopList, Vocabulary};
pub use error::{Error, Result};
pub use lda::{DocPosterior, LdaConfig, LdaModel};
pub use mobtree::{Dataset, NodeId, SegmentRow, SplitData, SplitVariable, Tree, TreeConfig};
pub use negbin::{NbFit, NbParams};
pub use validate::{MatchResult, ResamplePlan, Scheme, StabilitySummary};
