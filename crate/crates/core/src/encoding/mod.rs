//! Per-channel GMM codebooks and first-order Fisher vectors.

mod fisher;
mod gmm;
mod pca;

pub use fisher::{concat_channels, fisher_encode, fisher_first_order, ssr_l2_normalize, FisherVector};
pub use fisher::{read_fv_dump, write_fv_dump, FvDump, FV_MAGIC};
pub use gmm::{log_likelihood, posteriors, subsample, train_gmm, GmmCodebook, GmmParams, TrainedGmm};
pub use pca::Pca;
