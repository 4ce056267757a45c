//! Track embeddings and the evaluation tasks: nearest-neighbour artist
//! classification, verification EER, and homonym clustering scored with ARI
//! and AMI under cross-validation.

mod classify;
mod cv;
mod embedding;
mod partition;
mod verify;
mod ward;

pub use classify::{classification_accuracy, classify_nn, model_distance, MatchMode};
pub use cv::{cross_validate, select_threshold, threshold_grid, ClusterGroup, CvReport, FoldResult, GRID_SIZE};
pub use embedding::{
    build_artist_model, mean_on_sphere, read_embeddings, split_references, track_embedding, write_embeddings,
    ArtistModel, TrackEmbedding, UNIT_TOLERANCE,
};
pub use partition::{
    adjusted_mutual_information, adjusted_rand_index, ami_from_labels, ari_from_labels, expected_mutual_information,
    Partition,
};
pub use verify::{compute_eer, verification_scores, Eer, RatePoint, Score};
pub use ward::{flat_clusters, ward_linkage, Dendrogram, Merge};
