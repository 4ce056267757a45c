//! Manifests, split and balancing policies, homonym groups and the
//! synthetic artist generator.

mod balance;
mod groups;
mod manifest;
mod split;
mod synth;

pub use balance::{balance_cut, balance_repeat};
pub use groups::{build_homonym_groups, load_group_map, HomonymGroup, MAX_GROUP, MIN_GROUP};
pub use manifest::{load_manifest, resolve_audio_path, save_manifest, validate_records, ManifestRecord};
pub use split::{largest_remainder, split_album_level, split_artist_level};
pub use synth::{generate_synthetic, render_track, ArtistSignature, SyntheticConfig, SyntheticDataset};
