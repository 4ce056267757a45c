use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::ManifestRecord;
use crate::error::{Error, Result};

/// Distinct artists sharing one name, to be told apart by clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct HomonymGroup {
    pub group_id: String,
    pub artists: Vec<String>,
    pub tracks: Vec<ManifestRecord>,
}

pub const MIN_GROUP: usize = 2;
pub const MAX_GROUP: usize = 4;

/// Reads a `{group_id: [artist_id, ...]}` JSON map.
pub fn load_group_map(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Collects each group's tracks from the manifest, in manifest order.
pub fn build_homonym_groups(
    records: &[ManifestRecord],
    group_map: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<HomonymGroup>> {
    let mut by_artist: BTreeMap<&str, Vec<&ManifestRecord>> = BTreeMap::new();
    for r in records {
        by_artist.entry(r.artist_id.as_str()).or_default().push(r);
    }
    let mut claimed = BTreeSet::new();
    let mut out = Vec::with_capacity(group_map.len());
    for (gid, artists) in group_map {
        let distinct: BTreeSet<&String> = artists.iter().collect();
        if distinct.len() != artists.len() {
            return Err(Error::Validation(format!("group {gid:?} lists an artist twice")));
        }
        if !(MIN_GROUP..=MAX_GROUP).contains(&artists.len()) {
            return Err(Error::Validation(format!(
                "group {gid:?} has {} artists; groups hold {MIN_GROUP} to {MAX_GROUP}",
                artists.len()
            )));
        }
        let mut tracks = Vec::new();
        for a in artists {
            if !claimed.insert(a.as_str()) {
                return Err(Error::Validation(format!("artist {a:?} appears in more than one group")));
            }
            let ts = by_artist
                .get(a.as_str())
                .ok_or_else(|| Error::Validation(format!("group {gid:?}: artist {a:?} has no tracks in the manifest")))?;
            tracks.extend(ts.iter().map(|&r| r.clone()));
        }
        out.push(HomonymGroup {
            group_id: gid.clone(),
            artists: artists.clone(),
            tracks,
        });
    }
    Ok(out)
}
