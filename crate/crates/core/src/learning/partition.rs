use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::orbital::{ConstellationSpec, SatId};

use super::{DataShard, Dataset, LearningError};

/// Classes held by the low group of orbits in the label-skewed split.
pub const NONIID_LOW_CLASSES: std::ops::Range<u8> = 0..6;

/// Number of orbits (in index order) that receive the low classes:
/// `⌈0.6 L⌉` (three of five), capped at `L − 1` so the high group is never
/// empty.
pub fn noniid_low_orbit_count(orbits: usize) -> usize {
    (orbits * 3).div_ceil(5).min(orbits.saturating_sub(1))
}

/// Splits `indices` into `sats.len()` consecutive runs of equal size (±1).
fn deal(
    data: &Dataset,
    indices: &[usize],
    sats: &[SatId],
) -> Result<Vec<DataShard>, LearningError> {
    let k = sats.len();
    let base = indices.len() / k;
    let extra = indices.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for (i, &sat) in sats.iter().enumerate() {
        let len = base + usize::from(i < extra);
        out.push(DataShard::new(sat, data.subset(&indices[start..start + len]))?);
        start += len;
    }
    Ok(out)
}

fn take(indices: &mut Vec<usize>, sats: usize, per_satellite: Option<usize>) {
    if let Some(cap) = per_satellite {
        indices.truncate(cap * sats);
    }
}

/// Shuffles and deals the dataset equally among `sats`. With
/// `per_satellite` set, only the first `cap × K` shuffled samples are used.
pub fn partition_iid(
    data: &Dataset,
    sats: &[SatId],
    seed: u64,
    per_satellite: Option<usize>,
) -> Result<Vec<DataShard>, LearningError> {
    if sats.is_empty() {
        return Err(LearningError::Partition("no satellites".into()));
    }
    let need = per_satellite.map_or(sats.len(), |c| c * sats.len());
    if data.len() < need.max(sats.len()) {
        return Err(LearningError::Partition(format!(
            "{} samples cannot fill {} satellites",
            data.len(),
            sats.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    take(&mut idx, sats.len(), per_satellite);
    deal(data, &idx, sats)
}

/// Label-skewed split: the first `⌈0.6 L⌉` orbits share classes 0–5, the
/// remaining orbits share classes 6–9, each group dealt IID.
pub fn partition_noniid(
    data: &Dataset,
    constellation: &ConstellationSpec,
    seed: u64,
    per_satellite: Option<usize>,
) -> Result<Vec<DataShard>, LearningError> {
    let mut orbits: Vec<u16> = constellation.orbits.iter().map(|o| o.orbit_index).collect();
    orbits.sort_unstable();
    if orbits.len() < 2 {
        return Err(LearningError::Partition(
            "label-skewed split needs at least two orbits".into(),
        ));
    }
    let n_low = noniid_low_orbit_count(orbits.len());
    let members = |os: &[u16]| -> Vec<SatId> {
        os.iter().flat_map(|&o| constellation.orbit_members(o)).collect()
    };
    let low_sats = members(&orbits[..n_low]);
    let high_sats = members(&orbits[n_low..]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut low: Vec<usize> = Vec::new();
    let mut high: Vec<usize> = Vec::new();
    for (i, &y) in data.labels().iter().enumerate() {
        if NONIID_LOW_CLASSES.contains(&y) {
            low.push(i);
        } else {
            high.push(i);
        }
    }
    let mut shards = Vec::with_capacity(low_sats.len() + high_sats.len());
    for (mut idx, sats, group) in [(low, low_sats, "0-5"), (high, high_sats, "6-9")] {
        let need = per_satellite.map_or(sats.len(), |c| c * sats.len()).max(sats.len());
        if idx.len() < need {
            return Err(LearningError::Partition(format!(
                "classes {group}: {} samples cannot fill {} satellites",
                idx.len(),
                sats.len()
            )));
        }
        idx.shuffle(&mut rng);
        take(&mut idx, sats.len(), per_satellite);
        shards.extend(deal(data, &idx, &sats)?);
    }
    shards.sort_by_key(|s| s.owner);
    Ok(shards)
}
