//! Chain-wise partial aggregation, duplicate filtering and the global
//! weighted average.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::orbital::SatId;

use super::{LearningError, ModelVector};

/// Convex combination of local models from one orbit, accumulated along a
/// chain of satellites.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialModel {
    pub model: ModelVector,
    /// Contributors in join order.
    pub covered: Vec<SatId>,
    pub covered_mass: u64,
    pub orbit: u16,
}

impl PartialModel {
    /// Partial holding only the entry satellite's local model.
    pub fn start(sat: SatId, local: ModelVector, n_local: u64) -> Result<Self, LearningError> {
        if n_local == 0 {
            return Err(LearningError::InvalidAggregation("n_local must be > 0".into()));
        }
        Ok(Self {
            model: local,
            covered: vec![sat],
            covered_mass: n_local,
            orbit: sat.orbit,
        })
    }

    pub fn contains(&self, sat: SatId) -> bool {
        self.covered.contains(&sat)
    }

    /// Folds one more local model in place with `γ = n_local / orbit_mass`.
    pub fn absorb(
        &mut self,
        sat: SatId,
        local: &ModelVector,
        n_local: u64,
        orbit_mass: u64,
    ) -> Result<(), LearningError> {
        if sat.orbit != self.orbit {
            return Err(LearningError::WrongOrbit {
                expected: self.orbit,
                sat,
            });
        }
        if self.contains(sat) {
            return Err(LearningError::DuplicateSatellite(sat));
        }
        if n_local == 0 || orbit_mass < n_local {
            return Err(LearningError::InvalidAggregation(format!(
                "need 0 < n_local ({n_local}) <= orbit mass ({orbit_mass})"
            )));
        }
        if local.len() != self.model.len() {
            return Err(LearningError::Shape("local model length differs from partial".into()));
        }
        let gamma = n_local as f64 / orbit_mass as f64;
        self.model.mix_in(local, gamma);
        self.covered.push(sat);
        self.covered_mass += n_local;
        Ok(())
    }
}

/// `(1−γ)·carried + γ·local`, `γ = n_local / m` with `m` the orbit's total
/// data mass.
pub fn partial_aggregate(
    carried: &PartialModel,
    sat: SatId,
    local: &ModelVector,
    n_local: u64,
    orbit_mass: u64,
) -> Result<PartialModel, LearningError> {
    let mut out = carried.clone();
    out.absorb(sat, local, n_local, orbit_mass)?;
    Ok(out)
}

/// A partial that survived filtering, weighted by the mass of the
/// satellites it is first to cover.
#[derive(Debug, Clone, PartialEq)]
pub struct KeptPartial {
    pub partial: PartialModel,
    pub effective_mass: u64,
    /// Satellites this partial shares with earlier kept partials.
    pub overlap: Vec<SatId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CoverageReport {
    /// Satellites absent from every kept partial, per orbit.
    pub missing: BTreeMap<u16, Vec<SatId>>,
    /// Satellites covered by more than one kept partial.
    pub overlaps: Vec<SatId>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn missing_ids(&self) -> Vec<SatId> {
        self.missing.values().flatten().copied().collect()
    }

    pub fn missing_orbits(&self) -> Vec<u16> {
        self.missing.keys().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilteredCollection {
    pub kept: Vec<KeptPartial>,
    pub dropped: usize,
    pub report: CoverageReport,
}

/// Single pass in receipt order: a partial whose satellites are all covered
/// by earlier kept partials is dropped; otherwise it is kept and credited
/// with the mass of its not-yet-covered satellites. `masses` lists every
/// satellite of the constellation with its data size.
pub fn organize_and_filter(
    received: &[PartialModel],
    masses: &BTreeMap<SatId, u64>,
) -> Result<FilteredCollection, LearningError> {
    let mut covered: BTreeSet<SatId> = BTreeSet::new();
    let mut out = FilteredCollection::default();
    let mut overlaps = BTreeSet::new();
    for p in received {
        if p.covered.is_empty() {
            return Err(LearningError::InvalidAggregation("partial covers no satellite".into()));
        }
        let mut fresh_mass = 0;
        let mut fresh = Vec::new();
        let mut overlap = Vec::new();
        for &sat in &p.covered {
            if sat.orbit != p.orbit {
                return Err(LearningError::WrongOrbit {
                    expected: p.orbit,
                    sat,
                });
            }
            let m = *masses.get(&sat).ok_or_else(|| {
                LearningError::InvalidAggregation(format!("unknown satellite {sat}"))
            })?;
            if covered.contains(&sat) {
                overlap.push(sat);
            } else {
                fresh.push(sat);
                fresh_mass += m;
            }
        }
        if fresh.is_empty() {
            out.dropped += 1;
            continue;
        }
        covered.extend(fresh);
        overlaps.extend(overlap.iter().copied());
        out.kept.push(KeptPartial {
            partial: p.clone(),
            effective_mass: fresh_mass,
            overlap,
        });
    }
    for &sat in masses.keys() {
        if !covered.contains(&sat) {
            out.report.missing.entry(sat.orbit).or_default().push(sat);
        }
    }
    out.report.overlaps = overlaps.into_iter().collect();
    Ok(out)
}

/// Weighted sum of kept partials, each weighted by its effective mass over
/// the total constellation mass. Incomplete coverage yields
/// [`LearningError::Reschedule`].
pub fn global_aggregate(
    filtered: &FilteredCollection,
) -> Result<(ModelVector, Vec<f64>), LearningError> {
    if !filtered.report.is_complete() {
        return Err(LearningError::Reschedule {
            missing: filtered.report.missing_ids(),
        });
    }
    let total: u64 = filtered.kept.iter().map(|k| k.effective_mass).sum();
    if total == 0 {
        return Err(LearningError::Empty("partial collection"));
    }
    let len = filtered.kept[0].partial.model.len();
    let mut out = vec![0.0; len];
    let mut weights = Vec::with_capacity(filtered.kept.len());
    for k in &filtered.kept {
        if k.partial.model.len() != len {
            return Err(LearningError::Shape("partials differ in length".into()));
        }
        let w = k.effective_mass as f64 / total as f64;
        for (o, v) in out.iter_mut().zip(&k.partial.model.values) {
            *o += w * v;
        }
        weights.push(w);
    }
    let model = ModelVector::new(out);
    if !model.is_finite() {
        return Err(LearningError::NonFinite { step: 0 });
    }
    Ok((model, weights))
}

/// Data-size-weighted average `Σ (n_k/n) w_k`.
pub fn fedavg(models: &[(&ModelVector, u64)]) -> Result<ModelVector, LearningError> {
    let n: u64 = models.iter().map(|(_, m)| m).sum();
    if models.is_empty() || n == 0 {
        return Err(LearningError::Empty("model set"));
    }
    let len = models[0].0.len();
    let mut out = vec![0.0; len];
    for (m, nk) in models {
        if m.len() != len {
            return Err(LearningError::Shape("models differ in length".into()));
        }
        let w = *nk as f64 / n as f64;
        for (o, v) in out.iter_mut().zip(&m.values) {
            *o += w * v;
        }
    }
    Ok(ModelVector::new(out))
}

/// `(1−η)·w + η·w_k`.
pub fn blend(w: &ModelVector, wk: &ModelVector, eta: f64) -> Result<ModelVector, LearningError> {
    if w.len() != wk.len() {
        return Err(LearningError::Shape("models differ in length".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(LearningError::InvalidAggregation(format!("blend factor {eta} outside [0, 1]")));
    }
    let mut out = w.clone();
    out.mix_in(wk, eta);
    Ok(out)
}
