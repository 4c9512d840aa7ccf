use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Geometry, NodeId, OrbitalError};

/// Interval during which a node pair is mutually visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactWindow {
    pub a: NodeId,
    pub b: NodeId,
    pub start_s: f64,
    pub end_s: f64,
}

/// Sampling and refinement used to locate visibility flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSearch {
    pub step_s: f64,
    pub refine_tol_s: f64,
}

impl Default for WindowSearch {
    fn default() -> Self {
        Self {
            step_s: 10.0,
            refine_tol_s: 0.1,
        }
    }
}

impl WindowSearch {
    pub fn validate(&self) -> Result<(), OrbitalError> {
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            return Err(OrbitalError::InvalidSearch(format!("step_s = {}", self.step_s)));
        }
        if !(self.refine_tol_s > 0.0 && self.refine_tol_s.is_finite()) {
            return Err(OrbitalError::InvalidSearch(format!(
                "refine_tol_s = {}",
                self.refine_tol_s
            )));
        }
        Ok(())
    }
}

/// Visibility windows of one pair over `[t0, t1]`.
///
/// Visibility is sampled every `step_s`; each flip between samples is
/// bisected down to `refine_tol_s`. Reported boundaries are the visible side
/// of each bracket, so `is_visible` holds at both `start_s` and `end_s`.
/// Passes shorter than the step can be missed.
pub fn compute_contact_windows(
    geom: &Geometry,
    a: NodeId,
    b: NodeId,
    t0: f64,
    t1: f64,
    search: WindowSearch,
) -> Result<Vec<ContactWindow>, OrbitalError> {
    search.validate()?;
    if !(t0 < t1) {
        return Err(OrbitalError::InvalidSearch(format!("empty interval [{t0}, {t1}]")));
    }
    let vis = |t: f64| geom.is_visible(a, b, t);
    let refine = |mut lo: f64, mut hi: f64, lo_vis: bool| -> Result<(f64, f64), OrbitalError> {
        while hi - lo > search.refine_tol_s {
            let mid = 0.5 * (lo + hi);
            if vis(mid)? == lo_vis {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, hi))
    };

    let steps = ((t1 - t0) / search.step_s).ceil() as u64;
    let mut windows = Vec::new();
    let mut prev_t = t0;
    let mut prev_vis = vis(t0)?;
    let mut open = prev_vis.then_some(t0);
    for i in 1..=steps {
        let t = if i == steps {
            t1
        } else {
            t0 + i as f64 * search.step_s
        };
        let v = vis(t)?;
        if v != prev_vis {
            let (lo, hi) = refine(prev_t, t, prev_vis)?;
            if v {
                open = Some(hi);
            } else if let Some(start) = open.take() {
                if lo > start {
                    windows.push(ContactWindow {
                        a,
                        b,
                        start_s: start,
                        end_s: lo,
                    });
                }
            }
        }
        prev_t = t;
        prev_vis = v;
    }
    if let Some(start) = open {
        if t1 > start {
            windows.push(ContactWindow {
                a,
                b,
                start_s: start,
                end_s: t1,
            });
        }
    }
    Ok(windows)
}

/// Every contact window of a scenario, sorted by start time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContactPlan {
    pub windows: Vec<ContactWindow>,
}

impl ContactPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.windows).expect("contact windows serialize")
    }

    /// Parse and validate a contact plan exported by [`ContactPlan::to_json`].
    pub fn from_json(text: &str) -> Result<Self, String> {
        let windows: Vec<ContactWindow> =
            serde_json::from_str(text).map_err(|e| e.to_string())?;
        for (i, w) in windows.iter().enumerate() {
            if !(w.start_s.is_finite() && w.end_s.is_finite() && w.start_s < w.end_s) {
                return Err(format!("window {i}: start_s must precede end_s"));
            }
            if w.a == w.b {
                return Err(format!("window {i}: node {} paired with itself", w.a));
            }
        }
        Ok(Self { windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Contact plan over `[t0, t1]` for every satellite–server pair and every
/// intra-orbit neighbour pair. Server-tier pairs are always connected and
/// carry no windows.
pub fn compute_contact_plan(
    geom: &Geometry,
    t0: f64,
    t1: f64,
    search: WindowSearch,
) -> Result<ContactPlan, OrbitalError> {
    let constellation = geom.constellation();
    let mut pairs = Vec::new();
    for sat in constellation.satellites() {
        for g in geom.ground_nodes() {
            pairs.push((NodeId::Sat(sat), NodeId::Ground(g.node_id)));
        }
        for dir in [super::Direction::Clockwise, super::Direction::CounterClockwise] {
            if let Some(n) = constellation.ring_neighbor(sat, dir) {
                if n > sat {
                    pairs.push((NodeId::Sat(sat), NodeId::Sat(n)));
                }
            }
        }
    }
    pairs.sort();
    pairs.dedup();
    let mut windows = Vec::new();
    for (a, b) in pairs {
        windows.extend(compute_contact_windows(geom, a, b, t0, t1, search)?);
    }
    windows.sort_by(|x, y| {
        x.start_s
            .total_cmp(&y.start_s)
            .then_with(|| (x.a, x.b).cmp(&(y.a, y.b)))
    });
    Ok(ContactPlan { windows })
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Per-pair lookup over a contact plan.
#[derive(Debug, Clone, Default)]
pub struct ContactIndex {
    by_pair: BTreeMap<(NodeId, NodeId), Vec<(f64, f64)>>,
}

impl ContactIndex {
    pub fn new(plan: &ContactPlan) -> Self {
        Self::from_windows(plan.windows.iter().copied())
    }

    pub fn from_windows(windows: impl IntoIterator<Item = ContactWindow>) -> Self {
        let mut by_pair: BTreeMap<_, Vec<(f64, f64)>> = BTreeMap::new();
        for w in windows {
            by_pair
                .entry(key(w.a, w.b))
                .or_default()
                .push((w.start_s, w.end_s));
        }
        for v in by_pair.values_mut() {
            v.sort_by(|x, y| x.0.total_cmp(&y.0));
        }
        Self { by_pair }
    }

    pub fn windows(&self, a: NodeId, b: NodeId) -> &[(f64, f64)] {
        self.by_pair.get(&key(a, b)).map_or(&[], Vec::as_slice)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.by_pair.keys().copied()
    }

    /// The window containing `t`, if any.
    pub fn window_at(&self, a: NodeId, b: NodeId, t: f64) -> Option<(f64, f64)> {
        let ws = self.windows(a, b);
        let idx = ws.partition_point(|w| w.0 <= t);
        idx.checked_sub(1)
            .map(|i| ws[i])
            .filter(|&(_, end)| t <= end)
    }

    pub fn is_visible(&self, a: NodeId, b: NodeId, t: f64) -> bool {
        self.window_at(a, b, t).is_some()
    }

    /// Time left in the window containing `t`.
    pub fn remaining(&self, a: NodeId, b: NodeId, t: f64) -> Option<f64> {
        self.window_at(a, b, t).map(|(_, end)| end - t)
    }

    /// The window containing `t`, or else the first one starting after it.
    pub fn current_or_next(&self, a: NodeId, b: NodeId, t: f64) -> Option<(f64, f64)> {
        self.window_at(a, b, t).or_else(|| self.next_after(a, b, t))
    }

    /// First window starting strictly after `t`.
    pub fn next_after(&self, a: NodeId, b: NodeId, t: f64) -> Option<(f64, f64)> {
        let ws = self.windows(a, b);
        let idx = ws.partition_point(|w| w.0 <= t);
        ws.get(idx).copied()
    }

    /// Remove visibility between any of `nodes` and every ground node during
    /// `[start, end]`, splitting windows that straddle the outage. Links
    /// between two satellites are left alone.
    pub fn apply_outage(&mut self, nodes: &[NodeId], start: f64, end: f64) {
        for ((a, b), ws) in self.by_pair.iter_mut() {
            let touches = nodes.contains(a) || nodes.contains(b);
            let grounded = a.as_ground().is_some() || b.as_ground().is_some();
            if !touches || !grounded {
                continue;
            }
            let mut out = Vec::with_capacity(ws.len());
            for &(s, e) in ws.iter() {
                if e < start || s > end {
                    out.push((s, e));
                    continue;
                }
                if s < start {
                    out.push((s, start));
                }
                if e > end {
                    out.push((end, e));
                }
            }
            *ws = out;
        }
    }

    pub fn to_plan(&self) -> ContactPlan {
        let mut windows: Vec<_> = self
            .by_pair
            .iter()
            .flat_map(|(&(a, b), ws)| {
                ws.iter().map(move |&(start_s, end_s)| ContactWindow {
                    a,
                    b,
                    start_s,
                    end_s,
                })
            })
            .collect();
        windows.sort_by(|x, y| {
            x.start_s
                .total_cmp(&y.start_s)
                .then_with(|| (x.a, x.b).cmp(&(y.a, y.b)))
        });
        ContactPlan { windows }
    }
}
