use std::collections::BTreeMap;

use serde::Serialize;

use crate::links::{LinkClass, LinkConfig, LinkMedium};
use crate::orbital::{ContactIndex, Geometry, GroundKind, NodeId};

use super::SimError;

/// Outcome of a scheduled transfer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferPlan {
    pub src: NodeId,
    pub dst: NodeId,
    pub class: LinkClass,
    pub payload_bits: u64,
    pub requested_s: f64,
    pub start_s: f64,
    pub complete_s: f64,
    pub distance_m: f64,
    /// Attempts cut short by the end of a contact window, `(start, end)`.
    pub aborted: Vec<(f64, f64)>,
}

/// Busy intervals of one half-duplex interface, sorted and disjoint.
#[derive(Debug, Clone, Default)]
struct Reservations(Vec<(f64, f64)>);

impl Reservations {
    /// End of the latest reservation overlapping `[s, e)`, if any.
    fn conflict(&self, s: f64, e: f64) -> Option<f64> {
        let idx = self.0.partition_point(|r| r.0 < e);
        idx.checked_sub(1)
            .map(|i| self.0[i].1)
            .filter(|&end| end > s)
    }

    fn insert(&mut self, s: f64, e: f64) {
        let idx = self.0.partition_point(|r| r.0 < s);
        self.0.insert(idx, (s, e));
    }
}

/// Window-aware transfer scheduler over the contact plan.
#[derive(Debug, Clone)]
pub struct Network {
    geometry: Geometry,
    contacts: ContactIndex,
    links: LinkConfig,
    busy: BTreeMap<NodeId, Reservations>,
}

impl Network {
    pub fn new(geometry: Geometry, contacts: ContactIndex, links: LinkConfig) -> Self {
        Self {
            geometry,
            contacts,
            links,
            busy: BTreeMap::new(),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn contacts(&self) -> &ContactIndex {
        &self.contacts
    }

    pub fn links(&self) -> &LinkConfig {
        &self.links
    }

    fn ground_kind(&self, id: u16) -> Result<GroundKind, SimError> {
        self.geometry
            .ground_node(id)
            .map(|g| g.kind)
            .ok_or(SimError::UnknownNode(NodeId::Ground(id)))
    }

    pub fn link_class(&self, a: NodeId, b: NodeId) -> Result<LinkClass, SimError> {
        Ok(match (a, b) {
            (NodeId::Sat(_), NodeId::Sat(_)) => LinkClass::Isl,
            (NodeId::Ground(x), NodeId::Ground(y)) => {
                self.ground_kind(x)?;
                self.ground_kind(y)?;
                LinkClass::Ihl
            }
            (NodeId::Sat(_), NodeId::Ground(g)) | (NodeId::Ground(g), NodeId::Sat(_)) => {
                match self.ground_kind(g)? {
                    GroundKind::Hap => LinkClass::Shl,
                    GroundKind::Gs => LinkClass::Sgl,
                }
            }
        })
    }

    fn processing_delay(&self, node: NodeId) -> Result<f64, SimError> {
        let p = &self.links.processing;
        Ok(match node {
            NodeId::Sat(_) => p.satellite_s,
            NodeId::Ground(g) => match self.ground_kind(g)? {
                GroundKind::Hap => p.hap_s,
                GroundKind::Gs => p.ground_station_s,
            },
        })
    }

    /// Whether `a` and `b` can exchange data at `t`. Server-to-server links
    /// are always up.
    pub fn is_connected(&self, a: NodeId, b: NodeId, t: f64) -> Result<bool, SimError> {
        Ok(self.link_class(a, b)? == LinkClass::Ihl || self.contacts.is_visible(a, b, t))
    }

    /// Schedules a transfer requested at `t`. The transfer starts at the
    /// first instant both endpoints are in contact and, for optical links,
    /// both interfaces are free. Delay uses the distance at the start time.
    /// A transfer that would outlast its window is aborted at the window end
    /// and retried from the next window. Returns `None` if no window in the
    /// plan can carry it.
    pub fn transmit(
        &mut self,
        src: NodeId,
        dst: NodeId,
        payload_bits: u64,
        t: f64,
    ) -> Result<Option<TransferPlan>, SimError> {
        if src == dst {
            return Err(SimError::Protocol(format!("transfer from {src} to itself")));
        }
        let class = self.link_class(src, dst)?;
        let medium = self.links.media.medium(class);
        let half = medium.half_duplex();
        let windows: Vec<(f64, f64)> = if class == LinkClass::Ihl {
            vec![(t, f64::INFINITY)]
        } else {
            let ws = self.contacts.windows(src, dst);
            let first = ws.partition_point(|w| w.1 < t);
            ws[first..].to_vec()
        };
        let proc_src = self.processing_delay(src)?;
        let proc_dst = self.processing_delay(dst)?;
        let alt = self
            .geometry
            .altitude(src)?
            .min(self.geometry.altitude(dst)?);
        let mut aborted = Vec::new();
        for (ws, we) in windows {
            let mut s = t.max(ws);
            while s <= we {
                let distance = self.geometry.distance(src, dst, s)?;
                let delay = self
                    .links
                    .transfer_delay(
                        medium,
                        payload_bits,
                        distance,
                        alt,
                        proc_src,
                        proc_dst,
                        self.geometry.consts(),
                    )?
                    .total();
                let e = s + delay;
                if half {
                    let c = [src, dst]
                        .iter()
                        .filter_map(|n| self.busy.get(n).and_then(|r| r.conflict(s, e)))
                        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
                    if let Some(free) = c {
                        s = free;
                        continue;
                    }
                }
                let fits = e <= we;
                let end = if fits { e } else { we };
                if half && end > s {
                    for n in [src, dst] {
                        self.busy.entry(n).or_default().insert(s, end);
                    }
                }
                if fits {
                    return Ok(Some(TransferPlan {
                        src,
                        dst,
                        class,
                        payload_bits,
                        requested_s: t,
                        start_s: s,
                        complete_s: e,
                        distance_m: distance,
                        aborted,
                    }));
                }
                aborted.push((s, we));
                break;
            }
        }
        Ok(None)
    }

    pub fn medium(&self, class: LinkClass) -> LinkMedium {
        self.links.media.medium(class)
    }
}
