use serde::Serialize;

use super::ProtocolError;

/// Parameter servers in ring order. The source is the lowest node ID and the
/// sink the node farthest from it along the ring. The model travels from
/// the source along both arms of the ring towards the sink; partials travel
/// back along the same arms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ServerRing {
    nodes: Vec<u16>,
    sink_index: usize,
}

impl ServerRing {
    pub fn new(mut nodes: Vec<u16>) -> Result<Self, ProtocolError> {
        if nodes.is_empty() {
            return Err(ProtocolError::Config("server ring is empty".into()));
        }
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(ProtocolError::Config("duplicate server in ring".into()));
        }
        let sink_index = nodes.len() / 2;
        Ok(Self { nodes, sink_index })
    }

    pub fn nodes(&self) -> &[u16] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn source(&self) -> u16 {
        self.nodes[0]
    }

    pub fn sink(&self) -> u16 {
        self.nodes[self.sink_index]
    }

    pub fn contains(&self, id: u16) -> bool {
        self.nodes.binary_search(&id).is_ok()
    }

    fn index(&self, id: u16) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    /// Nodes that receive the global model from `id` during dissemination.
    pub fn forward_next(&self, id: u16) -> Vec<u16> {
        let (h, s) = (self.nodes.len(), self.sink_index);
        let Some(i) = self.index(id) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if i == 0 {
            if h > 1 {
                out.push(self.nodes[1]);
            }
            if h - 1 > s {
                out.push(self.nodes[h - 1]);
            }
        } else if i < s {
            out.push(self.nodes[i + 1]);
        } else if i > s + 1 {
            out.push(self.nodes[i - 1]);
        }
        out
    }

    /// Next hop of `id`'s partial collection towards the source.
    pub fn reverse_next(&self, id: u16) -> Option<u16> {
        let i = self.index(id)?;
        if i == 0 {
            None
        } else if i <= self.sink_index {
            Some(self.nodes[i - 1])
        } else {
            Some(self.nodes[(i + 1) % self.nodes.len()])
        }
    }

    /// Nodes that start reverse collection: the two arm ends.
    pub fn reverse_leaves(&self) -> Vec<u16> {
        let (h, s) = (self.nodes.len(), self.sink_index);
        if h == 1 {
            return Vec::new();
        }
        let mut out = vec![self.nodes[s]];
        if s + 1 < h {
            out.push(self.nodes[s + 1]);
        }
        out
    }

    /// Number of upstream collections `id` waits for before forwarding.
    pub fn reverse_inputs(&self, id: u16) -> usize {
        self.nodes
            .iter()
            .filter(|&&n| n != id && self.reverse_next(n) == Some(id))
            .count()
    }
}
