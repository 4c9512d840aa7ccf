use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::orbital::NodeId;

use super::SimError;

/// What happened. Protocol-specific data travels in `M`.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind<M> {
    TransferComplete(M),
    TrainingComplete(M),
    WindowOpen { sat: NodeId, ground: NodeId },
    WindowClose { sat: NodeId, ground: NodeId },
    EvalCheckpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<M> {
    pub time_s: f64,
    pub seq: u64,
    pub kind: EventKind<M>,
}

struct Entry<M>(Event<M>);

impl<M> PartialEq for Entry<M> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl<M> Eq for Entry<M> {}

impl<M> PartialOrd for Entry<M> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<M> Ord for Entry<M> {
    // Reversed so the max-heap pops the earliest (time, seq).
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.time_s
            .total_cmp(&self.0.time_s)
            .then_with(|| o.0.seq.cmp(&self.0.seq))
    }
}

/// Simulated clock bounded by a horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub now_s: f64,
    pub horizon_s: f64,
}

/// Min-priority queue ordered by `(time, sequence number)`.
pub struct EventQueue<M> {
    heap: BinaryHeap<Entry<M>>,
    next_seq: u64,
    clock: SimClock,
}

impl<M> EventQueue<M> {
    pub fn new(horizon_s: f64) -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            clock: SimClock {
                now_s: 0.0,
                horizon_s,
            },
        }
    }

    pub fn now(&self) -> f64 {
        self.clock.now_s
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues an event. Events dated before the clock are rejected; events
    /// beyond the horizon are accepted but never delivered.
    pub fn schedule(&mut self, time_s: f64, kind: EventKind<M>) -> Result<u64, SimError> {
        if !(time_s >= self.clock.now_s) {
            return Err(SimError::PastEvent {
                time_s,
                now_s: self.clock.now_s,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event { time_s, seq, kind }));
        Ok(seq)
    }

    /// Time of the next deliverable event.
    pub fn peek_time(&self) -> Option<f64> {
        self.heap
            .peek()
            .map(|e| e.0.time_s)
            .filter(|&t| t <= self.clock.horizon_s)
    }

    /// Removes the earliest event and advances the clock to it. Returns
    /// `None` once the queue is empty or the next event lies past the horizon.
    pub fn pop(&mut self) -> Option<Event<M>> {
        self.peek_time()?;
        let ev = self.heap.pop()?.0;
        self.clock.now_s = ev.time_s;
        Some(ev)
    }
}
