//! Uniform-replay ring buffer for DQN. State vectors are stored as f32 to
//! keep a 100k-capacity buffer small; they are exact for the scaled state
//! encoding and widened back to f64 when a batch is assembled.

use alb_sim::ActionMask;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct StoredTransition {
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f32>,
    pub done: bool,
    pub mask: ActionMask,
    pub next_mask: ActionMask,
}

#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: Vec<StoredTransition>,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { capacity, slots: Vec::new(), write: 0 }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, transition: StoredTransition) {
        if self.slots.len() < self.capacity {
            self.slots.push(transition);
        } else {
            self.slots[self.write] = transition;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    /// Uniform sample of `batch` distinct transitions.
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut impl Rng) -> Vec<&'a StoredTransition> {
        assert!(self.slots.len() >= batch, "not enough transitions buffered");
        rand::seq::index::sample(rng, self.slots.len(), batch)
            .into_iter()
            .map(|i| &self.slots[i])
            .collect()
    }
}
