use rand::seq::index;
use rand::Rng;

use crate::beams::BeamVector;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// One interaction. The next state is the action itself, so it is not
/// stored separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: BeamVector,
    pub action: BeamVector,
    pub reward: i8,
}

impl Transition {
    pub fn next_state(&self) -> &BeamVector {
        &self.action
    }
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    /// Iterates from the oldest stored transition to the newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.head
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Up to `batch` distinct transitions, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<&Transition> {
        let n = batch.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.usize(self.capacity);
        w.usize(self.head);
        w.usize(self.items.len());
        // Physical slot order, so a restored buffer samples identically.
        for t in &self.items {
            w.usize(t.state.len());
            for &i in t.state.indices().iter().chain(t.action.indices()) {
                w.u32(i as u32);
            }
            w.u8(t.reward as u8);
        }
    }

    pub(crate) fn read(r: &mut Reader) -> Result<Self> {
        let capacity = r.usize()?;
        let head = r.usize()?;
        let n = r.usize()?;
        let mut buf = ReplayBuffer::new(capacity).map_err(|e| Error::Format(e.to_string()))?;
        if n > capacity || head >= capacity || (n < capacity && head != n % capacity) {
            return Err(Error::Format(format!(
                "inconsistent ring: {n} items, head {head}, capacity {capacity}"
            )));
        }
        for _ in 0..n {
            let m = r.usize()?;
            if m > r.remaining() / 8 {
                return Err(Error::Format("transition exceeds remaining data".into()));
            }
            let mut idx = (0..2 * m)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let action = BeamVector::new(idx.split_off(m));
            let reward = r.u8()? as i8;
            if !(-1..=1).contains(&reward) {
                return Err(Error::Format(format!(
                    "reward {reward} outside {{-1, 0, 1}}"
                )));
            }
            buf.items.push(Transition {
                state: BeamVector::new(idx),
                action,
                reward,
            });
        }
        buf.head = head;
        Ok(buf)
    }
}
