use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayItem {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub cost: f64,
    pub constraint_cost: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; once full, the oldest item is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<ReplayItem>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: ReplayItem) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&ReplayItem>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::EmptyBatch("replay buffer"));
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn item(c: f64) -> ReplayItem {
        ReplayItem {
            obs: vec![],
            action: vec![],
            cost: c,
            constraint_cost: 0.0,
            next_obs: vec![],
            terminal: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2);
        b.push(item(1.0));
        b.push(item(2.0));
        b.push(item(3.0));
        assert_eq!(b.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(50, &mut rng);
        assert!(s.is_err());
        let s = b.sample(2, &mut rng).unwrap();
        assert!(s.iter().all(|i| i.cost != 1.0));
    }

    #[test]
    fn empty_buffer_errors() {
        let b = ReplayBuffer::new(4);
        assert!(matches!(b.sample(1, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::EmptyBatch(_))));
    }
}
