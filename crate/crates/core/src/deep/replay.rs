//! Fixed-capacity experience ring buffer.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::Rng;

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    /// Slot that the next insert overwrites once the buffer is full.
    head: usize,
    inserted: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            items: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            head: 0,
            inserted: 0,
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

    /// Total inserts so far, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Inserts `item`, returning the evicted oldest item when full.
    pub fn push(&mut self, item: T) -> Option<T> {
        self.inserted += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
            None
        } else {
            let old = std::mem::replace(&mut self.items[self.head], item);
            self.head = (self.head + 1) % self.capacity;
            Some(old)
        }
    }

    /// `n` items drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::Config("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn evicts_oldest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        let evicted: Vec<_> = (0..5).filter_map(|i| b.push(i)).collect();
        assert_eq!(evicted, vec![0, 1]);
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(b.inserted(), 5);
    }

    #[test]
    fn samples_cover_contents() {
        let mut b = ReplayBuffer::new(4).unwrap();
        for i in 0..4 {
            b.push(i);
        }
        let mut rng = seeded_rng(0);
        let mut counts = [0usize; 4];
        for x in b.sample(20_000, &mut rng).unwrap() {
            counts[*x] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 / 20_000.0 - 0.25).abs() < 0.02));
        assert!(ReplayBuffer::<u8>::new(0).is_err());
        assert!(ReplayBuffer::<u8>::new(2).unwrap().sample(1, &mut rng).is_err());
    }
}
