//! Episode-aware replay memory.
//!
//! Transitions arrive in episode order and live in a ring buffer with
//! strictly oldest-first eviction. Two sampling modes: contiguous
//! in-episode sequences for recurrent updates (the warm-up/masking
//! machinery lives in the trainer), and uniform single transitions
//! with their successors for the feed-forward net.

use rand::Rng;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("out-of-order append: {0}")]
    OutOfOrder(String),
    #[error("not enough data: {0}")]
    NotEnoughData(String),
}

/// One stored step of experience.
#[derive(Clone, Debug)]
pub struct Transition<O> {
    pub observation: O,
    pub action: usize,
    pub reward: f32,
    pub terminal: bool,
    pub episode: u64,
    /// Position within the episode, starting at 0.
    pub index: u32,
}

#[derive(Clone, Debug)]
struct EpisodeSpan {
    id: u64,
    /// Global position of the episode's first transition.
    start: u64,
    len: u64,
    terminated: bool,
}

pub struct ReplayMemory<O> {
    capacity: usize,
    buf: VecDeque<Transition<O>>,
    /// Global position of buf[0]; grows as the ring evicts.
    base: u64,
    episodes: VecDeque<EpisodeSpan>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayStats {
    pub size: usize,
    pub capacity: usize,
    pub episodes: usize,
    /// Transition counts in ten equal age buckets, oldest first.
    pub age_histogram: Vec<usize>,
}

impl<O> ReplayMemory<O> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReplayMemory {
            capacity,
            buf: VecDeque::new(),
            base: 0,
            episodes: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn total(&self) -> u64 {
        self.base + self.buf.len() as u64
    }

    /// Store a transition. Episode ids must be non-decreasing and the
    /// index within an episode must advance by exactly one.
    pub fn append(&mut self, t: Transition<O>) -> Result<(), ReplayError> {
        match self.episodes.back_mut() {
            Some(span) if span.id == t.episode => {
                if span.terminated {
                    return Err(ReplayError::OutOfOrder(format!(
                        "episode {} already ended with a terminal transition",
                        t.episode
                    )));
                }
                let expect = span.len as u32;
                if t.index != expect {
                    return Err(ReplayError::OutOfOrder(format!(
                        "episode {}: got index {}, expected {}",
                        t.episode, t.index, expect
                    )));
                }
                span.len += 1;
                span.terminated = t.terminal;
            }
            Some(span) if span.id > t.episode => {
                return Err(ReplayError::OutOfOrder(format!(
                    "episode id {} after {}",
                    t.episode, span.id
                )));
            }
            _ => {
                if t.index != 0 {
                    return Err(ReplayError::OutOfOrder(format!(
                        "new episode {} must start at index 0, got {}",
                        t.episode, t.index
                    )));
                }
                self.episodes.push_back(EpisodeSpan {
                    id: t.episode,
                    start: self.total(),
                    len: 1,
                    terminated: t.terminal,
                });
            }
        }
        self.buf.push_back(t);
        while self.buf.len() > self.capacity {
            self.buf.pop_front();
            self.base += 1;
            // drop episode records that fell off entirely
            while let Some(front) = self.episodes.front() {
                if front.start + front.len <= self.base {
                    self.episodes.pop_front();
                } else {
                    break;
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn get(&self, global: u64) -> &Transition<O> {
        &self.buf[(global - self.base) as usize]
    }

    /// Number of valid sequence start positions per live episode span.
    fn sequence_starts(&self, n: usize) -> Vec<(u64, u64)> {
        // (live_start, count) per episode
        let n = n as u64;
        self.episodes
            .iter()
            .filter_map(|span| {
                let live_start = span.start.max(self.base);
                let live_len = span.start + span.len - live_start;
                if live_len >= n {
                    Some((live_start, live_len - n + 1))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Sample `batch` sequences of `n` consecutive same-episode
    /// transitions, start positions uniform over all valid starts.
    pub fn sample_sequences(
        &self,
        batch: usize,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Vec<&Transition<O>>>, ReplayError> {
        assert!(n >= 1);
        let starts = self.sequence_starts(n);
        let total: u64 = starts.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return Err(ReplayError::NotEnoughData(format!(
                "no stored episode span of length >= {n}"
            )));
        }
        let mut out = Vec::with_capacity(batch);
        for _ in 0..batch {
            let mut r = rng.gen_range(0..total);
            let mut begin = 0;
            for &(live_start, count) in &starts {
                if r < count {
                    begin = live_start + r;
                    break;
                }
                r -= count;
            }
            out.push((begin..begin + n as u64).map(|g| self.get(g)).collect());
        }
        Ok(out)
    }

    fn eligible(&self, global: u64) -> bool {
        let t = self.get(global);
        if t.terminal {
            return true;
        }
        global + 1 < self.total() && self.get(global + 1).episode == t.episode
    }

    fn eligible_count(&self) -> u64 {
        // only each live episode's final stored transition can be
        // ineligible (when it is not terminal)
        let mut count = self.buf.len() as u64;
        for span in &self.episodes {
            if !span.terminated {
                count -= 1;
            }
        }
        count
    }

    /// Sample `batch` transitions uniformly over all stored transitions
    /// that either carry a terminal flag or have a stored successor.
    /// Returns each transition with its successor (None when terminal).
    #[allow(clippy::type_complexity)]
    pub fn sample_uniform(
        &self,
        batch: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<(&Transition<O>, Option<&Transition<O>>)>, ReplayError> {
        let eligible = self.eligible_count();
        if eligible < batch as u64 {
            return Err(ReplayError::NotEnoughData(format!(
                "{eligible} sampleable transitions, need {batch}"
            )));
        }
        let mut out = Vec::with_capacity(batch);
        while out.len() < batch {
            let g = self.base + rng.gen_range(0..self.buf.len() as u64);
            if !self.eligible(g) {
                continue;
            }
            let t = self.get(g);
            let succ = if t.terminal { None } else { Some(self.get(g + 1)) };
            out.push((t, succ));
        }
        Ok(out)
    }

    pub fn stats(&self) -> ReplayStats {
        let mut hist = vec![0usize; 10];
        let len = self.buf.len();
        if len > 0 {
            for i in 0..len {
                hist[i * 10 / len] += 1;
            }
        }
        ReplayStats {
            size: len,
            capacity: self.capacity,
            episodes: self.episodes.len(),
            age_histogram: hist,
        }
    }
}
