use super::NetError;
use crate::Micros;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

struct Entry<E> {
    at: Micros,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Timestamped event queue. Events pop in `(timestamp, insertion order)`
/// order, so equal timestamps are FIFO and runs are reproducible.
pub struct EventQueue<E> {
    now: Micros,
    next_seq: u64,
    processed: u64,
    heap: BinaryHeap<Entry<E>>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            processed: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, at: Micros, event: E) -> Result<(), NetError> {
        if at < self.now {
            return Err(NetError::ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, event });
        Ok(())
    }

    pub fn schedule_in(&mut self, delay: Micros, event: E) {
        let at = self.now + delay;
        // `at >= now` by construction.
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, event });
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.heap.peek().map(|e| e.at)
    }

    /// Removes the next event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(Micros, E)> {
        let e = self.heap.pop()?;
        self.now = e.at;
        self.processed += 1;
        Some((e.at, e.event))
    }

    /// Processes every event stamped `<= t_end`, including ones scheduled by
    /// the handler, then leaves the clock at `t_end`. Returns how many ran.
    pub fn run_until<F>(&mut self, t_end: Micros, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, Micros, E),
    {
        let mut count = 0;
        while self.peek_time().is_some_and(|t| t <= t_end) {
            let (at, ev) = self.pop().expect("peeked");
            handler(self, at, ev);
            count += 1;
        }
        self.now = self.now.max(t_end);
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_timestamps_are_fifo() {
        let mut q = EventQueue::new();
        q.schedule(5, "a").unwrap();
        q.schedule(5, "b").unwrap();
        q.schedule(1, "c").unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, e)| e)).collect();
        assert_eq!(order, vec!["c", "a", "b"]);
    }

    #[test]
    fn schedule_at_now_runs_next() {
        let mut q = EventQueue::new();
        q.schedule(10, 1).unwrap();
        q.pop();
        q.schedule(10, 2).unwrap();
        q.schedule(11, 3).unwrap();
        assert_eq!(q.pop(), Some((10, 2)));
    }

    #[test]
    fn past_is_rejected() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.schedule(100, ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(99, ()), Err(NetError::ScheduleInPast { at: 99, now: 100 }));
    }

    #[test]
    fn run_until_includes_boundary_and_children() {
        let mut q = EventQueue::new();
        q.schedule(10, 0u32).unwrap();
        q.schedule(30, 99).unwrap();
        let mut seen = vec![];
        let n = q.run_until(20, |q, t, e| {
            seen.push((t, e));
            if e < 3 {
                q.schedule(t + 5, e + 1).unwrap();
            }
        });
        assert_eq!(n, 3);
        assert_eq!(seen, vec![(10, 0), (15, 1), (20, 2)]);
        assert_eq!(q.now(), 20);
        assert_eq!(q.len(), 2);
    }
}
