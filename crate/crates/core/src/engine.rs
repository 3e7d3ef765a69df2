//! Deterministic discrete-event core: simulation clock, event queue and
//! seeded random substreams.
//!
//! Events are ordered by `(fire_time, sequence)`. The sequence number is
//! assigned at insertion, so two events scheduled for the same instant are
//! delivered in the order they were scheduled, independently of payload.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Simulated time in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Panics on negative or non-finite input.
    pub fn from_secs(secs: f64) -> Self {
        assert!(
            secs.is_finite() && secs >= 0.0,
            "simulated time must be finite and non-negative, got {secs}"
        );
        // Adding +0.0 folds -0.0 into +0.0, so bit patterns order like values.
        SimTime(secs + 0.0)
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn after(self, delay_s: f64) -> Self {
        SimTime::from_secs(self.0 + delay_s)
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.0)
    }
}

/// A scheduled event carrying a simulator-defined payload.
#[derive(Clone, Debug)]
pub struct Event<P> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub payload: P,
}

fn time_of(key: u128) -> SimTime {
    SimTime(f64::from_bits((key >> 64) as u64))
}

/// Heap entry keyed by `(fire_time bits, sequence)` packed into one integer.
/// Non-negative finite floats order like their bit patterns.
struct Queued<P> {
    key: u128,
    payload: P,
}

impl<P> Queued<P> {
    fn new(fire_time: SimTime, sequence: u64, payload: P) -> Self {
        Self {
            key: ((fire_time.0.to_bits() as u128) << 64) | sequence as u128,
            payload,
        }
    }

    fn into_event(self) -> Event<P> {
        Event {
            fire_time: time_of(self.key),
            sequence: self.key as u64,
            payload: self.payload,
        }
    }
}

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key)
    }
}

/// Width of one calendar window: 1/256 s (a power of two, so window
/// indices are exact).
const WINDOWS_PER_S: f64 = 256.0;
/// Windows held in the ring, about 32 s ahead of the current one.
const RING: u64 = 8192;

/// Calendar queue. Events of the current window sit in a small heap, later
/// windows within the ring's reach in unsorted buckets, and anything beyond
/// in an overflow heap. Each event is sorted only among its window's peers,
/// so the heap stays shallow however many users keep a future arrival
/// pending.
struct CalendarQueue<P> {
    current: u64,
    near: BinaryHeap<Queued<P>>,
    ring: Vec<Vec<Queued<P>>>,
    in_ring: usize,
    far: BinaryHeap<Queued<P>>,
}

fn window(key: u128) -> u64 {
    (f64::from_bits((key >> 64) as u64) * WINDOWS_PER_S) as u64
}

impl<P> CalendarQueue<P> {
    fn new() -> Self {
        Self {
            current: 0,
            near: BinaryHeap::new(),
            ring: (0..RING).map(|_| Vec::new()).collect(),
            in_ring: 0,
            far: BinaryHeap::new(),
        }
    }

    fn len(&self) -> usize {
        self.near.len() + self.in_ring + self.far.len()
    }

    fn push(&mut self, item: Queued<P>) {
        let w = window(item.key);
        if w <= self.current {
            self.near.push(item);
        } else if w < self.current + RING {
            self.ring[(w % RING) as usize].push(item);
            self.in_ring += 1;
        } else {
            self.far.push(item);
        }
    }

    /// Smallest pending key; moves the current window forward as needed.
    fn peek_key(&mut self) -> Option<u128> {
        loop {
            if let Some(top) = self.near.peek() {
                return Some(top.key);
            }
            if self.in_ring == 0 && self.far.is_empty() {
                return None;
            }
            self.advance();
        }
    }

    fn pop(&mut self) -> Option<Queued<P>> {
        self.peek_key()?;
        self.near.pop()
    }

    fn advance(&mut self) {
        self.current = match (self.in_ring, self.far.peek()) {
            (0, Some(top)) => window(top.key),
            _ => self.current + 1,
        };
        let bucket = &mut self.ring[(self.current % RING) as usize];
        self.in_ring -= bucket.len();
        self.near.extend(bucket.drain(..));
        while let Some(top) = self.far.peek() {
            let w = window(top.key);
            if w >= self.current + RING {
                break;
            }
            let item = self.far.pop().expect("peeked");
            if w <= self.current {
                self.near.push(item);
            } else {
                self.ring[(w % RING) as usize].push(item);
                self.in_ring += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("event scheduled in the past: fire_time {fire_time} < now {now}")]
    ScheduledInPast { now: SimTime, fire_time: SimTime },
}

/// Clock plus pending-event queue.
pub struct Engine<P> {
    now: SimTime,
    next_sequence: u64,
    queue: CalendarQueue<P>,
    processed: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: CalendarQueue::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Number of events dequeued so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, fire_time: SimTime, payload: P) -> Result<u64, EngineError> {
        if fire_time < self.now {
            return Err(EngineError::ScheduledInPast {
                now: self.now,
                fire_time,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Queued::new(fire_time, sequence, payload));
        Ok(sequence)
    }

    pub fn schedule_in(&mut self, delay_s: f64, payload: P) -> Result<u64, EngineError> {
        let at = self.now.after(delay_s);
        self.schedule(at, payload)
    }

    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.queue.peek_key().map(time_of)
    }

    /// Dequeues the next event whose fire time is `<= until` and advances the
    /// clock to it. Returns `None` once no such event remains.
    pub fn pop_until(&mut self, until: SimTime) -> Option<Event<P>> {
        match self.queue.peek_key() {
            Some(k) if time_of(k) <= until => {}
            _ => return None,
        }
        let event = self.queue.pop()?.into_event();
        debug_assert!(event.fire_time >= self.now);
        self.now = event.fire_time;
        self.processed += 1;
        Some(event)
    }

    /// Moves the clock forward to `t` without processing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Seeded source of independent random substreams.
///
/// Each stochastic source asks for its own `(domain, index)` substream, so
/// adding or removing one source never shifts the draws of another.
#[derive(Clone, Debug)]
pub struct RandomStreams {
    seed: u64,
}

impl RandomStreams {
    pub const PROFILE: u32 = 1;

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, domain: u32, index: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((domain as u64) << 32) | index as u64);
        rng
    }
}
