use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Budget shared by the searches: a wall-clock deadline, a cap on high-level
/// expansions and an external interrupt flag. Every field is optional.
#[derive(Clone, Debug, Default)]
pub struct SearchLimits {
    pub deadline: Option<Instant>,
    pub node_limit: Option<u64>,
    pub interrupt: Option<Arc<AtomicBool>>,
}

impl SearchLimits {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn timeout(d: Duration) -> Self {
        SearchLimits {
            deadline: Some(Instant::now() + d),
            ..Self::default()
        }
    }

    pub fn with_node_limit(mut self, n: u64) -> Self {
        self.node_limit = Some(n);
        self
    }

    pub fn with_interrupt(mut self, flag: Arc<AtomicBool>) -> Self {
        self.interrupt = Some(flag);
        self
    }

    /// The earlier of the current deadline and `now + d`.
    pub fn capped(&self, d: Option<Duration>) -> Self {
        let mut out = self.clone();
        if let Some(d) = d {
            let cap = Instant::now() + d;
            out.deadline = Some(out.deadline.map_or(cap, |x| x.min(cap)));
        }
        out
    }

    pub fn interrupted(&self) -> bool {
        self.interrupt.as_ref().is_some_and(|f| f.load(Ordering::Relaxed))
    }

    /// Deadline passed or interrupt raised.
    pub fn expired(&self) -> bool {
        self.interrupted() || self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn nodes_exhausted(&self, expanded: u64) -> bool {
        self.node_limit.is_some_and(|n| expanded >= n)
    }
}
