//! Per-iteration run records shared by every optimizer.

/// One row per iteration; row 0 describes the initial design.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub consumed: u64,
    /// Promising region of the iteration (`None` for the initial row and for
    /// optimizers without regions).
    pub region: Option<usize>,
    pub n_new: usize,
    pub b1: u64,
    pub b2: u64,
    /// Incumbent: design point with the lowest sample mean.
    pub best_x: Vec<f64>,
    pub best_mean: f64,
    pub wall_ms: f64,
    /// Design points so far.
    pub n_points: usize,
    /// Design points in the promising region.
    pub n_region: usize,
    /// Smallest replication count over all design points.
    pub min_reps: u64,
    /// Minimum replication count the schedule requires at this size.
    pub required_reps: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub optimizer: String,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new(optimizer: impl Into<String>) -> Self {
        Self { optimizer: optimizer.into(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Number of search iterations (rows after the initial one).
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// Incumbent mean at the last row whose consumed budget is at most
    /// `budget`, if any.
    pub fn incumbent_at(&self, budget: u64) -> Option<&TraceRow> {
        self.rows.iter().rev().find(|r| r.consumed <= budget)
    }

    /// Copy with wall times zeroed, for determinism comparisons.
    pub fn without_wall_time(&self) -> Self {
        let mut t = self.clone();
        t.rows.iter_mut().for_each(|r| r.wall_ms = 0.0);
        t
    }
}

/// Milliseconds since `start`; always 0 on targets without a monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
