use super::trellis::BeliefState;
use super::ReasonerError;

pub const DEFAULT_DEVIATION_THRESHOLD: f64 = 0.3;
pub const DEFAULT_DEVIATION_WINDOW: usize = 15;

/// Raised when no state has held a confident belief for a while.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationWarning {
    /// Consecutive low-confidence frames, at least the window.
    pub frames: usize,
    /// Up to three most probable states with their probabilities.
    pub candidates: Vec<(usize, f64)>,
}

/// Counts consecutive frames whose max belief is below `threshold` and warns on
/// every frame once the count reaches `window`.
#[derive(Clone, Debug)]
pub struct DeviationMonitor {
    threshold: f64,
    window: usize,
    low_run: usize,
}

impl DeviationMonitor {
    pub fn new(threshold: f64, window: usize) -> Result<Self, ReasonerError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ReasonerError::InvalidThreshold(threshold));
        }
        if window == 0 {
            return Err(ReasonerError::InvalidWindow);
        }
        Ok(DeviationMonitor {
            threshold,
            window,
            low_run: 0,
        })
    }

    pub fn check(&mut self, belief: &BeliefState) -> Option<DeviationWarning> {
        if belief.max_prob() < self.threshold {
            self.low_run += 1;
        } else {
            self.low_run = 0;
        }
        (self.low_run >= self.window).then(|| DeviationWarning {
            frames: self.low_run,
            candidates: belief.top(3),
        })
    }

    pub fn reset(&mut self) {
        self.low_run = 0;
    }
}
