//! Log-domain Viterbi trellis.

use crate::planner::TransitionMatrix;

const NO_POINTER: u32 = u32::MAX;

/// Initial state distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Prior {
    /// All mass on one state (the initial configuration).
    #[default]
    Initial,
    /// Equal mass on every state, for monitoring that starts mid-task.
    Uniform,
}

/// Sparse log-transition table: for every target state, its possible
/// predecessors in ascending index order with `log a[x][k]`.
#[derive(Clone, Debug)]
pub struct LogTransitions {
    preds: Vec<Vec<(u32, f64)>>,
}

impl LogTransitions {
    pub fn from_matrix(tm: &TransitionMatrix) -> Self {
        let n = tm.size();
        let mut preds = vec![Vec::new(); n];
        for x in 0..n {
            for (k, &p) in tm.row(x).iter().enumerate() {
                if p > 0.0 {
                    preds[k].push((x as u32, p.ln()));
                }
            }
        }
        LogTransitions { preds }
    }

    /// Dense row-major log-probabilities; zero entries become `-inf`.
    pub fn from_log_matrix(n: usize, log_a: &[f64]) -> Self {
        assert_eq!(log_a.len(), n * n);
        let mut preds = vec![Vec::new(); n];
        for x in 0..n {
            for k in 0..n {
                let v = log_a[x * n + k];
                if v > f64::NEG_INFINITY {
                    preds[k].push((x as u32, v));
                }
            }
        }
        LogTransitions { preds }
    }

    pub fn size(&self) -> usize {
        self.preds.len()
    }
}

/// Normalised distribution over states derived from the last trellis column.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub probs: Vec<f64>,
    pub map_state: usize,
}

impl BeliefState {
    pub fn max_prob(&self) -> f64 {
        self.probs[self.map_state]
    }

    /// The `k` most probable states, highest first, ties by index.
    pub fn top(&self, k: usize) -> Vec<(usize, f64)> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|i| (i, self.probs[i])).collect()
    }
}

/// Softmax of a log column, computed after subtracting its maximum.
pub fn normalize_log_column(column: &[f64]) -> BeliefState {
    let (map_state, max) = argmax(column);
    if max == f64::NEG_INFINITY {
        let n = column.len();
        return BeliefState {
            probs: vec![1.0 / n as f64; n],
            map_state: 0,
        };
    }
    let exp: Vec<f64> = column.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    BeliefState {
        probs: exp.into_iter().map(|e| e / sum).collect(),
        map_state,
    }
}

/// Index and value of the maximum, smallest index on ties.
fn argmax(column: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in column.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Viterbi values `log V[t][k]` with backpointers.
///
/// Old columns are compacted once more than `window` are retained: the prefix
/// on which every surviving path agrees is committed and dropped. If the paths
/// have not coalesced, the older half is committed along the current best
/// path.
#[derive(Clone, Debug)]
pub struct Trellis {
    n: usize,
    columns: Vec<Vec<f64>>,
    backpointers: Vec<Vec<u32>>,
    committed: Vec<usize>,
    window: usize,
    forced: u64,
}

impl Trellis {
    /// First column: `log V[1][k] = loglik[k] + log pi[k]`.
    pub fn init(loglik: &[f64], prior: Prior, initial_state: usize, window: usize) -> Self {
        let n = loglik.len();
        let column = match prior {
            Prior::Initial => (0..n)
                .map(|k| {
                    if k == initial_state {
                        loglik[k]
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
            Prior::Uniform => {
                let log_pi = -(n as f64).ln();
                loglik.iter().map(|&l| l + log_pi).collect()
            }
        };
        Trellis {
            n,
            columns: vec![column],
            backpointers: vec![vec![NO_POINTER; n]],
            committed: Vec::new(),
            window: window.max(2),
            forced: 0,
        }
    }

    /// Appends `log V[t][k] = loglik[k] + max_x (log a[x][k] + log V[t-1][x])`.
    pub fn step(&mut self, trans: &LogTransitions, loglik: &[f64]) {
        assert_eq!(trans.size(), self.n);
        assert_eq!(loglik.len(), self.n);
        let prev = self.columns.last().expect("trellis is never empty");
        let mut column = vec![f64::NEG_INFINITY; self.n];
        let mut pointers = vec![NO_POINTER; self.n];
        for k in 0..self.n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = NO_POINTER;
            for &(x, log_a) in &trans.preds[k] {
                let v = prev[x as usize] + log_a;
                if v > best {
                    best = v;
                    arg = x;
                }
            }
            if arg != NO_POINTER {
                column[k] = best + loglik[k];
                pointers[k] = arg;
            }
        }
        self.columns.push(column);
        self.backpointers.push(pointers);
        if self.columns.len() > self.window {
            self.compact();
        }
    }

    /// Total number of time steps, including compacted ones.
    pub fn len(&self) -> usize {
        self.committed.len() + self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn last_column(&self) -> &[f64] {
        self.columns.last().expect("trellis is never empty")
    }

    /// Retained columns; the first one is at time `len() - columns().len()`.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Backpointer of `state` in retained column `col`, if any.
    pub fn backpointer(&self, col: usize, state: usize) -> Option<usize> {
        let p = self.backpointers[col][state];
        (p != NO_POINTER).then_some(p as usize)
    }

    /// Log-probability of the best path ending at the last column.
    pub fn best_log_prob(&self) -> f64 {
        argmax(self.last_column()).1
    }

    /// Most likely state sequence, one entry per time step.
    pub fn path(&self) -> Vec<usize> {
        let (end, _) = argmax(self.last_column());
        let mut tail = self.backtrack(end);
        let mut path = self.committed.clone();
        path.append(&mut tail);
        path
    }

    /// Compactions that committed a prefix before the paths coalesced. While
    /// this is zero, [`Trellis::path`] equals the uncompacted result.
    pub fn forced_commits(&self) -> u64 {
        self.forced
    }

    pub fn belief(&self) -> BeliefState {
        normalize_log_column(self.last_column())
    }

    fn backtrack(&self, end: usize) -> Vec<usize> {
        let len = self.columns.len();
        let mut out = vec![0; len];
        let mut state = end;
        for col in (0..len).rev() {
            out[col] = state;
            if col > 0 {
                let p = self.backpointers[col][state];
                if p == NO_POINTER {
                    break;
                }
                state = p as usize;
            }
        }
        out
    }

    /// Drops retained entries after column `col` whose best path does not pass
    /// through `state` at `col`.
    fn keep_descendants(&mut self, col: usize, state: usize) {
        let mut alive = vec![false; self.n];
        alive[state] = true;
        for c in col + 1..self.columns.len() {
            let mut next = vec![false; self.n];
            for (k, live) in next.iter_mut().enumerate() {
                let b = self.backpointers[c][k];
                if b != NO_POINTER && alive[b as usize] {
                    *live = true;
                } else {
                    self.columns[c][k] = f64::NEG_INFINITY;
                    self.backpointers[c][k] = NO_POINTER;
                }
            }
            alive = next;
        }
    }

    fn compact(&mut self) {
        let len = self.columns.len();
        // Walk back the set of states that surviving paths pass through.
        let mut active: Vec<bool> = self.last_column().iter().map(|v| v.is_finite()).collect();
        let mut coalesced = None;
        for col in (1..len).rev() {
            let mut prev = vec![false; self.n];
            for (k, &on) in active.iter().enumerate() {
                if on && self.backpointers[col][k] != NO_POINTER {
                    prev[self.backpointers[col][k] as usize] = true;
                }
            }
            if prev.iter().filter(|&&b| b).count() == 1 {
                coalesced = Some((col - 1, prev.iter().position(|&b| b).unwrap()));
                break;
            }
            active = prev;
        }
        let (upto, state) = match coalesced {
            Some(c) => c,
            None => {
                let upto = len / 2;
                let (end, _) = argmax(self.last_column());
                let path = self.backtrack(end);
                log::debug!("trellis compaction without coalescence at {} columns", len);
                self.forced += 1;
                self.keep_descendants(upto, path[upto]);
                (upto, path[upto])
            }
        };
        // Columns 0..=upto are fixed once `state` is chosen at `upto`.
        let prefix = {
            let mut p = vec![0; upto + 1];
            let mut s = state;
            for col in (0..=upto).rev() {
                p[col] = s;
                if col > 0 {
                    let b = self.backpointers[col][s];
                    if b == NO_POINTER {
                        break;
                    }
                    s = b as usize;
                }
            }
            p
        };
        self.committed.extend(prefix);
        self.columns.drain(..=upto);
        self.backpointers.drain(..=upto);
        // The new first column points into committed history only.
        if let Some(first) = self.backpointers.first_mut() {
            first.iter_mut().for_each(|b| *b = NO_POINTER);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln(p: f64) -> f64 {
        if p > 0.0 {
            p.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    #[test]
    fn init_puts_mass_on_the_initial_state() {
        let t = Trellis::init(&[-0.5, -0.1, 0.0], Prior::Initial, 0, 100);
        assert_eq!(t.last_column(), &[-0.5, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert_eq!(t.path(), vec![0]);
        let b = t.belief();
        assert_eq!(b.probs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_state_accumulates() {
        let trans = LogTransitions::from_log_matrix(1, &[0.0]);
        let mut t = Trellis::init(&[-1.0], Prior::Initial, 0, 100);
        for _ in 0..4 {
            t.step(&trans, &[-0.5]);
        }
        assert_eq!(t.last_column(), &[-3.0]);
        assert_eq!(t.path(), vec![0; 5]);
    }

    #[test]
    fn ties_prefer_the_smaller_index() {
        let trans = LogTransitions::from_log_matrix(2, &[ln(0.5), ln(0.5), ln(0.5), ln(0.5)]);
        let mut t = Trellis::init(&[0.0, 0.0], Prior::Uniform, 0, 100);
        t.step(&trans, &[0.0, 0.0]);
        assert_eq!(t.backpointer(1, 1), Some(0));
        assert_eq!(t.path(), vec![0, 0]);
    }

    #[test]
    fn belief_examples() {
        let b = normalize_log_column(&[0.0, -1.0]);
        assert!((b.probs[0] - 0.7311).abs() < 1e-4 && (b.probs[1] - 0.2689).abs() < 1e-4);
        let b = normalize_log_column(&[-3.0, -3.0]);
        assert_eq!(b.probs, vec![0.5, 0.5]);
        assert_eq!(b.map_state, 0);
        let b = normalize_log_column(&[f64::NEG_INFINITY, -7.0, f64::NEG_INFINITY]);
        assert_eq!(b.probs, vec![0.0, 1.0, 0.0]);
        assert_eq!(b.top(2), vec![(1, 1.0), (0, 0.0)]);
    }

    #[test]
    fn compaction_keeps_the_path() {
        // 2-state left-to-right chain; observations switch halfway.
        let trans = LogTransitions::from_log_matrix(2, &[ln(0.9), ln(0.1), ln(0.0), ln(1.0)]);
        let lik = |t: usize| if t < 30 { [0.0, -2.0] } else { [-2.0, 0.0] };
        let mut small = Trellis::init(&lik(0), Prior::Initial, 0, 8);
        let mut big = Trellis::init(&lik(0), Prior::Initial, 0, 1000);
        for t in 1..60 {
            small.step(&trans, &lik(t));
            big.step(&trans, &lik(t));
            assert!(small.columns().len() <= 8);
        }
        assert_eq!(small.len(), 60);
        assert_eq!(small.path(), big.path());
        assert_eq!(small.best_log_prob(), big.best_log_prob());
    }
}
