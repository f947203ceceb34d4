//! Slow reference implementations.

use asmon::fusion::{PointCloud, Vec3};
use asmon::ingest::DetectionMessage;

/// Exhaustive maximum over every state sequence of the accumulated score
/// `ll[0][s0] + prior[s0] + sum(log_a[s(t-1)][s(t)] + ll[t][s(t)])`, summed
/// in time order. Among equal scores the winner is the smallest sequence
/// read from the last state backwards.
pub fn brute_force_viterbi(log_a: &[Vec<f64>], prior: &[f64], ll: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = prior.len();
    let horizon = ll.len();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut seq = vec![0usize; horizon];
    loop {
        let mut score = ll[0][seq[0]] + prior[seq[0]];
        for t in 1..horizon {
            score = score + log_a[seq[t - 1]][seq[t]] + ll[t][seq[t]];
        }
        let better = score > best.0
            || (score == best.0 && score > f64::NEG_INFINITY && seq.iter().rev().lt(best.1.iter().rev()));
        if better {
            best = (score, seq.clone());
        }
        // Next sequence in odometer order.
        let mut i = 0;
        loop {
            if i == horizon {
                return best;
            }
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

fn dist2(a: Vec3, b: Vec3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Points of `p2` strictly within `r` of some point of `p1`, by double loop.
pub fn brute_force_count(p1: &PointCloud, p2: &PointCloud, r: f64) -> usize {
    p2.points()
        .iter()
        .filter(|&&q| p1.points().iter().any(|&p| dist2(p, q) < r * r))
        .count()
}

pub fn brute_force_iou(p1: &PointCloud, p2: &PointCloud, r: f64) -> f64 {
    if p1.is_empty() || p2.is_empty() {
        return 0.0;
    }
    let i = brute_force_count(p1, p2, r).max(brute_force_count(p2, p1, r));
    i as f64 / (p1.len() + p2.len() - i) as f64
}

/// Partition of time-sorted messages into groups of consecutive messages,
/// each with distinct cameras and a timestamp span of at most `window`,
/// minimising the number of groups and then the summed span. Returns each
/// group as sorted `(camera, frame_index)` pairs.
pub fn optimal_alignment(msgs: &[DetectionMessage], window: u64) -> Vec<Vec<(String, u64)>> {
    let mut sorted: Vec<&DetectionMessage> = msgs.iter().collect();
    sorted.sort_by(|a, b| (a.timestamp_us, &a.camera_id).cmp(&(b.timestamp_us, &b.camera_id)));
    let n = sorted.len();
    // cost[i]: best (groups, span) for the first i messages; cut[i]: group start.
    let mut cost = vec![(u64::MAX, u64::MAX); n + 1];
    let mut cut = vec![0usize; n + 1];
    cost[0] = (0, 0);
    for end in 1..=n {
        let mut cams = std::collections::BTreeSet::new();
        for start in (0..end).rev() {
            if !cams.insert(&sorted[start].camera_id) {
                break;
            }
            let span = sorted[end - 1].timestamp_us - sorted[start].timestamp_us;
            if span > window {
                break;
            }
            let (g, s) = cost[start];
            if g == u64::MAX {
                continue;
            }
            let c = (g + 1, s + span);
            if c < cost[end] {
                cost[end] = c;
                cut[end] = start;
            }
        }
    }
    let mut groups = Vec::new();
    let mut end = n;
    while end > 0 {
        let start = cut[end];
        let mut g: Vec<(String, u64)> = sorted[start..end]
            .iter()
            .map(|m| (m.camera_id.clone(), m.frame_index))
            .collect();
        g.sort();
        groups.push(g);
        end = start;
    }
    groups.reverse();
    groups
}

/// Frame-exact precision and recall with a ±`tol` window, written out
/// directly from the definitions.
pub fn frame_matching(predicted: &[Option<usize>], truth: &[usize], tol: usize) -> (f64, f64) {
    let n = truth.len();
    let near = |f: usize, g: usize| f.abs_diff(g) <= tol;
    let mut hits = 0;
    let mut total = 0;
    for (f, &pred) in predicted.iter().enumerate() {
        if let Some(p) = pred {
            total += 1;
            if (0..n).any(|g| near(f, g) && truth[g] == p) {
                hits += 1;
            }
        }
    }
    let recalled = (0..n)
        .filter(|&g| (0..n).any(|f| near(f, g) && predicted[f] == Some(truth[g])))
        .count();
    let precision = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    (precision, recalled as f64 / n as f64)
}
