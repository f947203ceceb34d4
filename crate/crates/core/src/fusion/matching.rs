//! Cross-view association of per-tray detections.

use super::cloud::{cloud_iou, PointCloud};

/// One detection of one camera, already assigned to a tray and back-projected.
#[derive(Clone, Debug)]
pub struct ViewDetection {
    pub camera: usize,
    pub tray: usize,
    pub class_id: u32,
    pub confidence: f64,
    pub cloud: PointCloud,
}

/// Detections believed to be the same physical object.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub tray: usize,
    pub class_id: u32,
    /// Indices into the input slice, ascending.
    pub members: Vec<usize>,
    /// Best confidence among the members.
    pub confidence: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
    cameras: Vec<Vec<usize>>,
}

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Greedy agglomeration. Candidate pairs share tray and class, come from
/// different cameras and reach `iou_thresh`; they are merged in descending IoU
/// order (ties by index) unless the merge would put two detections of the same
/// camera into one cluster.
pub fn match_across_views(dets: &[ViewDetection], radius: f64, iou_thresh: f64) -> Vec<Cluster> {
    let n = dets.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&dets[i], &dets[j]);
            if a.tray != b.tray || a.class_id != b.class_id || a.camera == b.camera {
                continue;
            }
            let iou = cloud_iou(&a.cloud, &b.cloud, radius);
            if iou >= iou_thresh {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut sets = DisjointSet {
        parent: (0..n).collect(),
        cameras: dets.iter().map(|d| vec![d.camera]).collect(),
    };
    for (_, i, j) in pairs {
        let (ri, rj) = (sets.find(i), sets.find(j));
        if ri == rj || sets.cameras[ri].iter().any(|c| sets.cameras[rj].contains(c)) {
            continue;
        }
        let (root, child) = (ri.min(rj), ri.max(rj));
        sets.parent[child] = root;
        let moved = std::mem::take(&mut sets.cameras[child]);
        sets.cameras[root].extend(moved);
    }

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for (i, d) in dets.iter().enumerate() {
        let root = sets.find(i);
        if slot[root] == usize::MAX {
            slot[root] = clusters.len();
            clusters.push(Cluster {
                tray: d.tray,
                class_id: d.class_id,
                members: Vec::new(),
                confidence: f64::NEG_INFINITY,
            });
        }
        let c = &mut clusters[slot[root]];
        c.members.push(i);
        c.confidence = c.confidence.max(d.confidence);
    }
    clusters
}
