//! Property bodies and input strategies shared by the property tests and the
//! acceptance run.

use std::collections::BTreeMap;
use std::path::Path;
use std::thread;
use std::time::Duration;

use asmon::fusion::{
    backproject, cloud_intersection_count, cloud_iou, match_across_views, smooth, BBox, DepthSample, Detection2D,
    ObservationVector, PointCloud, ViewDetection, DEFAULT_IOU_THRESH, DEFAULT_RADIUS,
};
use asmon::ingest::{
    decode_message, encode_message, read_detlog, send_messages, DetectionMessage, FrameBundle, LiveOptions, LiveServer,
    LiveStats, Replay, DEFAULT_SYNC_WINDOW_US, MAX_CAMERA_ID_LEN,
};
use asmon::simulator::Scene;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles::{brute_force_count, brute_force_iou, brute_force_viterbi};
use super::{lego, monitor, Lego, ViterbiInstance};

pub const NO_COMPACTION: usize = 1 << 20;

pub fn viterbi_instance(seed: u64, max_states: usize, max_horizon: usize) -> ViterbiInstance {
    ViterbiInstance::random(&mut ChaCha8Rng::seed_from_u64(seed), max_states, max_horizon)
}

/// Decoded log-probability and path equal exhaustive enumeration.
pub fn viterbi_matches_enumeration(seed: u64) -> Result<(), TestCaseError> {
    let inst = viterbi_instance(seed, 6, 8);
    let (score, path) = brute_force_viterbi(&inst.log_a, &inst.log_prior(), &inst.loglik);
    let t = inst.decode(NO_COMPACTION);
    prop_assert!(
        (t.best_log_prob() - score).abs() <= 1e-9,
        "{} vs {}",
        t.best_log_prob(),
        score
    );
    prop_assert_eq!(t.path(), path);
    Ok(())
}

/// Clouds mixing uniform points with lattice points whose neighbours sit
/// exactly at distance `r`.
pub fn random_cloud<R: Rng>(rng: &mut R, r: f64) -> PointCloud {
    let n = rng.random_range(0..=200);
    let lattice = rng.random_bool(0.5);
    let pts = (0..n)
        .map(|_| {
            if lattice {
                [0, 1, 2].map(|_| f64::from(rng.random_range(0..6)) * r)
            } else {
                [0, 1, 2].map(|_| rng.random_range(0.0..1.0))
            }
        })
        .collect();
    PointCloud::new(pts)
}

/// Intersection counts and IoU of a random pair equal the double loop.
pub fn clouds_match_double_loop(seed: u64, r_exp: u32) -> Result<(), TestCaseError> {
    let r = 0.5f64.powi(r_exp as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_cloud(&mut rng, r);
    let b = random_cloud(&mut rng, r);
    prop_assert_eq!(cloud_intersection_count(&a, &b, r), brute_force_count(&a, &b, r));
    prop_assert_eq!(cloud_intersection_count(&b, &a, r), brute_force_count(&b, &a, r));
    let iou = cloud_iou(&a, &b, r);
    prop_assert!((iou - brute_force_iou(&a, &b, r)).abs() <= 1e-12);
    prop_assert_eq!(iou, cloud_iou(&b, &a, r));
    let covered = |p: &PointCloud, q: &PointCloud| brute_force_count(p, q, r) == q.len();
    let coincide = !a.is_empty() && a.len() == b.len() && (covered(&a, &b) || covered(&b, &a));
    prop_assert_eq!(iou == 1.0, coincide);
    Ok(())
}

/// Previous and current values, `alpha_down`, and how far `alpha_up` sits
/// between `alpha_down` and 1.
pub fn smoothing_case() -> impl Strategy<Value = (Vec<(f64, f64)>, f64, f64)> {
    (
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..40),
        0.01f64..0.98,
        0.01f64..0.99,
    )
}

/// The output stays between the two inputs, and repeated steps close a rising
/// gap geometrically faster than a falling one.
pub fn smoothing_is_bounded_and_rises_faster(
    (pairs, alpha_down, gap): (Vec<(f64, f64)>, f64, f64),
) -> Result<(), TestCaseError> {
    let alpha_up = alpha_down + gap * (1.0 - alpha_down);
    if !(alpha_up > alpha_down && alpha_up < 1.0) {
        return Err(TestCaseError::reject("alpha_up rounds onto a bound"));
    }
    let prev = ObservationVector(pairs.iter().map(|p| p.0).collect());
    let curr = ObservationVector(pairs.iter().map(|p| p.1).collect());
    let out = smooth(&prev, &curr, alpha_up, alpha_down).unwrap();
    for ((&p, &c), &o) in prev.0.iter().zip(&curr.0).zip(&out.0) {
        prop_assert!(p.min(c) <= o && o <= p.max(c), "{o} outside [{p}, {c}]");
    }

    // From each low value towards the high one and back, with the target held fixed.
    let lo = ObservationVector(pairs.iter().map(|p| p.0.min(p.1)).collect());
    let hi = ObservationVector(pairs.iter().map(|p| p.0.max(p.1)).collect());
    let (mut up, mut down) = (lo.clone(), hi.clone());
    for n in 1..=10 {
        up = smooth(&up, &hi, alpha_up, alpha_down).unwrap();
        down = smooth(&down, &lo, alpha_up, alpha_down).unwrap();
        for i in 0..lo.len() {
            let d = hi.0[i] - lo.0[i];
            if d == 0.0 {
                continue;
            }
            let rise_gap = hi.0[i] - up.0[i];
            let fall_gap = down.0[i] - lo.0[i];
            prop_assert!((rise_gap - (1.0 - alpha_up).powi(n) * d).abs() <= 1e-12);
            prop_assert!((fall_gap - (1.0 - alpha_down).powi(n) * d).abs() <= 1e-12);
            // Compared only while the slower gap is far above rounding.
            if (1.0 - alpha_down).powi(n) * d > 1e-9 {
                prop_assert!(rise_gap < fall_gap, "step {n}: {rise_gap} vs {fall_gap}");
            }
        }
    }
    Ok(())
}

/// Planted cross-view correspondences, how many of them matching recovered,
/// and the number of clusters mixing two planted objects.
pub fn planted_recovery(seed: u64, jitter: f64) -> (usize, usize, usize) {
    let lego = lego();
    let scene = Scene::standard(&lego.layout).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elements = lego.layout.elements.len();
    let trays = lego.layout.trays.len();
    // (class, tray, slot position) per planted object, plus a same-class twin.
    let mut objects: Vec<(u32, usize, [f64; 3])> = (0..elements)
        .map(|e| {
            let t = rng.random_range(0..trays);
            (e as u32, t, scene.element_center(e, t))
        })
        .collect();
    let e = rng.random_range(0..elements);
    let t = objects[e].1;
    let free = (0..elements).find(|&f| f != e && objects[f].1 != t).unwrap();
    objects.push((e as u32, t, scene.element_center(free, t)));

    let mut dets = Vec::new();
    let mut owner = Vec::new();
    for (o, &(class, tray, center)) in objects.iter().enumerate() {
        let proxy = scene.sample_proxy(&mut rng);
        for (c, cam) in scene.cameras.iter().enumerate() {
            let Some(d) = scene.render(cam, center, &proxy, jitter, class, 1.0, &mut rng) else {
                continue;
            };
            dets.push(ViewDetection {
                camera: c,
                tray,
                class_id: class,
                confidence: 1.0,
                cloud: backproject(&d, cam).unwrap(),
            });
            owner.push(o);
        }
    }
    let clusters = match_across_views(&dets, DEFAULT_RADIUS, DEFAULT_IOU_THRESH);
    let mut cluster_of = vec![usize::MAX; dets.len()];
    for (k, c) in clusters.iter().enumerate() {
        for &m in &c.members {
            cluster_of[m] = k;
        }
    }
    let (mut planted, mut recovered) = (0, 0);
    for i in 0..dets.len() {
        for j in i + 1..dets.len() {
            if owner[i] == owner[j] {
                planted += 1;
                recovered += usize::from(cluster_of[i] == cluster_of[j]);
            }
        }
    }
    let mixed = clusters
        .iter()
        .filter(|c| c.members.iter().any(|&m| owner[m] != owner[c.members[0]]))
        .count();
    (planted, recovered, mixed)
}

fn finite_f32() -> impl Strategy<Value = f32> {
    prop_oneof![
        -1e6f32..1e6,
        Just(0.0f32),
        Just(-0.0f32),
        Just(f32::MAX),
        Just(f32::MIN_POSITIVE),
        any::<f32>().prop_filter("finite", |v| v.is_finite()),
    ]
}

fn detection() -> impl Strategy<Value = Detection2D> {
    (
        any::<u32>(),
        [finite_f32(), finite_f32(), finite_f32(), finite_f32(), finite_f32()],
        prop::collection::vec((finite_f32(), finite_f32(), finite_f32()), 0..20),
    )
        .prop_map(|(class_id, [x, y, w, h, confidence], samples)| Detection2D {
            class_id,
            bbox: BBox { x, y, w, h },
            confidence,
            depth_samples: samples
                .into_iter()
                .map(|(u, v, depth)| DepthSample { u, v, depth })
                .collect(),
        })
}

pub fn message() -> impl Strategy<Value = DetectionMessage> {
    (
        proptest::string::string_regex(&format!("[a-zA-Z0-9_.-]{{1,{MAX_CAMERA_ID_LEN}}}")).unwrap(),
        any::<u64>(),
        any::<u64>(),
        prop::collection::vec(detection(), 0..6),
    )
        .prop_map(|(camera_id, frame_index, timestamp_us, detections)| DetectionMessage {
            camera_id,
            frame_index,
            timestamp_us,
            detections,
        })
}

/// Compares floats by bit pattern so that signed zeros count.
fn bits(m: &DetectionMessage) -> Vec<u32> {
    m.detections
        .iter()
        .flat_map(|d| {
            let mut v = vec![d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.confidence];
            v.extend(d.depth_samples.iter().flat_map(|s| [s.u, s.v, s.depth]));
            v
        })
        .map(f32::to_bits)
        .collect()
}

pub fn wire_round_trip(m: DetectionMessage) -> Result<(), TestCaseError> {
    let back = decode_message(&encode_message(&m).unwrap()).unwrap();
    prop_assert_eq!(bits(&back), bits(&m));
    prop_assert_eq!(back, m);
    Ok(())
}

/// Bundles of a recorded log read back from the file and, separately, sent
/// over loopback TCP with one connection per camera.
pub fn replayed_and_live(lego: &Lego, scene: &Scene, path: &Path) -> (Vec<FrameBundle>, Vec<FrameBundle>, LiveStats) {
    let cameras = monitor(lego, scene).camera_ids();
    let replayed: Vec<FrameBundle> = Replay::open(path, cameras.clone(), DEFAULT_SYNC_WINDOW_US, 0.0)
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();

    let mut per_camera: BTreeMap<String, Vec<DetectionMessage>> = BTreeMap::new();
    for m in read_detlog(path).unwrap() {
        per_camera.entry(m.camera_id.clone()).or_default().push(m);
    }
    let server = LiveServer::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    let senders: Vec<_> = per_camera
        .into_values()
        .map(|msgs| thread::spawn(move || send_messages(addr, &msgs).unwrap()))
        .collect();
    let mut opts = LiveOptions::new(cameras, DEFAULT_SYNC_WINDOW_US);
    opts.stall_timeout = Duration::from_secs(60);
    let mut live = Vec::new();
    let stats = server.run(&opts, |b| live.push(b)).unwrap();
    senders.into_iter().for_each(|h| h.join().unwrap());
    (replayed, live, stats)
}
