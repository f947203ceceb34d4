use super::matching::Cluster;
use super::FusionError;
use crate::task::TaskDefinition;

/// Index layout of observation vectors: one entry per (element, tray) pair,
/// element-major, both in task declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationLayout {
    pub elements: Vec<String>,
    pub trays: Vec<String>,
}

impl ObservationLayout {
    pub fn from_task(task: &TaskDefinition) -> Self {
        ObservationLayout {
            elements: task.elements().map(str::to_owned).collect(),
            trays: task.trays().map(str::to_owned).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.elements.len() * self.trays.len()
    }

    pub fn index(&self, element: usize, tray: usize) -> usize {
        element * self.trays.len() + tray
    }

    pub fn tray_index(&self, name: &str) -> Option<usize> {
        self.trays.iter().position(|t| t == name)
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == name)
    }

    pub fn zeros(&self) -> ObservationVector {
        ObservationVector(vec![0.0; self.dim()])
    }
}

/// Per-(element, tray) presence confidences in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationVector(pub Vec<f64>);

impl ObservationVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Entry `(element, tray)` is the best confidence among clusters of that class
/// in that tray, 0 where there is none.
pub fn consolidate(clusters: &[Cluster], layout: &ObservationLayout) -> Result<ObservationVector, FusionError> {
    let mut out = layout.zeros();
    for c in clusters {
        let e = c.class_id as usize;
        if e >= layout.elements.len() {
            return Err(FusionError::UnknownClass(c.class_id));
        }
        if c.tray >= layout.trays.len() {
            return Err(FusionError::UnknownTray(c.tray.to_string()));
        }
        let slot = &mut out.0[layout.index(e, c.tray)];
        *slot = slot.max(c.confidence.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Asymmetric exponential smoothing: rising entries use `alpha_up`, falling or
/// unchanged entries use `alpha_down`.
pub fn smooth(
    prev: &ObservationVector,
    curr: &ObservationVector,
    alpha_up: f64,
    alpha_down: f64,
) -> Result<ObservationVector, FusionError> {
    if prev.len() != curr.len() {
        return Err(FusionError::DimensionMismatch {
            expected: prev.len(),
            found: curr.len(),
        });
    }
    Ok(ObservationVector(
        prev.0
            .iter()
            .zip(&curr.0)
            .map(|(&p, &c)| {
                let a = if c > p { alpha_up } else { alpha_down };
                let v = a * c + (1.0 - a) * p;
                // Keep rounding from stepping outside [min, max].
                v.clamp(p.min(c), p.max(c))
            })
            .collect(),
    ))
}

/// Stateful wrapper around [`smooth`]. The first vector passes through.
#[derive(Clone, Debug)]
pub struct TemporalSmoother {
    alpha_up: f64,
    alpha_down: f64,
    prev: Option<ObservationVector>,
}

impl TemporalSmoother {
    pub fn new(alpha_up: f64, alpha_down: f64) -> Result<Self, FusionError> {
        if !(0.0..=1.0).contains(&alpha_down) || !(0.0..=1.0).contains(&alpha_up) || alpha_down > alpha_up {
            return Err(FusionError::InvalidSmoothing { alpha_up, alpha_down });
        }
        Ok(TemporalSmoother {
            alpha_up,
            alpha_down,
            prev: None,
        })
    }

    pub fn update(&mut self, curr: ObservationVector) -> Result<ObservationVector, FusionError> {
        let next = match &self.prev {
            None => curr,
            Some(prev) => smooth(prev, &curr, self.alpha_up, self.alpha_down)?,
        };
        self.prev = Some(next.clone());
        Ok(next)
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}
