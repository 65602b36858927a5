//! Per-class intersection-over-union for label maps.

use crate::data::{LabelMap, IGNORE};
use crate::error::{Result, SmpError};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct ClassIou {
    pub class: usize,
    pub intersection: u64,
    pub union: u64,
    /// None when the class appears in neither prediction nor truth.
    pub iou: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub per_class: Vec<ClassIou>,
    /// Mean over classes present in prediction or truth.
    pub mean_iou: f64,
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>6} {:>12} {:>12} {:>8}", "class", "intersection", "union", "IoU")?;
        for c in &self.per_class {
            match c.iou {
                Some(v) => writeln!(
                    f,
                    "{:>6} {:>12} {:>12} {:>8.4}",
                    c.class, c.intersection, c.union, v
                )?,
                None => writeln!(f, "{:>6} {:>12} {:>12} {:>8}", c.class, 0, 0, "-")?,
            }
        }
        write!(f, "mean IoU: {:.4}", self.mean_iou)
    }
}

/// Pixels whose truth value is the ignore label are skipped entirely.
pub fn iou(pred: &LabelMap, truth: &LabelMap, classes: usize) -> Result<MetricReport> {
    if pred.h != truth.h || pred.w != truth.w {
        return Err(SmpError::Shape(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.h, pred.w, truth.h, truth.w
        )));
    }
    let mut inter = vec![0u64; classes];
    let mut union = vec![0u64; classes];
    for (p, t) in pred.data.iter().zip(&truth.data) {
        if *t == IGNORE {
            continue;
        }
        let (p, t) = (*p as usize, *t as usize);
        if t >= classes {
            return Err(SmpError::Label { label: t, classes });
        }
        if p == t {
            inter[t] += 1;
            union[t] += 1;
        } else {
            if p < classes {
                union[p] += 1;
            }
            union[t] += 1;
        }
    }
    let per_class: Vec<ClassIou> = (0..classes)
        .map(|c| ClassIou {
            class: c,
            intersection: inter[c],
            union: union[c],
            iou: (union[c] > 0).then(|| inter[c] as f64 / union[c] as f64),
        })
        .collect();
    let present: Vec<f64> = per_class.iter().filter_map(|c| c.iou).collect();
    let mean_iou = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(MetricReport { per_class, mean_iou })
}

/// Accumulates IoU statistics over many image pairs.
#[derive(Default)]
pub struct IouAccumulator {
    inter: Vec<u64>,
    union: Vec<u64>,
}

impl IouAccumulator {
    pub fn new(classes: usize) -> Self {
        IouAccumulator {
            inter: vec![0; classes],
            union: vec![0; classes],
        }
    }

    pub fn add(&mut self, pred: &LabelMap, truth: &LabelMap) -> Result<()> {
        let report = iou(pred, truth, self.inter.len())?;
        for c in report.per_class {
            self.inter[c.class] += c.intersection;
            self.union[c.class] += c.union;
        }
        Ok(())
    }

    pub fn report(&self) -> MetricReport {
        let per_class: Vec<ClassIou> = (0..self.inter.len())
            .map(|c| ClassIou {
                class: c,
                intersection: self.inter[c],
                union: self.union[c],
                iou: (self.union[c] > 0).then(|| self.inter[c] as f64 / self.union[c] as f64),
            })
            .collect();
        let present: Vec<f64> = per_class.iter().filter_map(|c| c.iou).collect();
        let mean_iou = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        MetricReport { per_class, mean_iou }
    }
}
