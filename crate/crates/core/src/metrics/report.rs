use serde::{Deserialize, Serialize};

/// Metrics of one fused image. Reference metrics are absent when no ground
/// truth exists (full-scale evaluation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sam_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ergas: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ssim: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

/// Best attainable value of each metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealValues {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
    pub sam_deg: f64,
    pub ergas: f64,
    pub ssim: f64,
}

pub const IDEAL: IdealValues = IdealValues {
    d_lambda: 0.0,
    d_s: 0.0,
    qnr: 1.0,
    sam_deg: 0.0,
    ergas: 0.0,
    ssim: 1.0,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub d_lambda: MeanStd,
    pub d_s: MeanStd,
    pub qnr: MeanStd,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sam_deg: Option<MeanStd>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ergas: Option<MeanStd>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ssim: Option<MeanStd>,
}

/// Per-pair values plus mean ± std over the set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub mode: String,
    pub pairs: Vec<PairMetrics>,
    pub summary: Summary,
    pub ideal: IdealValues,
    /// Free-form notes, e.g. guarded divisions in a baseline.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl MetricReport {
    /// Aggregate `pairs`; panics if `pairs` is empty.
    pub fn new(method: impl Into<String>, mode: impl Into<String>, pairs: Vec<PairMetrics>) -> Self {
        assert!(!pairs.is_empty(), "report over zero pairs");
        let col = |f: fn(&PairMetrics) -> f64| MeanStd::of(&pairs.iter().map(f).collect::<Vec<_>>()).unwrap();
        let opt = |f: fn(&PairMetrics) -> Option<f64>| {
            let v: Option<Vec<f64>> = pairs.iter().map(f).collect();
            v.and_then(|v| MeanStd::of(&v))
        };
        let summary = Summary {
            d_lambda: col(|p| p.d_lambda),
            d_s: col(|p| p.d_s),
            qnr: col(|p| p.qnr),
            sam_deg: opt(|p| p.sam_deg),
            ergas: opt(|p| p.ergas),
            ssim: opt(|p| p.ssim),
        };
        MetricReport {
            method: method.into(),
            mode: mode.into(),
            pairs,
            summary,
            ideal: IDEAL,
            notes: Vec::new(),
        }
    }
}
