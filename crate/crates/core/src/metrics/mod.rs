//! Quality indices with and without a reference image.

mod noref;
mod reference;
mod report;

pub use noref::{
    d_lambda, d_lambda_tensor, d_s, d_s_tensor, default_pan_lr, effective_block, q_index, qnr, qnr_terms, Qnr,
    QnrTerms, Q_BLOCK,
};
pub use reference::{ergas, sam, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{IdealValues, MeanStd, MetricReport, PairMetrics, Summary, IDEAL};

/// Resolution ratio entering ERGAS (high / low).
pub const ERGAS_RATIO: f64 = 0.25;
