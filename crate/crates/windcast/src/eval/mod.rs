//! Multi-horizon forecast evaluation: rolling-origin metrics, the
//! persistence / MLP / vanilla-RNN baselines, and autocorrelation
//! diagnostics.
//!
//! All metric aggregation runs over fixed-size work chunks reduced in a
//! deterministic order, so metric files are bit-identical across thread
//! counts.

mod acf;
mod baselines;
mod metrics;

pub use acf::{acf, write_acf_csv, AcfResult, Z95, Z99};
pub use baselines::{
    mlp_baseline, mlp_hidden_for_budget, persistence, rnn_baseline, train_mlp, MlpParams,
};
pub use metrics::{evaluate, evaluate_mlp, write_metrics_csv, EvalReport, HorizonMetrics, MetricKind};

use thiserror::Error;

use crate::data::DataError;
use crate::tensor::TensorError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("series is constant; autocorrelation is undefined")]
    ConstantSeries,
    #[error("series length {len} must exceed max_lag + 1 = {needed}")]
    TooShortForLag { len: usize, needed: usize },
    #[error("MLP hidden width must be at least 1")]
    ZeroHiddenWidth,
    #[error("writing CSV: {0}")]
    Io(#[from] std::io::Error),
}
