//! End-to-end training: a small reverse-mode tape, Adam, the non-IDD loss
//! (BCE minus entropy) and the deep-unfolded IDD loss.

mod adam;
mod driver;
mod loss;
mod ops;
mod tape;

pub use adam::{global_norm, AdamConfig, AdamState};
pub use driver::{
    history_csv, smoothed, waterfall_scan, DemapperKind, IddConfig, IddTrainer, InitConstellation, NonIddConfig,
    NonIddTrainer, ScanConfig, StepRecord, TrainState,
};
pub use loss::{
    logit, loss_non_idd, spread, Batch, BatchChannel, Evaluation, FrameBatch, IddProblem, LossParts, TrainableParams,
    Weighting,
};
pub use ops::{
    Add, Affine, AddConst, Bce, BpIterate, Clip, ComplexMulConst, Concat, Entropy, Gather, Logistic, MapDemap, Mul,
    MulConst, Normalize, Relu, Scale, ShapeDecode, Slice, Sub, Sum, SymbolDist,
};
pub use tape::{Grads, Op, Tape, Var};
