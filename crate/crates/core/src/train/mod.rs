//! Training stack: layers, network composition, loss, optimizer and the
//! synthetic and image-sequence datasets.

mod data;
mod dense;
mod loss;
mod network;
mod norm;
mod optim;
mod step;

pub use data::{gen_delayed_recall, make_sequence, Dataset, ImageSet, SequenceTransform};
pub use dense::{Dense, DenseGrad};
pub use loss::{correct_count, cross_entropy};
pub use network::{
    lif_backward, Block, BlockGrad, BlockSpec, NetGrads, NetOutput, NetTrace, Network, NetworkSpec, NeuronGrad,
    NeuronKind, NeuronLayer, Readout,
};
pub use norm::{BatchNorm, NormCache};
pub use optim::{
    adamw_step, adamw_update, visit_params, AdamWConfig, LrSchedule, Moments, OptimState, ParamGroup, ParamRef,
};
pub use step::{evaluate, train_step, EvalStats, StepStats};
