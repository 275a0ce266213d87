//! Differentiable primitives.

mod conv;
mod norm;
mod pointwise;
mod quality;
mod reduce;
mod separable;

pub use conv::conv2d;
pub use norm::{instance_norm, INSTANCE_NORM_EPS};
pub use pointwise::{
    abs, add, add_scalar, concat_channels, leaky_relu, mul, mul_channelwise, relu, repeat_channels, rsub_scalar,
    scale, select_channels, sigmoid, sub,
};
pub use quality::q_index_mean;
pub use reduce::{channel_max, channel_mean, global_avg_pool, l1_mean, mean, sample_mean, sq_mean, sum};
pub use separable::{separable, AxisMap};

/// Default negative slope of the discriminator's leaky ReLU.
pub const LEAKY_RELU_SLOPE: f64 = 0.2;
