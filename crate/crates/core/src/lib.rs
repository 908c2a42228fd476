pub mod encoder;
pub mod eval;
pub mod fixtures;
pub mod generate;
pub mod grid;
pub mod nn;
mod scalar;
pub mod stability;
mod tensor;
pub mod train;

pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = nn::Model<f32>;
pub type Model64 = nn::Model<f64>;
pub type PqvImage32 = encoder::PqvImage<f32>;
pub type PqvImage64 = encoder::PqvImage<f64>;
