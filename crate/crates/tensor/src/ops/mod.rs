mod conv;
mod elementwise;
mod layout;
pub(crate) mod matmul;
mod norm;
mod reduce;
