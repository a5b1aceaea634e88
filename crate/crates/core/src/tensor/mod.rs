//! Dense matrices, decompositions and persistence.

mod io;
mod matrix;
mod stats;
mod svd;

pub use io::{
    from_ramx_bytes, load_csv, load_matrix, parse_csv, save_matrix, to_csv, to_ramx_bytes,
    RAMX_MAGIC, RAMX_VERSION,
};
pub use matrix::{dot, norm, Matrix};
pub use stats::{center_columns, principal_directions};
pub use svd::{svd, Svd};
