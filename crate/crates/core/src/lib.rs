#![allow(clippy::needless_range_loop)]

pub mod classifier;
pub mod fd_oracle;
pub mod jets;
pub mod metric_lang;
pub mod metric_library;
pub mod projective;
pub mod tensor_engine;
