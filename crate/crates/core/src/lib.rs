pub mod error;
pub mod fd_oracle;
pub mod model_domains;
pub mod schatten_analysis;
pub mod special_functions;
pub mod triple_engine;

pub use error::{Error, ErrorCategory, Result};
