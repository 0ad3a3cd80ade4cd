pub mod error;
pub mod flag;
pub mod floquet;
pub mod io;
pub mod jordan;
pub mod linalg;
pub mod projective;
pub mod sampling;
pub mod tolerance;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use tolerance::TolerancePolicy;
