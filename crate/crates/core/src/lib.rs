pub mod certify;
pub mod cli;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod sparse;
pub mod rb;
pub mod scm;
