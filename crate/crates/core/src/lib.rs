pub mod basis;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod fgr;
pub mod linalg;
pub mod linop;
pub mod profiles;
pub mod spectra;
