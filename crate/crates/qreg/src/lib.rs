//! File formats, external samplers, and benchmark orchestration on top of
//! `qreg-core`.

pub mod bench;
pub mod datafile;
pub mod external;
pub mod report;
