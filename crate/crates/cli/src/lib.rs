//! Command implementations behind the `strom` binary.

pub mod artifacts;
pub mod bench;
pub mod config;
pub mod run;
pub mod timing;
pub mod train;
pub mod verify;
