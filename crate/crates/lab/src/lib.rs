//! Experiment harness, interchange formats, and persistence for the krrlab
//! kernel regression laboratory. The numerical core lives in `krrlab-core`;
//! this crate adds everything that needs an operating system: seeded sweep
//! orchestration over a worker pool, JSON/CSV formats, and the CLI driver.

pub mod experiments;
pub mod formats;
