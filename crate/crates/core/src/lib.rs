//! Discrete-time simulation of self-organizing fault monitoring on a farm
//! of worker DSPs.
//!
//! Each DSP splits its time between draining its crossing buffer (PA) and
//! checking farmlet peers for faults (VLA), choosing locally every tick.
//! [`sweep`] runs the steepness/error-rate grid that locates the best
//! monitoring frequency for a given fault rate.

pub mod cli;
pub mod engine;
pub mod model;
pub mod prng;
pub mod scheduler;
pub mod sweep;

pub use engine::{run, run_traced, ConfigError, EngineConfig, Simulation};
pub use model::RunMetrics;
pub use scheduler::{adjusted_sigmoid, choose_task, SchedulerParams, Task};
