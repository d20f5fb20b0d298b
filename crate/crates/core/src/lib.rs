//! Occlusion-robust 6-DoF grasp synthesis for mobile manipulators.
//!
//! The pipeline turns masked depth observations of a target object into a
//! single execution-feasible grasp:
//!
//! 1. [`depth`]: back-projection, depth compensation and multi-frame
//!    accumulation into an object-centric partial cloud.
//! 2. [`completion`]: two-stage completion (whole-object, then per patch)
//!    behind a pluggable completer.
//! 3. [`grasp`]: antipodal candidate sampling, gripper collision filtering
//!    and weighted-cost selection.
//! 4. [`executor`]: the pick state machine (reposition, pre-grasp, insert,
//!    close, lift, verify).
//! 5. [`sim`]: a synthetic cluttered tabletop used to render observations,
//!    adjudicate grasps and run paired full-vs-baseline benchmarks.

pub mod error;
pub mod geometry;
pub mod depth;
pub mod seed;
pub mod completion;
pub mod grasp;
pub mod executor;
pub mod sim;
pub mod config;

pub use error::{Error, Result};
