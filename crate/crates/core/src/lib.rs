//! Decentralized multi-vehicle routing under spatio-temporal Poisson demand.
//!
//! Agents wait at the geometric median of the targets they have serviced and
//! chase outstanding targets either greedily (no communication) or only
//! inside their own Voronoi cell (position sensing). The crate provides the
//! geometry behind those policies, a deterministic fixed-step simulator with
//! exact capture times, brute-force oracles, and a scenario runner.

pub mod cli;
pub mod engine;
pub mod geometry;
pub mod oracle;
pub mod partition;
pub mod policy;
pub mod process;

pub use geometry::{vers, ConvexPolygon, FtResult, Point, PointSet};
