//! Cooperative multi-camera edge video analytics simulator.
//!
//! Cameras filter their frames down to the blocks worth offloading, an edge
//! server runs one of several detector tiers on what arrives, and objects in
//! the shared intersection area are detected once and handed to every camera
//! that sees them.

pub mod detector;
pub mod filter;
pub mod geometry;
pub mod harness;
pub mod netmodel;
pub mod pipeline;
pub mod region;
pub mod scene;
pub mod sharing;
