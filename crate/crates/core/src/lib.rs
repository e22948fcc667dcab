//! Core domain for the repeated-standoff experiment: the game engine, scripted
//! reference policies, prompt templates, transcript coding, and the statistical
//! analysis. Everything here is pure and deterministic; IO lives in the harness
//! crate.

pub mod agents;
pub mod coding;
pub mod game;
pub mod prompts;
pub mod seeds;
pub mod stats;
