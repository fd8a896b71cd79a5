//! Gesture pseudo-language interpreter.
//!
//! Hand-skeleton frames are featurized and classified into static and dynamic
//! gestures, grouped into episodes, assembled into gesture sentences and
//! resolved into intents. Intents drive a reactive behavior tree over a
//! symbolic tabletop world.

pub mod geometry;
pub mod handstream;
pub mod behavior;
pub mod classify;
pub mod deictic;
pub mod episode;
pub mod mlp;
pub mod pipeline;
pub mod sentence;
pub mod simworld;
pub mod session;
