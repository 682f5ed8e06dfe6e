//! Synthetic chart corpus generation with evaluator-driven refinement.

pub mod answer;
pub mod chart;
pub mod color;
pub mod compose;
pub mod eval;
pub mod gateway;
pub mod grade;
pub mod palette;
pub mod pipeline;
pub mod qa;
pub mod render;
pub mod rng;
pub mod seed;
