pub mod analyze;
pub mod build_graph;
pub mod evaluate;
pub mod predict;
pub mod synth;
pub mod train;
