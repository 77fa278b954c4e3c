pub mod code;
pub mod gateway;
pub mod limit;
pub mod model;
pub mod pipeline;
pub mod harness;
pub mod scoring;
pub mod cli;
pub mod cluster;
pub mod stats;
