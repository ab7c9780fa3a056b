pub mod config;
pub mod output;
pub mod pipeline;
pub mod synth;
pub mod tide_gauge;
