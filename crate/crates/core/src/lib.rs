//! Differential performance evaluation: curate performance-exercising
//! benchmark suites and score code solutions against reference ladders by
//! counted instructions.

pub mod cli;
pub mod cluster;
pub mod curate;
pub mod llmgen;
pub mod measure;
pub mod model;
pub mod sandbox;
pub mod score;
pub mod stub_guest;
pub mod value;
