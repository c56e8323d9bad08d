pub mod config;
pub mod cylinder;
pub mod error;
pub mod fmi;
pub mod image;
pub mod motionfield;
pub mod pipeline;
pub mod pose;
pub mod report;
pub mod sinusoid;
pub mod synth;
