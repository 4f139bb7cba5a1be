pub mod attributes;
pub mod cli;
pub mod detector;
pub mod facedb;
pub mod imagecore;
pub mod interface;
pub mod pipeline;
pub mod recognizer;
pub mod synth;
