//! File formats, the training driver, the terminal chat loop and the HTTP
//! service around [`nca_core`].

pub mod chat;
pub mod checkpoint;
pub mod corpus;
pub mod log;
pub mod report;
pub mod server;
pub mod training;

pub use nca_core;
