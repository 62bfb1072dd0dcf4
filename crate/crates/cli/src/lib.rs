pub mod app;
pub mod config;
pub mod convert;
pub mod stages;
