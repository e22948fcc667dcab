pub mod cli;
pub mod config;
pub mod gateway;
pub mod report;
pub mod runner;
