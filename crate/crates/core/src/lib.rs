pub mod cli;
pub mod device;
pub mod evaluator;
pub mod explorer;
pub mod gateway;
pub mod orchestrator;
pub mod report;
pub mod ui;
