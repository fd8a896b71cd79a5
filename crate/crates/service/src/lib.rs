//! Scenario runner, replay, metrics and the WebSocket event service.

pub mod cli;
pub mod server;
