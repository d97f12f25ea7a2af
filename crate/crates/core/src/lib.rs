//! netintent core: a simulated 5G core with telemetry exposure, an analytics
//! store, intent tools behind a typed tool gateway, and a tool-using agent
//! that turns natural-language intents into verified, approved actions.

pub mod agent;
pub mod clock;
pub mod exposure;
pub mod gateway;
pub mod sim;
pub mod stack;
pub mod store;
pub mod tools;

pub use clock::VirtualClock;
pub use exposure::{EventExposure, EventFilter, Notification, Sink};
pub use gateway::{Gateway, ToolCall, ToolDescriptor, ToolGateway, ToolResult};
pub use sim::{CoreSim, SimConfig, TelemetryRecord};
pub use store::AnalyticsStore;
pub use tools::{Engine, EngineHandle};
pub use stack::{Stack, StackConfig};
