//! Operator surface for the netintent stack: the HTTP server that hosts a
//! running stack, a blocking API client, and transcript rendering.

pub mod client;
pub mod render;
pub mod server;

pub use client::{ApiClient, ApiError, SseEvent, DEFAULT_API};
pub use server::{router, serve, AppState};
