//! HTTP/JSON session service around [`SpineEnv`](crate::env::SpineEnv) and a
//! blocking client that implements [`EnvHandle`](crate::env::EnvHandle).

mod client;
mod server;

pub use client::RemoteEnv;
pub use server::{router, serve, spawn_background, ErrorBody, ServiceConfig, ServiceHandle, SpecResponse, PORT_ENV};
