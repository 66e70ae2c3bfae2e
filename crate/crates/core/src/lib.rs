//! Muscle-driven inverse tracking on actuated articulated chains.

pub mod config;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod fdat;
pub mod nn;
pub mod ppo;
pub mod service;
