//! Multi-agent reinforcement learning on a small supply chain, with an
//! optional manager agent that pays factories to steer their ordering.
//!
//! Layers, bottom up: [`env`] simulates the chain, [`game`] turns it into a
//! simultaneous-move game with flat observations, [`manager`] adds the
//! incentive-paying agent, [`neural`] and [`ddpg`] hold the learners, and
//! [`harness`] drives multi-seed experiments and evaluates them.
//!
//! The learning code is generic over [`scalar::Scalar`] (f32 or f64); the
//! aliases below fix the precision.

pub mod config;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod game;
pub mod harness;
pub mod manager;
pub mod neural;
pub mod scalar;

pub use error::{Error, Result};

pub type Mlp32 = neural::Mlp<f32>;
pub type Mlp64 = neural::Mlp<f64>;
pub type DdpgAgent32 = ddpg::DdpgAgent<f32>;
pub type DdpgAgent64 = ddpg::DdpgAgent<f64>;
pub type Trainer32 = ddpg::Trainer<f32>;
pub type Trainer64 = ddpg::Trainer<f64>;
