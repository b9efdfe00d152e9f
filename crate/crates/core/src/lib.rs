//! Reinforcement-learning shape optimization of 2D extrusion-die flow
//! channels.
//!
//! The crate bundles every stage of the loop: B-spline free-form deformation
//! of a base mesh ([`ffd`]), a stabilized finite-element solver for
//! shear-thinning Stokes flow ([`solver`]), objective post-processing
//! ([`objectives`]), Gym-style environments ([`env`]), a small neural-network
//! kernel ([`nn`]), PPO/A2C/DQN agents ([`agents`]), synchronous
//! vectorized environments ([`vecenv`]) and run orchestration
//! ([`experiment`]).

pub mod agents;
pub mod env;
pub mod error;
pub mod experiment;
pub mod ffd;
pub mod mesh;
pub mod nn;
pub mod objectives;
pub mod solver;
pub mod spline;
pub mod vecenv;

pub use error::{Error, Result};
