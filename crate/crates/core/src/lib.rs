//! Layer-partitioned DNN inference across a leader/follower UAV swarm:
//! scenario model, route planning, link and energy physics, exhaustive
//! assignment search, a multi-agent environment and diffusion-actor MADDPG.

pub mod assignment;
pub mod diffusion;
pub mod env;
pub mod marl;
pub mod pathplan;
pub mod physics;
pub mod scenario;

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/routes.md")]
    mod routes {}
    #[doc = include_str!("../../../book/src/physics.md")]
    mod physics {}
    #[doc = include_str!("../../../book/src/assignment.md")]
    mod assignment {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
