//! Neuroevolution of feed-forward network topologies.
//!
//! Networks are described by graph [`genome`]s, compiled into dense-layer
//! evaluators by [`netexec`], trained by gradient descent between generations
//! ([`trainer`]) on the tasks in [`env`], and selected by the generational
//! loop in [`evolution`]. Lineages are recorded in a [`phylogeny`].

pub mod genome;
pub mod env;
pub mod netexec;
pub mod phylogeny;
pub mod seed;
pub mod trainer;
pub mod evolution;
pub mod config;
pub mod cli;
