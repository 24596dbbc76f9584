//! Bayesian structure learning for Gaussian graphical models whose graphs are
//! forests or trees.
//!
//! The crate covers exact MAP selection, exact spanning-tree posterior
//! summaries via the weighted Matrix Tree Theorem, shotgun stochastic search
//! and reversible-jump MCMC over local-move graph stores, and the chordal and
//! random-graph utilities used to test them.

pub mod chordal;
pub mod chowliu;
pub mod error;
pub mod evalmetrics;
pub mod explorers;
pub mod graph;
pub mod hiw;
pub mod movestore;
pub mod mtt;
pub mod numerics;
pub mod priors;
pub mod randgraph;

pub use error::{Error, Result};
pub use graph::{BitPattern, GraphClass, LabeledGraph};
