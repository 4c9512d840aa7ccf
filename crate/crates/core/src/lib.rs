//! Deterministic discrete-event simulation of federated learning over a
//! multi-orbit LEO constellation, orchestrated by one or more high-altitude
//! platforms (or ground stations) acting as parameter servers.

pub mod orbital;
pub mod links;
pub mod learning;
pub mod simengine;
pub mod protocol;
pub mod experiment;
