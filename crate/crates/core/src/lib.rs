//! Critical-threshold regions, characteristic dynamics and a periodic
//! spectral solver for the 1D Euler-Poisson-alignment system.

pub mod auxlin;
pub mod dynamics;
pub mod geometry;
pub mod kernel;
pub mod params;
pub mod rearrange;
pub mod regions;
pub mod signal;
pub mod solver;
pub mod spectral;
