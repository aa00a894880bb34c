//! String-stability analysis of heterogeneous IDM traffic and tuning of
//! automated-vehicle parameters for weak string stability.

pub mod config;
pub mod io;
pub mod linear;
pub mod model;
pub mod optimize;
pub mod ring;
pub mod sim;
