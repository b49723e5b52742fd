pub mod error;
pub mod filter;
pub mod fog;
pub mod image;
pub mod io;
pub mod se3;
pub mod warp;
pub mod loss;
pub mod solver;
pub mod scene;
pub mod eval;
pub mod config;
pub mod record;
pub mod cli;
