//! Experiment layer for planar Penning-trap crystals: configuration files,
//! named recipes, output formats, drumhead spectra and the command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod formats;
pub mod recipes;
pub mod spectrum;
