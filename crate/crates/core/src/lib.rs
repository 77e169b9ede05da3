//! Design, folding, actuation and fabrication model for Miura-ori origami
//! strings described by a planar transition graph.
//!
//! The crate is `no_std` with `alloc`; file formats, the command line and the
//! HTTP service live in the `foldwright` companion crate.

#![no_std]

extern crate alloc;

pub mod cmaes;
pub mod fab;
pub mod fold;
pub mod geom;
pub mod optimize;
pub mod pattern;
pub mod presets;
pub mod string_sim;
pub mod tg;
