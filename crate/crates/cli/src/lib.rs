//! File formats, command-line operations and the local HTTP service for
//! foldwright projects.

pub mod dxf;
pub mod ops;
pub mod project;
pub mod service;
pub mod stl;
pub mod svg;
pub mod trace;
