//! Binary STL files.
//!
//! Writing goes through the core encoder; reading is implemented separately
//! here so that the byte layout can be checked against a second parser.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use foldwright_core::fab::{stl_bytes, TriangleMesh};
use thiserror::Error;

const HEADER_LEN: usize = 80;
const FACET_LEN: usize = 50;

#[derive(Debug, Error)]
pub enum StlError {
    #[error("file is {0} bytes, shorter than the 84-byte header")]
    TooShort(usize),
    #[error("header declares {declared} facets but the body holds {actual} bytes")]
    LengthMismatch { declared: u32, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
    pub attribute: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StlFile {
    pub header: [u8; 80],
    pub facets: Vec<Facet>,
}

fn f32_at(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

fn vec3_at(bytes: &[u8], offset: usize) -> [f32; 3] {
    [f32_at(bytes, offset), f32_at(bytes, offset + 4), f32_at(bytes, offset + 8)]
}

pub fn parse_stl(bytes: &[u8]) -> Result<StlFile, StlError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(StlError::TooShort(bytes.len()));
    }
    let mut header = [0u8; 80];
    header.copy_from_slice(&bytes[..HEADER_LEN]);
    let declared = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().expect("4 bytes"));
    let body = &bytes[HEADER_LEN + 4..];
    if body.len() != declared as usize * FACET_LEN {
        return Err(StlError::LengthMismatch {
            declared,
            actual: body.len(),
        });
    }
    let facets = body
        .chunks_exact(FACET_LEN)
        .map(|c| Facet {
            normal: vec3_at(c, 0),
            vertices: [vec3_at(c, 12), vec3_at(c, 24), vec3_at(c, 36)],
            attribute: u16::from_le_bytes([c[48], c[49]]),
        })
        .collect();
    Ok(StlFile { header, facets })
}

pub fn read_stl(path: &Path) -> Result<StlFile, StlError> {
    parse_stl(&fs::read(path)?)
}

pub fn write_stl(path: &Path, mesh: &TriangleMesh) -> Result<(), StlError> {
    fs::write(path, stl_bytes(mesh))?;
    Ok(())
}

/// Closedness and volume computed from the facet soup alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SoupCheck {
    pub facets: usize,
    /// Directed edges without a matching reverse edge.
    pub unmatched_edges: usize,
    pub volume: f64,
}

impl SoupCheck {
    pub fn watertight(&self) -> bool {
        self.facets > 0 && self.unmatched_edges == 0
    }
}

/// Welds vertices by exact `f32` bit pattern and pairs every directed edge
/// with its reverse.
pub fn check_soup(file: &StlFile) -> SoupCheck {
    let key = |v: [f32; 3]| (v[0].to_bits(), v[1].to_bits(), v[2].to_bits());
    let mut ids = BTreeMap::new();
    let mut edges: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    let mut volume = 0.0;
    for f in &file.facets {
        let mut idx = [0usize; 3];
        for (k, v) in f.vertices.iter().enumerate() {
            let n = ids.len();
            idx[k] = *ids.entry(key(*v)).or_insert(n);
        }
        for k in 0..3 {
            let (a, b) = (idx[k], idx[(k + 1) % 3]);
            if a == b {
                continue;
            }
            let (lo, hi, s) = if a < b { (a, b, 1) } else { (b, a, -1) };
            *edges.entry((lo, hi)).or_insert(0) += s;
        }
        let p: Vec<[f64; 3]> = f.vertices.iter().map(|v| v.map(f64::from)).collect();
        volume += (p[0][0] * (p[1][1] * p[2][2] - p[1][2] * p[2][1])
            - p[0][1] * (p[1][0] * p[2][2] - p[1][2] * p[2][0])
            + p[0][2] * (p[1][0] * p[2][1] - p[1][1] * p[2][0]))
            / 6.0;
    }
    SoupCheck {
        facets: file.facets.len(),
        unmatched_edges: edges.values().map(|c| c.unsigned_abs() as usize).sum(),
        volume,
    }
}
