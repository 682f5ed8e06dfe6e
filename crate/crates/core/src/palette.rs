//! Color palettes.
//!
//! The built-in table is generated from a fixed seed: each palette draws
//! eight distinct canonical names and jitters their reference swatches by a
//! few units per channel, so names stay truthful while the exact shades vary.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{ColorName, Rgb};
use crate::rng::split_rng;

pub const BUILTIN_PALETTE_COUNT: usize = 240;
pub const MIN_PALETTE_ENTRIES: usize = 6;
const BUILTIN_ENTRIES: usize = 8;
const BUILTIN_MASTER: u64 = 0x5EED_C0105;

#[derive(Debug, Error)]
pub enum PaletteError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("palette record on line {line} is malformed: {message}")]
    Malformed { line: usize, message: String },
    #[error("palette {id} is invalid: {reason}")]
    Invalid { id: String, reason: String },
    #[error("palette {0} not found")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub rgb: Rgb,
    pub name: ColorName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub palette_id: String,
    pub entries: Vec<PaletteEntry>,
    pub background: Rgb,
}

impl Palette {
    pub fn validate(&self) -> Result<(), PaletteError> {
        let invalid = |reason: &str| PaletteError::Invalid {
            id: self.palette_id.clone(),
            reason: reason.to_string(),
        };
        if self.palette_id.trim().is_empty() {
            return Err(invalid("empty palette_id"));
        }
        if self.entries.len() < MIN_PALETTE_ENTRIES {
            return Err(invalid("fewer than 6 entries"));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.name) {
                return Err(invalid("duplicate canonical name"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct PaletteTable {
    palettes: BTreeMap<String, Palette>,
}

impl PaletteTable {
    pub fn builtin() -> Self {
        let backgrounds: [Rgb; 3] = [[255, 255, 255], [250, 250, 246], [246, 248, 252]];
        let eligible: Vec<ColorName> = ColorName::ALL
            .iter()
            .copied()
            .filter(|c| *c != ColorName::White)
            .collect();
        let mut palettes = BTreeMap::new();
        for i in 0..BUILTIN_PALETTE_COUNT {
            let mut rng = split_rng(BUILTIN_MASTER, "palette", i as u64);
            let mut names = eligible.clone();
            names.shuffle(&mut rng);
            let entries = names
                .into_iter()
                .take(BUILTIN_ENTRIES)
                .map(|name| {
                    let base = name.rgb();
                    let mut rgb = [0u8; 3];
                    for (c, b) in rgb.iter_mut().zip(base) {
                        let jitter: i16 = rng.random_range(-10..=10);
                        *c = (i16::from(b) + jitter).clamp(0, 255) as u8;
                    }
                    PaletteEntry { rgb, name }
                })
                .collect();
            let id = format!("p{i:03}");
            palettes.insert(
                id.clone(),
                Palette {
                    palette_id: id,
                    entries,
                    background: backgrounds[i % backgrounds.len()],
                },
            );
        }
        PaletteTable { palettes }
    }

    pub fn from_palettes(list: Vec<Palette>) -> Result<Self, PaletteError> {
        let mut palettes = BTreeMap::new();
        for p in list {
            p.validate()?;
            if palettes.contains_key(&p.palette_id) {
                return Err(PaletteError::Invalid {
                    id: p.palette_id,
                    reason: "duplicate palette_id".into(),
                });
            }
            palettes.insert(p.palette_id.clone(), p);
        }
        Ok(PaletteTable { palettes })
    }

    /// Load a line-delimited palette file, one palette per line.
    pub fn load(path: &Path) -> Result<Self, PaletteError> {
        let file = fs::File::open(path).map_err(|source| PaletteError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut list = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| PaletteError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let p: Palette = serde_json::from_str(&line).map_err(|e| PaletteError::Malformed {
                line: n + 1,
                message: e.to_string(),
            })?;
            list.push(p);
        }
        Self::from_palettes(list)
    }

    pub fn get(&self, id: &str) -> Result<&Palette, PaletteError> {
        self.palettes
            .get(id)
            .ok_or_else(|| PaletteError::NotFound(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.palettes.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.palettes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.palettes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.palettes.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in self.palettes.values() {
            out.push_str(&serde_json::to_string(p).expect("palette serializes"));
            out.push('\n');
        }
        out
    }
}
