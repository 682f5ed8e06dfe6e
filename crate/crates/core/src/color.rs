//! The closed color-name vocabulary.
//!
//! Sixteen basic web color names plus light/dark variants of blue, green,
//! red and gray. Every palette entry carries one of these names, and every
//! color answer is normalized onto one of them.

use serde::{Deserialize, Serialize};
use std::fmt;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum ColorName {
    Black,
    Silver,
    Gray,
    White,
    Maroon,
    Red,
    Purple,
    Fuchsia,
    Green,
    Lime,
    Olive,
    Yellow,
    Navy,
    Blue,
    Teal,
    Aqua,
    LightBlue,
    DarkBlue,
    LightGreen,
    DarkGreen,
    LightRed,
    DarkRed,
    LightGray,
    DarkGray,
}

impl ColorName {
    pub const ALL: [ColorName; 24] = [
        ColorName::Black,
        ColorName::Silver,
        ColorName::Gray,
        ColorName::White,
        ColorName::Maroon,
        ColorName::Red,
        ColorName::Purple,
        ColorName::Fuchsia,
        ColorName::Green,
        ColorName::Lime,
        ColorName::Olive,
        ColorName::Yellow,
        ColorName::Navy,
        ColorName::Blue,
        ColorName::Teal,
        ColorName::Aqua,
        ColorName::LightBlue,
        ColorName::DarkBlue,
        ColorName::LightGreen,
        ColorName::DarkGreen,
        ColorName::LightRed,
        ColorName::DarkRed,
        ColorName::LightGray,
        ColorName::DarkGray,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ColorName::Black => "black",
            ColorName::Silver => "silver",
            ColorName::Gray => "gray",
            ColorName::White => "white",
            ColorName::Maroon => "maroon",
            ColorName::Red => "red",
            ColorName::Purple => "purple",
            ColorName::Fuchsia => "fuchsia",
            ColorName::Green => "green",
            ColorName::Lime => "lime",
            ColorName::Olive => "olive",
            ColorName::Yellow => "yellow",
            ColorName::Navy => "navy",
            ColorName::Blue => "blue",
            ColorName::Teal => "teal",
            ColorName::Aqua => "aqua",
            ColorName::LightBlue => "light blue",
            ColorName::DarkBlue => "dark blue",
            ColorName::LightGreen => "light green",
            ColorName::DarkGreen => "dark green",
            ColorName::LightRed => "light red",
            ColorName::DarkRed => "dark red",
            ColorName::LightGray => "light gray",
            ColorName::DarkGray => "dark gray",
        }
    }

    /// Reference swatch for the name.
    pub fn rgb(self) -> Rgb {
        match self {
            ColorName::Black => [0, 0, 0],
            ColorName::Silver => [192, 192, 192],
            ColorName::Gray => [128, 128, 128],
            ColorName::White => [255, 255, 255],
            ColorName::Maroon => [128, 0, 0],
            ColorName::Red => [255, 0, 0],
            ColorName::Purple => [128, 0, 128],
            ColorName::Fuchsia => [255, 0, 255],
            ColorName::Green => [0, 128, 0],
            ColorName::Lime => [0, 255, 0],
            ColorName::Olive => [128, 128, 0],
            ColorName::Yellow => [255, 255, 0],
            ColorName::Navy => [0, 0, 128],
            ColorName::Blue => [0, 0, 255],
            ColorName::Teal => [0, 128, 128],
            ColorName::Aqua => [0, 255, 255],
            ColorName::LightBlue => [173, 216, 230],
            ColorName::DarkBlue => [0, 0, 139],
            ColorName::LightGreen => [144, 238, 144],
            ColorName::DarkGreen => [0, 100, 0],
            ColorName::LightRed => [255, 127, 127],
            ColorName::DarkRed => [139, 0, 0],
            ColorName::LightGray => [211, 211, 211],
            ColorName::DarkGray => [64, 64, 64],
        }
    }

    /// Parse a canonical name or a known synonym. Input is expected to be
    /// lower-cased with single spaces.
    pub fn parse(name: &str) -> Option<ColorName> {
        if let Some(c) = ColorName::ALL.iter().find(|c| c.as_str() == name) {
            return Some(*c);
        }
        let canonical = match name {
            "grey" => ColorName::Gray,
            "light grey" | "lightgray" | "lightgrey" => ColorName::LightGray,
            "dark grey" | "darkgray" | "darkgrey" | "charcoal" => ColorName::DarkGray,
            "magenta" => ColorName::Fuchsia,
            "cyan" => ColorName::Aqua,
            "navy blue" => ColorName::Navy,
            "lightblue" | "sky blue" | "pale blue" | "baby blue" => ColorName::LightBlue,
            "darkblue" => ColorName::DarkBlue,
            "lightgreen" | "pale green" => ColorName::LightGreen,
            "darkgreen" | "forest green" => ColorName::DarkGreen,
            "lightred" | "salmon" | "light coral" => ColorName::LightRed,
            "darkred" | "crimson" => ColorName::DarkRed,
            "violet" => ColorName::Purple,
            "bright green" => ColorName::Lime,
            _ => return None,
        };
        Some(canonical)
    }
}

impl fmt::Display for ColorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<ColorName> for &'static str {
    fn from(c: ColorName) -> Self {
        c.as_str()
    }
}

impl TryFrom<String> for ColorName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        ColorName::parse(&s).ok_or_else(|| format!("unknown color name {s:?}"))
    }
}

pub fn rgb_hex(rgb: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}
