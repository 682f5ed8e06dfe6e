//! Bundled advance widths for the two supported fonts.
//!
//! Widths are in thousandths of an em for printable ASCII (0x20..=0x7E),
//! taken from the standard Helvetica and Times-Roman metrics. Anything
//! outside ASCII is measured at 0.6 em.

use crate::chart::FontFamily;

#[rustfmt::skip]
const HELVETICA: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278,
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556,
    1015, 667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778,
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278, 278, 278, 469, 556,
    333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556,
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584,
];

#[rustfmt::skip]
const TIMES: [u16; 95] = [
    250, 333, 408, 500, 500, 833, 778, 180, 333, 333, 500, 564, 250, 333, 250, 278,
    500, 500, 500, 500, 500, 500, 500, 500, 500, 500, 278, 278, 564, 564, 564, 444,
    921, 722, 667, 667, 722, 611, 556, 722, 722, 333, 389, 722, 611, 889, 722, 722,
    556, 722, 667, 556, 611, 722, 722, 944, 722, 722, 611, 333, 278, 333, 469, 500,
    333, 444, 500, 444, 500, 444, 333, 500, 500, 278, 278, 500, 278, 778, 500, 500,
    500, 500, 333, 389, 278, 500, 500, 722, 500, 500, 444, 480, 200, 480, 541,
];

const FALLBACK: u16 = 600;

impl FontFamily {
    pub fn css_family(self) -> &'static str {
        match self {
            FontFamily::Sans => "Helvetica, Arial, sans-serif",
            FontFamily::Serif => "Times New Roman, Times, serif",
        }
    }

    fn table(self) -> &'static [u16; 95] {
        match self {
            FontFamily::Sans => &HELVETICA,
            FontFamily::Serif => &TIMES,
        }
    }
}

/// Advance width of `text` in pixels at `size` px.
pub fn text_width(text: &str, font: FontFamily, size: f64) -> f64 {
    let table = font.table();
    let units: u32 = text
        .chars()
        .map(|c| {
            let code = c as u32;
            if (0x20..=0x7E).contains(&code) {
                u32::from(table[(code - 0x20) as usize])
            } else {
                u32::from(FALLBACK)
            }
        })
        .sum();
    f64::from(units) * size / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_are_half_em_wide() {
        assert!((text_width("2010", FontFamily::Sans, 10.0) - 22.24).abs() < 1e-9);
        assert!((text_width("2010", FontFamily::Serif, 10.0) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn width_scales_linearly() {
        let a = text_width("Medication", FontFamily::Sans, 12.0);
        let b = text_width("Medication", FontFamily::Sans, 24.0);
        assert!((2.0 * a - b).abs() < 1e-9);
        assert_eq!(text_width("é", FontFamily::Serif, 10.0), 6.0);
    }
}
