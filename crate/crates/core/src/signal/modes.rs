use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationKind {
    Ook,
    Psk,
    Qpsk,
    Fsk,
    Mfsk,
    Multicarrier,
    Usb,
    Lsb,
    Am,
    Radiofax,
}

impl ModulationKind {
    /// Modes driven by a symbol stream (everything except AM, SSB and fax).
    pub fn is_digital(self) -> bool {
        !matches!(self, Self::Usb | Self::Lsb | Self::Am | Self::Radiofax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Baud {
    Rate(f64),
    Variable,
    NotApplicable,
}

impl Baud {
    pub fn rate(self) -> Option<f64> {
        match self {
            Baud::Rate(r) => Some(r),
            _ => None,
        }
    }
}

/// One row of the HF mode table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveformClass {
    pub id: u8,
    pub name: &'static str,
    pub kind: ModulationKind,
    pub baud: Baud,
    pub fsk_shift_hz: Option<f64>,
    pub mfsk_tones: Option<u32>,
    /// Spacing between adjacent MFSK tones or multicarrier subcarriers.
    pub tone_spacing_hz: Option<f64>,
}

pub const MT63_CARRIERS: usize = 64;
pub const MT63_CARRIER_SPACING_HZ: f64 = 1000.0 / MT63_CARRIERS as f64;

const fn row(
    id: u8,
    name: &'static str,
    kind: ModulationKind,
    baud: Baud,
    fsk_shift_hz: Option<f64>,
    mfsk_tones: Option<u32>,
    tone_spacing_hz: Option<f64>,
) -> WaveformClass {
    WaveformClass { id, name, kind, baud, fsk_shift_hz, mfsk_tones, tone_spacing_hz }
}

use Baud::*;
use ModulationKind::*;

/// Ids follow the row order of the standard HF mode table. Olivia tone
/// spacing is bandwidth / tones; DominoEx spacing equals its Baud rate.
pub static CLASSES: [WaveformClass; 18] = [
    row(0, "MorseCode", Ook, Variable, None, None, None),
    row(1, "PSK31", Psk, Rate(31.0), None, None, None),
    row(2, "PSK63", Psk, Rate(63.0), None, None, None),
    row(3, "QPSK31", Qpsk, Rate(31.0), None, None, None),
    row(4, "RTTY45/170", Fsk, Rate(45.0), Some(170.0), None, None),
    row(5, "RTTY50/170", Fsk, Rate(50.0), Some(170.0), None, None),
    // the mode name says 100 Baud; 850 is the shift
    row(6, "RTTY100/850", Fsk, Rate(100.0), Some(850.0), None, None),
    row(7, "Olivia8/250", Mfsk, Rate(31.0), None, Some(8), Some(250.0 / 8.0)),
    row(8, "Olivia16/500", Mfsk, Rate(31.0), None, Some(16), Some(500.0 / 16.0)),
    row(9, "Olivia16/1000", Mfsk, Rate(62.0), None, Some(16), Some(1000.0 / 16.0)),
    row(10, "Olivia32/1000", Mfsk, Rate(31.0), None, Some(32), Some(1000.0 / 32.0)),
    row(11, "DominoEx", Mfsk, Rate(11.0), None, Some(18), Some(11.0)),
    row(12, "MT63_1000", Multicarrier, Rate(10.0), None, None, Some(MT63_CARRIER_SPACING_HZ)),
    row(13, "Navtex/Sitor-B", Fsk, Rate(100.0), Some(170.0), None, None),
    row(14, "USB", Usb, NotApplicable, None, None, None),
    row(15, "LSB", Lsb, NotApplicable, None, None, None),
    row(16, "AM", Am, NotApplicable, None, None, None),
    row(17, "Radiofax", Radiofax, NotApplicable, None, None, None),
];

pub fn class(id: u8) -> Result<&'static WaveformClass> {
    CLASSES.get(id as usize).ok_or_else(|| Error::Contract(format!("class id {id} out of range 0..18")))
}

pub fn class_by_name(name: &str) -> Option<&'static WaveformClass> {
    CLASSES.iter().find(|c| c.name.eq_ignore_ascii_case(name))
}

impl WaveformClass {
    /// Symbol alphabet for digital modes.
    pub fn alphabet_size(&self) -> Option<u32> {
        match self.kind {
            Ook => Some(super::morse::ALPHABET_SIZE),
            Psk | Fsk | Multicarrier => Some(2),
            Qpsk => Some(4),
            Mfsk => self.mfsk_tones,
            Usb | Lsb | Am | Radiofax => None,
        }
    }

    /// Symbol rate used to size a stream. For Morse this is the highest
    /// possible character rate at the fastest keying speed.
    pub fn stream_rate(&self) -> Option<f64> {
        match self.baud {
            Rate(r) => Some(r),
            Variable => Some(super::morse::MAX_CHAR_RATE),
            NotApplicable => None,
        }
    }
}
