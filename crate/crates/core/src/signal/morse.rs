//! International Morse timing: dot 1 unit, dash 3, element gap 1,
//! character gap 3, word gap 7.

/// 26 letters, 10 digits, and the word space (symbol 36).
pub const ALPHABET_SIZE: u32 = 37;
pub const SPACE: u32 = 36;

/// Keying unit bounds in samples at 6 kHz (40 ms to 80 ms).
pub const MIN_UNIT_SAMPLES: usize = 240;
pub const MAX_UNIT_SAMPLES: usize = 480;

/// The shortest character ("E" plus its trailing gap) lasts 4 units.
pub const MAX_CHAR_RATE: f64 = 6000.0 / (4.0 * MIN_UNIT_SAMPLES as f64);

const CODES: [&str; 36] = [
    ".-", "-...", "-.-.", "-..", ".", "..-.", "--.", "....", "..", ".---", "-.-", ".-..", "--", "-.", "---", ".--.",
    "--.-", ".-.", "...", "-", "..-", "...-", ".--", "-..-", "-.--", "--..", "-----", ".----", "..---", "...--",
    "....-", ".....", "-....", "--...", "---..", "----.",
];

/// Expands characters into (keyed, units) runs. Consecutive gaps merge, so a
/// word space turns the 3-unit character gap into 7 units.
pub fn key_runs(symbols: &[u32]) -> Vec<(bool, usize)> {
    fn gap(runs: &mut Vec<(bool, usize)>, units: usize) {
        match runs.last_mut() {
            Some((false, len)) => *len = (*len).max(units),
            _ => runs.push((false, units)),
        }
    }
    let mut runs = Vec::new();
    for &s in symbols {
        if s == SPACE {
            gap(&mut runs, 7);
            continue;
        }
        let code = CODES[s as usize % CODES.len()];
        for (i, c) in code.chars().enumerate() {
            if i > 0 {
                gap(&mut runs, 1);
            }
            runs.push((true, if c == '-' { 3 } else { 1 }));
        }
        gap(&mut runs, 3);
    }
    runs
}
