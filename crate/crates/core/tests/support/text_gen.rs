//! Random NFC-stable multilingual text.

use rand::Rng;

use super::chrf_oracle::PUNCTUATION;

/// Code point ranges whose members are NFC-stable on their own and in any sequence.
const SCRIPTS: &[&[(u32, u32)]] = &[
    &[(0x61, 0x7a), (0x41, 0x5a)],
    &[(0x3b1, 0x3c9), (0x391, 0x3a9), (0x3ac, 0x3af)],
    &[(0xac00, 0xd7a3)],
    &[(0x995, 0x9a8), (0x9bf, 0x9c1)],
    &[(0x430, 0x44f)],
];

const SYMBOLS: &[char] = &['$', '+', '=', '<', '>', '|', '~', '0', '1', '7'];

fn letter<R: Rng>(rng: &mut R, script: &[(u32, u32)]) -> char {
    let (lo, hi) = script[rng.gen_range(0..script.len())];
    char::from_u32(rng.gen_range(lo..=hi)).expect("ranges hold valid scalars")
}

/// A word drawn mostly from one script, with occasional punctuation or symbols.
pub fn word<R: Rng>(rng: &mut R, script: &[(u32, u32)]) -> String {
    let len = rng.gen_range(1..=7);
    let mut w = String::new();
    for _ in 0..len {
        match rng.gen_range(0..20) {
            0 => w.push(PUNCTUATION[rng.gen_range(0..PUNCTUATION.len())]),
            1 => w.push(SYMBOLS[rng.gen_range(0..SYMBOLS.len())]),
            _ => w.push(letter(rng, script)),
        }
    }
    w
}

/// One to twelve words joined by assorted whitespace, mixing scripts.
pub fn sentence<R: Rng>(rng: &mut R) -> String {
    let words = rng.gen_range(1..=12);
    let primary = SCRIPTS[rng.gen_range(0..SCRIPTS.len())];
    let mut s = String::new();
    for i in 0..words {
        if i > 0 {
            s.push_str([" ", " ", " ", "  ", "\t"][rng.gen_range(0..5)]);
        }
        let script = if rng.gen_bool(0.8) { primary } else { SCRIPTS[rng.gen_range(0..SCRIPTS.len())] };
        s.push_str(&word(rng, script));
    }
    s
}

/// A sentence and a perturbed copy of it, so pairs share n-grams.
pub fn related_pair<R: Rng>(rng: &mut R) -> (String, String) {
    let a = sentence(rng);
    let mut words: Vec<String> = a.split_whitespace().map(str::to_string).collect();
    let script = SCRIPTS[rng.gen_range(0..SCRIPTS.len())];
    for w in words.iter_mut() {
        if rng.gen_bool(0.3) {
            *w = word(rng, script);
        }
    }
    if rng.gen_bool(0.5) {
        words.reverse();
    }
    (a, words.join(" "))
}

/// A word made only of Latin letters and one made only of Hangul: no shared characters.
pub fn disjoint_pair<R: Rng>(rng: &mut R) -> (String, String) {
    let n = rng.gen_range(1..=5);
    let latin: Vec<String> = (0..n).map(|_| (0..rng.gen_range(1..6)).map(|_| letter(rng, SCRIPTS[0])).collect()).collect();
    let hangul: Vec<String> = (0..rng.gen_range(1..=5))
        .map(|_| (0..rng.gen_range(1..6)).map(|_| letter(rng, SCRIPTS[2])).collect())
        .collect();
    (latin.join(" "), hangul.join(" "))
}
