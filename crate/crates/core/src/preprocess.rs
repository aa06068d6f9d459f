//! Punctuation filtration, tokenization, NUM/ENG/UNK normalization, and
//! frequent-word vocabulary construction.
//!
//! Stop words are deliberately kept: any token frequent enough stays in the
//! vocabulary. The reserved entries PAD, UNK, NUM and ENG always hold ids
//! 0 through 3.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const NUM_ID: usize = 2;
pub const ENG_ID: usize = 3;
pub const RESERVED: [&str; 4] = ["PAD", "UNK", "NUM", "ENG"];

/// Unicode general category P* ranges (Unicode 13.0), inclusive.
#[rustfmt::skip]
const PUNCT_RANGES: &[(u32, u32)] = &[
    (0x0021, 0x0023), (0x0025, 0x002A), (0x002C, 0x002F), (0x003A, 0x003B),
    (0x003F, 0x0040), (0x005B, 0x005D), (0x005F, 0x005F), (0x007B, 0x007B),
    (0x007D, 0x007D), (0x00A1, 0x00A1), (0x00A7, 0x00A7), (0x00AB, 0x00AB),
    (0x00B6, 0x00B7), (0x00BB, 0x00BB), (0x00BF, 0x00BF), (0x037E, 0x037E),
    (0x0387, 0x0387), (0x055A, 0x055F), (0x0589, 0x058A), (0x05BE, 0x05BE),
    (0x05C0, 0x05C0), (0x05C3, 0x05C3), (0x05C6, 0x05C6), (0x05F3, 0x05F4),
    (0x0609, 0x060A), (0x060C, 0x060D), (0x061B, 0x061B), (0x061E, 0x061F),
    (0x066A, 0x066D), (0x06D4, 0x06D4), (0x0700, 0x070D), (0x07F7, 0x07F9),
    (0x0830, 0x083E), (0x085E, 0x085E), (0x0964, 0x0965), (0x0970, 0x0970),
    (0x09FD, 0x09FD), (0x0A76, 0x0A76), (0x0AF0, 0x0AF0), (0x0C77, 0x0C77),
    (0x0C84, 0x0C84), (0x0DF4, 0x0DF4), (0x0E4F, 0x0E4F), (0x0E5A, 0x0E5B),
    (0x0F04, 0x0F12), (0x0F14, 0x0F14), (0x0F3A, 0x0F3D), (0x0F85, 0x0F85),
    (0x0FD0, 0x0FD4), (0x0FD9, 0x0FDA), (0x104A, 0x104F), (0x10FB, 0x10FB),
    (0x1360, 0x1368), (0x1400, 0x1400), (0x166E, 0x166E), (0x169B, 0x169C),
    (0x16EB, 0x16ED), (0x1735, 0x1736), (0x17D4, 0x17D6), (0x17D8, 0x17DA),
    (0x1800, 0x180A), (0x1944, 0x1945), (0x1A1E, 0x1A1F), (0x1AA0, 0x1AA6),
    (0x1AA8, 0x1AAD), (0x1B5A, 0x1B60), (0x1BFC, 0x1BFF), (0x1C3B, 0x1C3F),
    (0x1C7E, 0x1C7F), (0x1CC0, 0x1CC7), (0x1CD3, 0x1CD3), (0x2010, 0x2027),
    (0x2030, 0x2043), (0x2045, 0x2051), (0x2053, 0x205E), (0x207D, 0x207E),
    (0x208D, 0x208E), (0x2308, 0x230B), (0x2329, 0x232A), (0x2768, 0x2775),
    (0x27C5, 0x27C6), (0x27E6, 0x27EF), (0x2983, 0x2998), (0x29D8, 0x29DB),
    (0x29FC, 0x29FD), (0x2CF9, 0x2CFC), (0x2CFE, 0x2CFF), (0x2D70, 0x2D70),
    (0x2E00, 0x2E2E), (0x2E30, 0x2E4F), (0x2E52, 0x2E52), (0x3001, 0x3003),
    (0x3008, 0x3011), (0x3014, 0x301F), (0x3030, 0x3030), (0x303D, 0x303D),
    (0x30A0, 0x30A0), (0x30FB, 0x30FB), (0xA4FE, 0xA4FF), (0xA60D, 0xA60F),
    (0xA673, 0xA673), (0xA67E, 0xA67E), (0xA6F2, 0xA6F7), (0xA874, 0xA877),
    (0xA8CE, 0xA8CF), (0xA8F8, 0xA8FA), (0xA8FC, 0xA8FC), (0xA92E, 0xA92F),
    (0xA95F, 0xA95F), (0xA9C1, 0xA9CD), (0xA9DE, 0xA9DF), (0xAA5C, 0xAA5F),
    (0xAADE, 0xAADF), (0xAAF0, 0xAAF1), (0xABEB, 0xABEB), (0xFD3E, 0xFD3F),
    (0xFE10, 0xFE19), (0xFE30, 0xFE52), (0xFE54, 0xFE61), (0xFE63, 0xFE63),
    (0xFE68, 0xFE68), (0xFE6A, 0xFE6B), (0xFF01, 0xFF03), (0xFF05, 0xFF0A),
    (0xFF0C, 0xFF0F), (0xFF1A, 0xFF1B), (0xFF1F, 0xFF20), (0xFF3B, 0xFF3D),
    (0xFF3F, 0xFF3F), (0xFF5B, 0xFF5B), (0xFF5D, 0xFF5D), (0xFF5F, 0xFF65),
    (0x10100, 0x10102), (0x1039F, 0x1039F), (0x103D0, 0x103D0), (0x1056F, 0x1056F),
    (0x10857, 0x10857), (0x1091F, 0x1091F), (0x1093F, 0x1093F), (0x10A50, 0x10A58),
    (0x10A7F, 0x10A7F), (0x10AF0, 0x10AF6), (0x10B39, 0x10B3F), (0x10B99, 0x10B9C),
    (0x10EAD, 0x10EAD), (0x10F55, 0x10F59), (0x11047, 0x1104D), (0x110BB, 0x110BC),
    (0x110BE, 0x110C1), (0x11140, 0x11143), (0x11174, 0x11175), (0x111C5, 0x111C8),
    (0x111CD, 0x111CD), (0x111DB, 0x111DB), (0x111DD, 0x111DF), (0x11238, 0x1123D),
    (0x112A9, 0x112A9), (0x1144B, 0x1144F), (0x1145A, 0x1145B), (0x1145D, 0x1145D),
    (0x114C6, 0x114C6), (0x115C1, 0x115D7), (0x11641, 0x11643), (0x11660, 0x1166C),
    (0x1173C, 0x1173E), (0x1183B, 0x1183B), (0x11944, 0x11946), (0x119E2, 0x119E2),
    (0x11A3F, 0x11A46), (0x11A9A, 0x11A9C), (0x11A9E, 0x11AA2), (0x11C41, 0x11C45),
    (0x11C70, 0x11C71), (0x11EF7, 0x11EF8), (0x11FFF, 0x11FFF), (0x12470, 0x12474),
    (0x16A6E, 0x16A6F), (0x16AF5, 0x16AF5), (0x16B37, 0x16B3B), (0x16B44, 0x16B44),
    (0x16E97, 0x16E9A), (0x16FE2, 0x16FE2), (0x1BC9F, 0x1BC9F), (0x1DA87, 0x1DA8B),
    (0x1E95E, 0x1E95F),
];

fn is_punctuation(c: char) -> bool {
    let cp = c as u32;
    // Bengali danda and double danda live in the Devanagari block (already
    // covered by 0x0964..0x0965); listed here for clarity of intent.
    if c == '।' || c == '॥' {
        return true;
    }
    PUNCT_RANGES
        .binary_search_by(|&(lo, hi)| {
            if cp < lo {
                std::cmp::Ordering::Greater
            } else if cp > hi {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .is_ok()
}

/// Remove every punctuation character; all other characters, including
/// Bengali letters and digits, pass through untouched.
pub fn filter_punctuation(text: &str) -> String {
    text.chars().filter(|&c| !is_punctuation(c)).collect()
}

/// Split on runs of Unicode whitespace. Never yields empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

fn is_bengali_digit(c: char) -> bool {
    ('\u{09E6}'..='\u{09EF}').contains(&c)
}

/// A token made of ASCII and/or Bengali digits, optionally with
/// '.', ',', '/' or '-' separators, and at least one digit.
pub fn is_numeric_token(token: &str) -> bool {
    let mut saw_digit = false;
    for c in token.chars() {
        if c.is_ascii_digit() || is_bengali_digit(c) {
            saw_digit = true;
        } else if !matches!(c, '.' | ',' | '/' | '-') {
            return false;
        }
    }
    saw_digit
}

/// A token made entirely of ASCII letters.
pub fn is_english_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_alphabetic())
}

/// Map a raw token to the string it is counted and embedded as:
/// NUM for numeric tokens, ENG for English tokens, itself otherwise.
pub fn map_token(token: &str) -> &str {
    if is_numeric_token(token) {
        "NUM"
    } else if is_english_token(token) {
        "ENG"
    } else {
        token
    }
}

/// Frequent-token table with reserved PAD/UNK/NUM/ENG entries.
///
/// Ids are dense: reserved entries take 0..4, the remaining tokens are
/// ordered by descending corpus frequency with lexicographic tie-break,
/// which keeps ids stable regardless of corpus line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Build from training-split token lists. NUM/ENG mapping is applied
    /// before counting, so NUM and ENG accumulate counts like any token.
    pub fn build(token_lists: &[Vec<String>], min_count: u64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut raw_counts: HashMap<&str, u64> = HashMap::new();
        let mut total = 0u64;
        for list in token_lists {
            for token in list {
                *raw_counts.entry(map_token(token)).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::InvalidArgument("empty corpus".into()));
        }

        let num_count = raw_counts.remove("NUM").unwrap_or(0);
        let eng_count = raw_counts.remove("ENG").unwrap_or(0);

        let mut kept: Vec<(&str, u64)> = Vec::new();
        let mut unk_count = 0u64;
        for (token, count) in raw_counts {
            if count >= min_count {
                kept.push((token, count));
            } else {
                unk_count += count;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0u64, unk_count, num_count, eng_count];
        for (token, count) in kept {
            tokens.push(token.to_string());
            counts.push(count);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            tokens,
            counts,
            index,
            min_count,
        })
    }

    /// Total entry count including the 4 reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved entries always present
    }

    /// Entries beyond the reserved four.
    pub fn non_reserved_len(&self) -> usize {
        self.tokens.len() - RESERVED.len()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Id of an already-mapped token string, if present.
    pub fn id_of(&self, mapped: &str) -> Option<usize> {
        self.index.get(mapped).copied()
    }

    /// One `token<TAB>id<TAB>count` line per entry, reserved tokens first.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# min_count\t{}", self.min_count);
        for (id, token) in self.tokens.iter().enumerate() {
            let _ = writeln!(out, "{token}\t{id}\t{}", self.counts[id]);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        let mut min_count = 1u64;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# min_count\t") {
                min_count = rest
                    .parse()
                    .map_err(|_| Error::corpus(path, lineno, "bad min_count"))?;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::corpus(path, lineno, "expected token<TAB>id<TAB>count"));
            }
            let id: usize = fields[1]
                .parse()
                .map_err(|_| Error::corpus(path, lineno, "bad id"))?;
            if id != tokens.len() {
                return Err(Error::corpus(path, lineno, "ids out of order"));
            }
            let count: u64 = fields[2]
                .parse()
                .map_err(|_| Error::corpus(path, lineno, "bad count"))?;
            tokens.push(fields[0].to_string());
            counts.push(count);
        }
        if tokens.len() < RESERVED.len() {
            return Err(Error::corpus(path, 1, "missing reserved entries"));
        }
        for (i, name) in RESERVED.iter().enumerate() {
            if tokens[i] != *name {
                return Err(Error::corpus(
                    path,
                    i + 2,
                    format!("reserved slot {i} must be {name}"),
                ));
            }
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            tokens,
            counts,
            index,
            min_count,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Map a raw token to its vocabulary id: numeric tokens to NUM, English
/// tokens to ENG, in-vocabulary tokens to their id, everything else to UNK.
pub fn normalize_token(token: &str, vocab: &Vocabulary) -> usize {
    let mapped = map_token(token);
    match mapped {
        "NUM" => NUM_ID,
        "ENG" => ENG_ID,
        _ => vocab.id_of(mapped).unwrap_or(UNK_ID),
    }
}

/// Filter, tokenize and normalize one question into token ids.
pub fn normalize_text(text: &str, vocab: &Vocabulary) -> Vec<usize> {
    tokenize(&filter_punctuation(text))
        .iter()
        .map(|t| normalize_token(t, vocab))
        .collect()
}

/// Filter, tokenize and apply the NUM/ENG mapping while keeping tokens as
/// strings. Rare tokens stay themselves here; only vocabulary lookups
/// collapse them to UNK.
pub fn mapped_tokens(text: &str) -> Vec<String> {
    tokenize(&filter_punctuation(text))
        .iter()
        .map(|t| map_token(t).to_string())
        .collect()
}
