//! Reduced words and Cayley-tree balls.
//!
//! Elements of a free group `F_d` or a universal Coxeter group `W_m` are kept
//! in reduced form at all times: no adjacent `x x⁻¹` pair for free groups, no
//! adjacent equal letters for Coxeter groups (every Coxeter generator is an
//! involution). Under either convention the Cayley graph is a regular tree —
//! of degree `2d` for `F_d` and of degree `m` for `W_m` — and the word length
//! is the tree distance to the identity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use std::fmt;
use thiserror::Error;

/// Default cap on ball enumeration, in number of words.
pub const BALL_CAP: usize = 10_000_000;

/// Expands `(seed, tag, vertex word)` into an independent, reproducible
/// generator. Keying per-vertex randomness this way is what lets lazily
/// evaluated structures (tree isometries, colorings) stay consistent when
/// queried at growing radii: the decision at a vertex never depends on how
/// much of the tree has been explored.
pub(crate) fn keyed_rng(seed: u64, tag: u64, codes: &[u32]) -> ChaCha8Rng {
    let mut x = splitmix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    x = splitmix64(x ^ tag);
    for &c in codes {
        x = splitmix64(x ^ (c as u64 + 1));
    }
    let mut key = [0u8; 32];
    for (chunk, salt) in key.chunks_exact_mut(8).zip(1u64..) {
        chunk.copy_from_slice(&splitmix64(x ^ salt).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKind {
    /// Free group `F_d`; letters are `x_i` and `x_i⁻¹`.
    Free,
    /// Universal Coxeter group `W_m = Z/2 * … * Z/2`; every letter is an
    /// involution.
    UniversalCoxeter,
}

/// A choice of group family and rank, fixing the generator alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupPreset {
    kind: GroupKind,
    rank: u32,
}

impl GroupPreset {
    /// The free group on `rank` generators.
    ///
    /// # Panics
    /// Panics if `rank == 0`.
    pub fn free(rank: u32) -> Self {
        assert!(rank > 0, "free group rank must be positive");
        GroupPreset { kind: GroupKind::Free, rank }
    }

    /// The universal Coxeter group on `rank` involutive generators.
    ///
    /// # Panics
    /// Panics if `rank == 0`.
    pub fn universal_coxeter(rank: u32) -> Self {
        assert!(rank > 0, "Coxeter rank must be positive");
        GroupPreset { kind: GroupKind::UniversalCoxeter, rank }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Degree of the Cayley tree: `2d` for `F_d`, `m` for `W_m`.
    ///
    /// This also counts the distinct letters of the alphabet; internally each
    /// letter is a code in `0..degree()`.
    pub fn degree(&self) -> u32 {
        match self.kind {
            GroupKind::Free => 2 * self.rank,
            GroupKind::UniversalCoxeter => self.rank,
        }
    }

    /// Code of the inverse of the letter with the given code.
    pub(crate) fn inverse_code(&self, code: u32) -> u32 {
        match self.kind {
            GroupKind::Free => code ^ 1,
            GroupKind::UniversalCoxeter => code,
        }
    }

    fn letter_from_code(&self, code: u32) -> Letter {
        match self.kind {
            GroupKind::Free => Letter { index: code / 2, sign: if code % 2 == 0 { 1 } else { -1 } },
            GroupKind::UniversalCoxeter => Letter { index: code, sign: 1 },
        }
    }

    fn code_from_letter(&self, letter: Letter) -> Result<u32, WordError> {
        if letter.index >= self.rank {
            return Err(WordError::LetterOutOfRange { preset: *self, index: letter.index });
        }
        Ok(match self.kind {
            GroupKind::Free => 2 * letter.index + if letter.sign < 0 { 1 } else { 0 },
            // Coxeter generators are involutions; the sign is immaterial.
            GroupKind::UniversalCoxeter => letter.index,
        })
    }
}

/// One letter of a word: a generator index and an exponent sign.
///
/// For Coxeter presets the sign is always `+1` after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub index: u32,
    pub sign: i8,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("preset mismatch: {0:?} vs {1:?}")]
    PresetMismatch(GroupPreset, GroupPreset),
    #[error("letter index {index} out of range for {preset:?}")]
    LetterOutOfRange { preset: GroupPreset, index: u32 },
    #[error("ball of radius {radius} exceeds the cap of {cap} words")]
    BallCapExceeded { radius: u32, cap: usize },
    #[error("cannot parse {input:?} as a word: {reason}")]
    Parse { input: String, reason: String },
}

/// A group element in reduced form, together with its preset.
///
/// The word length (`len`) equals the distance from the identity in the
/// Cayley tree. Equality, hashing and ordering all refer to the canonical
/// reduced spelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReducedWord {
    preset: GroupPreset,
    /// Letter codes in `0..preset.degree()`, leftmost letter first.
    codes: Vec<u32>,
}

impl ReducedWord {
    /// The empty word.
    pub fn identity(preset: GroupPreset) -> Self {
        ReducedWord { preset, codes: Vec::new() }
    }

    /// The positive letter `x_index`.
    pub fn generator(preset: GroupPreset, index: u32) -> Result<Self, WordError> {
        let code = preset.code_from_letter(Letter { index, sign: 1 })?;
        Ok(ReducedWord { preset, codes: vec![code] })
    }

    /// Builds a word from arbitrary (not necessarily reduced) letters,
    /// reducing as it goes.
    pub fn from_letters(
        preset: GroupPreset,
        letters: impl IntoIterator<Item = Letter>,
    ) -> Result<Self, WordError> {
        let mut w = ReducedWord::identity(preset);
        for letter in letters {
            let code = preset.code_from_letter(letter)?;
            w.push_code(code);
        }
        Ok(w)
    }

    /// Builds a word from `(index, sign)` pairs, the JSON wire form.
    pub fn from_letter_pairs(preset: GroupPreset, pairs: &[(u32, i8)]) -> Result<Self, WordError> {
        Self::from_letters(preset, pairs.iter().map(|&(index, sign)| Letter { index, sign }))
    }

    /// Parses the compact text syntax: `a`/`A` are `x_0`/`x_0⁻¹`, `b`/`B`
    /// the second generator's letters, and so on; `1` is the identity.
    /// Uppercase letters are accepted for Coxeter presets and mean the same
    /// generator (its own inverse).
    pub fn parse(preset: GroupPreset, input: &str) -> Result<Self, WordError> {
        let err = |reason: &str| WordError::Parse { input: input.to_owned(), reason: reason.to_owned() };
        let trimmed = input.trim();
        if trimmed == "1" {
            return Ok(ReducedWord::identity(preset));
        }
        if trimmed.is_empty() {
            return Err(err("empty input (use \"1\" for the identity)"));
        }
        let mut letters = Vec::with_capacity(trimmed.len());
        for ch in trimmed.chars() {
            let (index, sign) = match ch {
                'a'..='z' => (ch as u32 - 'a' as u32, 1),
                'A'..='Z' => (ch as u32 - 'A' as u32, -1),
                _ => return Err(err(&format!("unexpected character {ch:?}"))),
            };
            if index >= preset.rank {
                return Err(err(&format!("letter {ch:?} needs rank > {index}")));
            }
            letters.push(Letter { index, sign });
        }
        Self::from_letters(preset, letters)
    }

    pub fn preset(&self) -> GroupPreset {
        self.preset
    }

    /// Word length `|w|`; the identity has length 0.
    #[allow(clippy::len_without_is_empty)] // the group-flavored name is `is_identity`
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_identity(&self) -> bool {
        self.codes.is_empty()
    }

    /// Membership in the index-two subgroup of even-length words.
    pub fn is_even(&self) -> bool {
        self.codes.len() % 2 == 0
    }

    /// Letters from left to right.
    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        self.codes.iter().map(|&c| self.preset.letter_from_code(c))
    }

    /// `(index, sign)` pairs, the JSON wire form.
    pub fn letter_pairs(&self) -> Vec<(u32, i8)> {
        self.letters().map(|l| (l.index, l.sign)).collect()
    }

    /// Product `self · other`, reduced.
    pub fn multiply(&self, other: &ReducedWord) -> Result<ReducedWord, WordError> {
        if self.preset != other.preset {
            return Err(WordError::PresetMismatch(self.preset, other.preset));
        }
        let mut out = self.clone();
        out.codes.reserve(other.codes.len());
        for &code in &other.codes {
            out.push_code(code);
        }
        Ok(out)
    }

    /// The group inverse; preserves length.
    pub fn inverse(&self) -> ReducedWord {
        let codes = self.codes.iter().rev().map(|&c| self.preset.inverse_code(c)).collect();
        // Reversal of a reduced word with inverted letters is again reduced.
        ReducedWord { preset: self.preset, codes }
    }

    pub(crate) fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub(crate) fn last_code(&self) -> Option<u32> {
        self.codes.last().copied()
    }

    pub(crate) fn from_codes_unchecked(preset: GroupPreset, codes: Vec<u32>) -> Self {
        debug_assert!(codes.iter().all(|&c| c < preset.degree()));
        debug_assert!(
            codes.windows(2).all(|w| w[1] != preset.inverse_code(w[0])),
            "codes are not reduced"
        );
        ReducedWord { preset, codes }
    }

    /// Appends one letter code, cancelling against the current tail if the
    /// pair reduces.
    pub(crate) fn push_code(&mut self, code: u32) {
        debug_assert!(code < self.preset.degree());
        match self.codes.last() {
            Some(&tail) if tail == self.preset.inverse_code(code) => {
                self.codes.pop();
            }
            _ => self.codes.push(code),
        }
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("1");
        }
        for letter in self.letters() {
            if letter.index < 26 {
                let base = if letter.sign < 0 { b'A' } else { b'a' };
                write!(f, "{}", (base + letter.index as u8) as char)?;
            } else {
                // Ranks beyond the alphabet fall back to an explicit form.
                write!(f, "[{},{}]", letter.index, letter.sign)?;
            }
        }
        Ok(())
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.codes.len()))?;
        for letter in self.letters() {
            seq.serialize_element(&(letter.index, letter.sign))?;
        }
        seq.end()
    }
}

/// All reduced words of length at most `r`, under the default cap.
///
/// Words are returned in breadth-first order: the identity, then the
/// spheres in increasing radius; within each sphere, children are emitted in
/// parent order and ascending letter code. This makes `ball(preset, r)` a
/// prefix of `ball(preset, r + 1)`, which the tree-isometry machinery relies
/// on.
pub fn ball(preset: GroupPreset, r: u32) -> Result<Vec<ReducedWord>, WordError> {
    ball_with_cap(preset, r, BALL_CAP)
}

/// Like [`ball`] with an explicit cap on the number of words.
pub fn ball_with_cap(
    preset: GroupPreset,
    r: u32,
    cap: usize,
) -> Result<Vec<ReducedWord>, WordError> {
    let mut words = vec![ReducedWord::identity(preset)];
    if words.len() > cap {
        return Err(WordError::BallCapExceeded { radius: r, cap });
    }
    let degree = preset.degree();
    let mut sphere_start = 0;
    for _ in 0..r {
        let sphere_end = words.len();
        for i in sphere_start..sphere_end {
            let blocked = words[i].last_code().map(|c| preset.inverse_code(c));
            for code in 0..degree {
                if Some(code) == blocked {
                    continue;
                }
                if words.len() >= cap {
                    return Err(WordError::BallCapExceeded { radius: r, cap });
                }
                let mut codes = Vec::with_capacity(words[i].codes.len() + 1);
                codes.extend_from_slice(words[i].codes());
                codes.push(code);
                words.push(ReducedWord::from_codes_unchecked(preset, codes));
            }
        }
        sphere_start = sphere_end;
    }
    Ok(words)
}
