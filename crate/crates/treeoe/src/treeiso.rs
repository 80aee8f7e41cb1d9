//! Truncated isometries of the Cayley tree fixing the identity.
//!
//! An element of `Iso₁` — the group of bijective isometries of the Cayley
//! tree fixing the identity vertex — preserves spheres, so its restriction
//! to a radius-`r` ball is a self-bijection of that ball. This module works
//! with exactly those restrictions: [`TruncatedIsometry`] stores the vertex
//! map on the ball, tracks its valid radius, and fails closed (with
//! [`TreeIsoError::RadiusExceeded`]) whenever an operation would need
//! information beyond it. Every operation that consumes a group element of
//! length `k` shrinks the valid radius by `k`.
//!
//! The heart of the module is the length-preserving cocycle
//! `sigma(γ, f) = f(γ⁻¹)⁻¹` together with the action
//! `(γ·f)(δ) = sigma(γ, f)·f(γ⁻¹δ)`, and the two actions they induce on
//! pairs `(f, q)` of an isometry and a coset: the quotient action
//! `γ(f,q) = (γ·f, sigma(γ,f)·q)` and the diagonal action
//! `γ(f,q) = (γ·f, γ·q)`. The involution [`psi`] (pointwise inversion of
//! the isometry) intertwines the two, which [`orbit_distance`] can verify
//! metrically.

use crate::schreier::{CosetAction, SchreierError};
use crate::words::{keyed_rng, GroupPreset, ReducedWord, WordError, BALL_CAP};
use rand::seq::SliceRandom;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeIsoError {
    #[error("word of length {len} exceeds the valid radius {radius}")]
    RadiusExceeded { len: usize, radius: u32 },
    #[error("preset mismatch: isometry over {expected:?}, argument over {got:?}")]
    PresetMismatch { expected: GroupPreset, got: GroupPreset },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Schreier(#[from] SchreierError),
    #[error("invalid isometry: {0}")]
    Invalid(String),
}

const NO_CHILD: u32 = u32::MAX;

/// A radius-`r` ball of the Cayley tree with breadth-first indexing and
/// parent/child navigation tables.
///
/// Indexing is canonical: the ball of radius `r` is an index-for-index
/// prefix of the ball of radius `r + 1`, so vertex indices are comparable
/// across isometries of different radii.
#[derive(Debug)]
pub(crate) struct BallIndex {
    preset: GroupPreset,
    radius: u32,
    words: Vec<ReducedWord>,
    parent: Vec<u32>,
    last_code: Vec<u32>,
    child: Vec<Vec<u32>>,
    /// `sphere_start[k]..sphere_start[k+1]` indexes sphere `k`.
    sphere_start: Vec<usize>,
}

impl BallIndex {
    fn build(preset: GroupPreset, radius: u32, cap: usize) -> Result<BallIndex, WordError> {
        let degree = preset.degree() as usize;
        let mut ball = BallIndex {
            preset,
            radius,
            words: vec![ReducedWord::identity(preset)],
            parent: vec![0],
            last_code: vec![u32::MAX],
            child: vec![vec![NO_CHILD; degree]],
            sphere_start: vec![0, 1],
        };
        for k in 1..=radius {
            let lo = ball.sphere_start[k as usize - 1];
            let hi = ball.sphere_start[k as usize];
            for i in lo..hi {
                let blocked =
                    if i == 0 { None } else { Some(preset.inverse_code(ball.last_code[i])) };
                for code in 0..degree as u32 {
                    if Some(code) == blocked {
                        continue;
                    }
                    if ball.words.len() >= cap {
                        return Err(WordError::BallCapExceeded { radius, cap });
                    }
                    let idx = ball.words.len() as u32;
                    let mut codes = ball.words[i].codes().to_vec();
                    codes.push(code);
                    ball.words.push(ReducedWord::from_codes_unchecked(preset, codes));
                    ball.parent.push(i as u32);
                    ball.last_code.push(code);
                    ball.child.push(vec![NO_CHILD; degree]);
                    ball.child[i][code as usize] = idx;
                }
            }
            ball.sphere_start.push(ball.words.len());
        }
        Ok(ball)
    }

    fn len(&self) -> usize {
        self.words.len()
    }

    /// Index of a word, or `None` if it lies outside the ball.
    fn index_of(&self, w: &ReducedWord) -> Option<u32> {
        let mut i = 0u32;
        for &code in w.codes() {
            i = match self.child[i as usize].get(code as usize) {
                Some(&c) if c != NO_CHILD => c,
                _ => return None,
            };
        }
        Some(i)
    }

    /// Index of `words[i]·s` for a letter code `s`, staying within the ball.
    fn right_mul_letter(&self, i: u32, code: u32) -> Option<u32> {
        if i != 0 && self.last_code[i as usize] == self.preset.inverse_code(code) {
            Some(self.parent[i as usize])
        } else {
            match self.child[i as usize][code as usize] {
                NO_CHILD => None,
                c => Some(c),
            }
        }
    }

    fn sphere_of(&self, i: u32) -> usize {
        self.words[i as usize].len()
    }
}

type BallCache = Mutex<HashMap<(GroupPreset, u32), Arc<BallIndex>>>;

/// Shared cache of ball indexes, keyed by preset and radius.
fn ball_index(preset: GroupPreset, radius: u32) -> Result<Arc<BallIndex>, TreeIsoError> {
    static CACHE: OnceLock<BallCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(found) = guard.get(&(preset, radius)) {
        return Ok(Arc::clone(found));
    }
    let built = Arc::new(BallIndex::build(preset, radius, BALL_CAP)?);
    guard.insert((preset, radius), Arc::clone(&built));
    Ok(built)
}

/// An isometry of the Cayley tree fixing the identity, known on the ball of
/// its `radius`.
#[derive(Clone)]
pub struct TruncatedIsometry {
    ball: Arc<BallIndex>,
    /// `map[i]` is the ball index of the image of vertex `i`.
    map: Vec<u32>,
}

impl fmt::Debug for TruncatedIsometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncatedIsometry")
            .field("preset", &self.ball.preset)
            .field("radius", &self.ball.radius)
            .finish_non_exhaustive()
    }
}

impl PartialEq for TruncatedIsometry {
    fn eq(&self, other: &Self) -> bool {
        self.ball.preset == other.ball.preset
            && self.ball.radius == other.ball.radius
            && self.map == other.map
    }
}
impl Eq for TruncatedIsometry {}

impl TruncatedIsometry {
    /// The identity isometry on the radius-`r` ball.
    pub fn identity(preset: GroupPreset, radius: u32) -> Result<Self, TreeIsoError> {
        let ball = ball_index(preset, radius)?;
        let map = (0..ball.len() as u32).collect();
        Ok(TruncatedIsometry { ball, map })
    }

    /// Draws from the Haar measure on `Iso₁`, truncated to radius `r`:
    /// the root direction assignment is a uniform bijection of the `deg`
    /// directions, and every other vertex gets an independent uniform
    /// bijection of its `deg − 1` forward directions onto its image's
    /// forward directions. Deterministic in `seed`; the per-vertex
    /// randomness is keyed by `(seed, vertex word)`, so enlarging the
    /// radius refines rather than reshuffles a sample.
    pub fn haar(preset: GroupPreset, radius: u32, seed: u64) -> Result<Self, TreeIsoError> {
        let ball = ball_index(preset, radius)?;
        let degree = preset.degree();
        let mut map = vec![0u32; ball.len()];
        if radius == 0 {
            return Ok(TruncatedIsometry { ball, map });
        }
        // Root: uniform bijection of all directions.
        let mut directions: Vec<u32> = (0..degree).collect();
        let mut rng = keyed_rng(seed, TAG_DIRECTIONS, &[]);
        directions.shuffle(&mut rng);
        for code in 0..degree {
            map[ball.child[0][code as usize] as usize] =
                ball.child[0][directions[code as usize] as usize];
        }
        // Deeper vertices, sphere by sphere.
        for k in 1..radius {
            let lo = ball.sphere_start[k as usize];
            let hi = ball.sphere_start[k as usize + 1];
            for i in lo..hi {
                let image = map[i];
                let source_forward = forward_codes(&ball, i as u32);
                let image_forward = forward_codes(&ball, image);
                let mut assignment: Vec<usize> = (0..source_forward.len()).collect();
                let mut rng = keyed_rng(seed, TAG_DIRECTIONS, ball.words[i].codes());
                assignment.shuffle(&mut rng);
                for (t, &code) in source_forward.iter().enumerate() {
                    let child = ball.child[i][code as usize];
                    let image_child =
                        ball.child[image as usize][image_forward[assignment[t]] as usize];
                    map[child as usize] = image_child;
                }
            }
        }
        let iso = TruncatedIsometry { ball, map };
        debug_assert!(iso.validate().is_ok());
        Ok(iso)
    }

    pub fn preset(&self) -> GroupPreset {
        self.ball.preset
    }

    pub fn radius(&self) -> u32 {
        self.ball.radius
    }

    /// Checks all structural invariants: the identity is fixed, spheres map
    /// to spheres bijectively, and adjacency is preserved.
    pub fn validate(&self) -> Result<(), TreeIsoError> {
        let ball = &*self.ball;
        if self.map.len() != ball.len() {
            return Err(TreeIsoError::Invalid("vertex map has the wrong size".into()));
        }
        if self.map.first() != Some(&0) {
            return Err(TreeIsoError::Invalid("the identity vertex is not fixed".into()));
        }
        let mut seen = vec![false; ball.len()];
        for (i, &m) in self.map.iter().enumerate() {
            if m as usize >= ball.len() {
                return Err(TreeIsoError::Invalid(format!("image of vertex {i} out of range")));
            }
            if ball.sphere_of(m) != ball.sphere_of(i as u32) {
                return Err(TreeIsoError::Invalid(format!(
                    "vertex {i} maps across spheres: |w|={} but |image|={}",
                    ball.sphere_of(i as u32),
                    ball.sphere_of(m)
                )));
            }
            if seen[m as usize] {
                return Err(TreeIsoError::Invalid(format!("image of vertex {i} repeats")));
            }
            seen[m as usize] = true;
            if i != 0 {
                // Lengths already match, so adjacency preservation reduces
                // to: the image's parent is the parent's image.
                let parent_image = self.map[ball.parent[i] as usize];
                if ball.parent[m as usize] != parent_image {
                    return Err(TreeIsoError::Invalid(format!(
                        "vertex {i} breaks adjacency with its parent"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_word(&self, w: &ReducedWord) -> Result<u32, TreeIsoError> {
        if w.preset() != self.ball.preset {
            return Err(TreeIsoError::PresetMismatch {
                expected: self.ball.preset,
                got: w.preset(),
            });
        }
        self.ball.index_of(w).ok_or(TreeIsoError::RadiusExceeded {
            len: w.len(),
            radius: self.ball.radius,
        })
    }

    /// The image `f(w)`.
    pub fn apply(&self, w: &ReducedWord) -> Result<ReducedWord, TreeIsoError> {
        let idx = self.check_word(w)?;
        Ok(self.ball.words[self.map[idx as usize] as usize].clone())
    }

    /// The inverse isometry, on the same radius.
    pub fn inverse(&self) -> TruncatedIsometry {
        let mut map = vec![0u32; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            map[m as usize] = i as u32;
        }
        let iso = TruncatedIsometry { ball: Arc::clone(&self.ball), map };
        debug_assert!(iso.validate().is_ok());
        iso
    }

    /// Composition `self ∘ other` (first `other`, then `self`), on the
    /// smaller of the two radii.
    pub fn compose(&self, other: &TruncatedIsometry) -> Result<TruncatedIsometry, TreeIsoError> {
        if self.ball.preset != other.ball.preset {
            return Err(TreeIsoError::PresetMismatch {
                expected: self.ball.preset,
                got: other.ball.preset,
            });
        }
        let radius = self.radius().min(other.radius());
        let ball = ball_index(self.ball.preset, radius)?;
        // Ball indexes are prefix-consistent across radii, so both maps are
        // directly usable on the smaller ball.
        let map = (0..ball.len())
            .map(|i| self.map[other.map[i] as usize])
            .collect();
        let iso = TruncatedIsometry { ball, map };
        debug_assert!(iso.validate().is_ok());
        Ok(iso)
    }

    /// Restriction to a smaller radius.
    pub fn truncate(&self, radius: u32) -> Result<TruncatedIsometry, TreeIsoError> {
        if radius > self.radius() {
            return Err(TreeIsoError::RadiusExceeded { len: radius as usize, radius: self.radius() });
        }
        let ball = ball_index(self.ball.preset, radius)?;
        let map = self.map[..ball.len()].to_vec();
        Ok(TruncatedIsometry { ball, map })
    }
}

/// Forward letter codes of a vertex: every direction except back toward the
/// root (all of them for the root itself).
fn forward_codes(ball: &BallIndex, i: u32) -> Vec<u32> {
    let degree = ball.preset.degree();
    if i == 0 {
        (0..degree).collect()
    } else {
        let blocked = ball.preset.inverse_code(ball.last_code[i as usize]);
        (0..degree).filter(|&c| c != blocked).collect()
    }
}

/// Domain-separation tag for direction shuffles in [`keyed_rng`].
const TAG_DIRECTIONS: u64 = 0;

/// The length-preserving cocycle `sigma(γ, f) = f(γ⁻¹)⁻¹`.
pub fn sigma(gamma: &ReducedWord, f: &TruncatedIsometry) -> Result<ReducedWord, TreeIsoError> {
    Ok(f.apply(&gamma.inverse())?.inverse())
}

/// The action of the group on truncated isometries:
/// `(γ·f)(δ) = sigma(γ, f)·f(γ⁻¹δ)`, valid on radius `f.radius − |γ|`.
pub fn gamma_dot(
    gamma: &ReducedWord,
    f: &TruncatedIsometry,
) -> Result<TruncatedIsometry, TreeIsoError> {
    f.check_word(gamma)?;
    let preset = f.preset();
    let new_radius = f.radius() - gamma.len() as u32;
    let ball = ball_index(preset, new_radius)?;
    let source = &*f.ball;
    // Track j = index of γ⁻¹δ in f's ball while δ runs over the new ball in
    // BFS order; right-multiplying by one letter moves j along one edge.
    // Since f maps edges to edges, f(γ⁻¹δ) also moves along one edge, and
    // left-multiplying by the constant sigma preserves that step — so the
    // image index can be tracked edge-by-edge too, without any word
    // arithmetic. At δ = identity the image is σ·f(γ⁻¹) = identity by the
    // definition of sigma.
    let mut shifted = vec![0u32; ball.len()];
    shifted[0] = source
        .index_of(&gamma.inverse())
        .expect("|γ⁻¹| ≤ f.radius was just checked");
    let mut map = vec![0u32; ball.len()];
    map[0] = 0;
    for i in 1..ball.len() {
        let parent = ball.parent[i] as usize;
        let code = ball.last_code[i];
        let j = source
            .right_mul_letter(shifted[parent], code)
            .expect("|γ⁻¹δ| ≤ |γ| + |δ| ≤ f.radius");
        shifted[i] = j;
        // The letter along the image edge f(γ⁻¹δ_parent) → f(γ⁻¹δ).
        let m = f.map[j as usize];
        let m_parent = f.map[shifted[parent] as usize];
        let step = if source.parent[m as usize] == m_parent {
            source.last_code[m as usize]
        } else if source.parent[m_parent as usize] == m {
            preset.inverse_code(source.last_code[m_parent as usize])
        } else {
            return Err(TreeIsoError::Invalid(format!(
                "f breaks adjacency at {}",
                source.words[j as usize]
            )));
        };
        map[i] = ball.right_mul_letter(map[parent], step).ok_or_else(|| {
            TreeIsoError::Invalid(format!(
                "γ·f failed to preserve length at δ = {}",
                ball.words[i]
            ))
        })?;
    }
    let iso = TruncatedIsometry { ball, map };
    debug_assert!(iso.validate().is_ok());
    Ok(iso)
}

/// Whether `sigma(γδ, f) = sigma(γ, δ·f) · sigma(δ, f)` holds exactly as
/// reduced words. Requires `|γ| + |δ| ≤ f.radius`.
pub fn cocycle_identity_check(
    gamma: &ReducedWord,
    delta: &ReducedWord,
    f: &TruncatedIsometry,
) -> Result<bool, TreeIsoError> {
    if gamma.len() + delta.len() > f.radius() as usize {
        return Err(TreeIsoError::RadiusExceeded {
            len: gamma.len() + delta.len(),
            radius: f.radius(),
        });
    }
    let product = gamma.multiply(delta)?;
    let left = sigma(&product, f)?;
    let delta_f = gamma_dot(delta, f)?;
    let right = sigma(gamma, &delta_f)?.multiply(&sigma(delta, f)?)?;
    Ok(left == right)
}

/// A point of the product space: a truncated isometry and a coset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientPoint {
    pub iso: TruncatedIsometry,
    pub coset: usize,
}

/// Which of the two actions on [`QuotientPoint`]s to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairAction {
    Quotient,
    Diagonal,
}

/// The quotient action `γ(f, q) = (γ·f, sigma(γ,f)·q)`.
pub fn quotient_act(
    gamma: &ReducedWord,
    p: &QuotientPoint,
    action: &CosetAction,
) -> Result<QuotientPoint, TreeIsoError> {
    let s = sigma(gamma, &p.iso)?;
    Ok(QuotientPoint { iso: gamma_dot(gamma, &p.iso)?, coset: action.act(&s, p.coset)? })
}

/// The diagonal action `γ(f, q) = (γ·f, γ·q)`.
pub fn diagonal_act(
    gamma: &ReducedWord,
    p: &QuotientPoint,
    action: &CosetAction,
) -> Result<QuotientPoint, TreeIsoError> {
    Ok(QuotientPoint { iso: gamma_dot(gamma, &p.iso)?, coset: action.act(gamma, p.coset)? })
}

/// The intertwining involution `psi(f, q) = (f⁻¹, q)`.
pub fn psi(p: &QuotientPoint) -> QuotientPoint {
    QuotientPoint { iso: p.iso.inverse(), coset: p.coset }
}

/// Applies one action step by a single letter code.
fn letter_act(
    kind: PairAction,
    code: u32,
    p: &QuotientPoint,
    action: &CosetAction,
) -> Result<QuotientPoint, TreeIsoError> {
    let letter = single_letter(p.iso.preset(), code);
    match kind {
        PairAction::Quotient => quotient_act(&letter, p, action),
        PairAction::Diagonal => diagonal_act(&letter, p, action),
    }
}

fn single_letter(preset: GroupPreset, code: u32) -> ReducedWord {
    ReducedWord::from_codes_unchecked(preset, vec![code])
}

/// Equality of two points as far as both truncations can certify: equal
/// cosets and equal vertex maps on the common radius.
pub fn points_agree(a: &QuotientPoint, b: &QuotientPoint) -> bool {
    if a.coset != b.coset || a.iso.preset() != b.iso.preset() {
        return false;
    }
    let common = a.iso.radius().min(b.iso.radius());
    let len = a
        .iso
        .ball
        .sphere_start
        .get(common as usize + 1)
        .copied()
        .unwrap_or(a.iso.ball.len());
    a.iso.map[..len] == b.iso.map[..len]
}

/// Least `k ≤ max_len` such that some length-`k` word moves `p` to `target`
/// under the chosen action, or `None` if there is none.
///
/// Comparison happens on the largest ball both truncations still cover, so
/// a positive answer is only as sound as the radius margin: to rule out
/// false positives up to distance `L`, start from radius ≥ 2L + 2.
pub fn orbit_distance(
    p: &QuotientPoint,
    target: &QuotientPoint,
    action: &CosetAction,
    kind: PairAction,
    max_len: u32,
) -> Result<Option<u32>, TreeIsoError> {
    if max_len as usize > p.iso.radius() as usize {
        return Err(TreeIsoError::RadiusExceeded {
            len: max_len as usize,
            radius: p.iso.radius(),
        });
    }
    if points_agree(p, target) {
        return Ok(Some(0));
    }
    let degree = p.iso.preset().degree();
    // Breadth-first over reduced words, extending on the left so each step
    // is one letter action applied to the parent's cached state.
    let mut frontier: Vec<(u32, QuotientPoint)> = Vec::new();
    for code in 0..degree {
        let next = letter_act(kind, code, p, action)?;
        if points_agree(&next, target) {
            return Ok(Some(1));
        }
        frontier.push((code, next));
    }
    for k in 2..=max_len {
        let mut next_frontier = Vec::with_capacity(frontier.len() * (degree as usize - 1));
        for (first, state) in &frontier {
            for code in 0..degree {
                if code == p.iso.preset().inverse_code(*first) {
                    continue; // would cancel: the word c·w is not reduced
                }
                let next = letter_act(kind, code, state, action)?;
                if points_agree(&next, target) {
                    return Ok(Some(k));
                }
                next_frontier.push((code, next));
            }
        }
        frontier = next_frontier;
    }
    Ok(None)
}
