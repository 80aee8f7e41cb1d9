//! Finite-index subgroups of `F_d` as coset permutation actions.
//!
//! A subgroup `Λ ≤ F_d` of index `n` is presented by the action of the `d`
//! free generators on the coset space `{0, …, n−1}`, with `Λ` the stabilizer
//! of the base coset `0`. The Schreier graph — vertices are cosets, edges
//! `p — s·p` over the `2d` generator letters — carries all the structure this
//! module analyzes:
//!
//! * bipartiteness, transitivity of the even (index-two) subgroup, and
//!   reachability of odd stabilizer words: three independently implemented
//!   predicates that are provably equivalent, cross-checked by
//!   [`CosetAction::lemma_even_crosscheck`];
//! * normality of `Λ`, via Schreier generators of the stabilizer;
//! * the spectral gap of the normalized adjacency operator;
//! * exact endpoint distributions of uniform non-backtracking words
//!   ([`CosetAction::sphere_distribution`]), the quantitative mixing
//!   witness;
//! * towers of nested cyclic quotients whose gaps vanish
//!   ([`tower`]).

use crate::words::{GroupKind, GroupPreset, ReducedWord};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Dense eigensolver up to this many cosets; power iteration beyond.
const DENSE_SPECTRAL_LIMIT: usize = 2000;
/// Convergence tolerance of the power iteration (change in Rayleigh
/// quotient between steps).
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 200_000;
/// Fixed seed for the power iteration start vector, for reproducibility.
const POWER_SEED: u64 = 0x00dd_ba11;
/// Largest permitted level size when building a tower.
pub const TOWER_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SchreierError {
    #[error("action must have at least one point")]
    Empty,
    #[error("generator {generator} is not a permutation of 0..{n}")]
    NotAPermutation { generator: usize, n: usize },
    #[error("the generators do not act transitively")]
    NonTransitive,
    #[error("word is over {word_preset:?} but the action has rank {rank}")]
    WrongPreset { word_preset: GroupPreset, rank: usize },
    #[error("coset {point} out of range for an action on {n} points")]
    PointOutOfRange { point: usize, n: usize },
    #[error(
        "equivalence violation on {n} points: bipartite={bipartite}, \
         even_transitive={even_transitive}, odd_stabilizer={odd_stabilizer_reachable}, \
         even_orbit_size={even_orbit_size} (this falsifies a theorem; it is an \
         implementation bug)"
    )]
    EquivalenceViolation {
        action: Box<CosetAction>,
        n: usize,
        bipartite: bool,
        even_transitive: bool,
        odd_stabilizer_reachable: bool,
        even_orbit_size: usize,
    },
    #[error("exponents {exponents:?} do not generate Z/{modulus}")]
    NonGeneratingExponents { exponents: Vec<i64>, modulus: u64 },
    #[error("tower level of size {size} exceeds the cap of {cap} points")]
    TowerTooLarge { size: u64, cap: u64 },
}

/// Wire form of a coset action: `{"n": 5, "gens": [[1,2,3,4,0], [2,3,4,0,1]]}`
/// with 0-indexed image arrays, one per free generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CosetActionWire {
    pub n: usize,
    pub gens: Vec<Vec<usize>>,
}

/// A transitive action of `F_d` on cosets `{0, …, n−1}`, base coset `0`.
///
/// Validated on construction: every generator image array is a bijection and
/// the generated group is transitive. Immutable afterwards; all analyses are
/// pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetAction {
    n: usize,
    gen_perms: Vec<Vec<usize>>,
    inv_perms: Vec<Vec<usize>>,
}

impl Serialize for CosetAction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CosetActionWire { n: self.n, gens: self.gen_perms.clone() }.serialize(serializer)
    }
}

impl TryFrom<CosetActionWire> for CosetAction {
    type Error = SchreierError;
    fn try_from(wire: CosetActionWire) -> Result<Self, SchreierError> {
        CosetAction::new(wire.n, wire.gens)
    }
}

impl CosetAction {
    pub fn new(n: usize, gen_perms: Vec<Vec<usize>>) -> Result<Self, SchreierError> {
        if n == 0 {
            return Err(SchreierError::Empty);
        }
        if gen_perms.is_empty() {
            return Err(SchreierError::Empty);
        }
        let mut inv_perms = Vec::with_capacity(gen_perms.len());
        for (g, perm) in gen_perms.iter().enumerate() {
            if perm.len() != n {
                return Err(SchreierError::NotAPermutation { generator: g, n });
            }
            let mut inv = vec![usize::MAX; n];
            for (p, &q) in perm.iter().enumerate() {
                if q >= n || inv[q] != usize::MAX {
                    return Err(SchreierError::NotAPermutation { generator: g, n });
                }
                inv[q] = p;
            }
            inv_perms.push(inv);
        }
        let action = CosetAction { n, gen_perms, inv_perms };
        if !action.is_transitive() {
            return Err(SchreierError::NonTransitive);
        }
        Ok(action)
    }

    /// Number of cosets (the index of the subgroup).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Rank `d` of the acting free group.
    pub fn rank(&self) -> usize {
        self.gen_perms.len()
    }

    /// The preset whose words this action accepts.
    pub fn preset(&self) -> GroupPreset {
        GroupPreset::free(self.rank() as u32)
    }

    fn is_transitive(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(p) = queue.pop_front() {
            for code in 0..2 * self.rank() as u32 {
                let q = self.act_code(code, p);
                if !seen[q] {
                    seen[q] = true;
                    count += 1;
                    queue.push_back(q);
                }
            }
        }
        count == self.n
    }

    /// Applies one letter, given by its code in `0..2d` (even codes are the
    /// positive generators, odd codes their inverses).
    pub(crate) fn act_code(&self, code: u32, p: usize) -> usize {
        let g = (code / 2) as usize;
        if code % 2 == 0 {
            self.gen_perms[g][p]
        } else {
            self.inv_perms[g][p]
        }
    }

    /// Left action on cosets: `act(uv, p) = act(u, act(v, p))`. Letters of
    /// the word apply right to left.
    pub fn act(&self, w: &ReducedWord, p: usize) -> Result<usize, SchreierError> {
        if w.preset().kind() != GroupKind::Free || w.preset().rank() as usize != self.rank() {
            return Err(SchreierError::WrongPreset { word_preset: w.preset(), rank: self.rank() });
        }
        if p >= self.n {
            return Err(SchreierError::PointOutOfRange { point: p, n: self.n });
        }
        let mut q = p;
        for &code in w.codes().iter().rev() {
            q = self.act_code(code, q);
        }
        Ok(q)
    }

    /// Whether the Schreier graph admits a proper 2-coloring.
    ///
    /// A generator fixing a point is a loop and forces `false`.
    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![u8::MAX; self.n];
        color[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(p) = queue.pop_front() {
            for code in 0..2 * self.rank() as u32 {
                let q = self.act_code(code, p);
                if q == p {
                    return false; // loop: odd cycle of length 1
                }
                if color[q] == u8::MAX {
                    color[q] = 1 - color[p];
                    queue.push_back(q);
                } else if color[q] == color[p] {
                    return false;
                }
            }
        }
        true
    }

    /// Orbit of the base coset under words of even length, computed by BFS
    /// with length-2 steps.
    pub fn even_orbit_size(&self) -> usize {
        let mut seen = vec![false; self.n];
        seen[0] = true;
        let mut size = 1;
        let mut queue = VecDeque::from([0usize]);
        let letters = 2 * self.rank() as u32;
        while let Some(p) = queue.pop_front() {
            for first in 0..letters {
                let mid = self.act_code(first, p);
                for second in 0..letters {
                    let q = self.act_code(second, mid);
                    if !seen[q] {
                        seen[q] = true;
                        size += 1;
                        queue.push_back(q);
                    }
                }
            }
        }
        size
    }

    /// Whether the even subgroup still acts transitively.
    pub fn even_transitive(&self) -> bool {
        self.even_orbit_size() == self.n
    }

    /// Whether some odd-length word stabilizes the base coset, decided by
    /// BFS on (coset, parity) pairs. Equivalent to the complement of
    /// [`CosetAction::is_bipartite`], by an independent algorithm.
    pub fn odd_stabilizer_reachable(&self) -> bool {
        let idx = |p: usize, parity: usize| 2 * p + parity;
        let mut seen = vec![false; 2 * self.n];
        seen[idx(0, 0)] = true;
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        while let Some((p, parity)) = queue.pop_front() {
            for code in 0..2 * self.rank() as u32 {
                let q = self.act_code(code, p);
                let next = (q, 1 - parity);
                if !seen[idx(next.0, next.1)] {
                    seen[idx(next.0, next.1)] = true;
                    queue.push_back(next);
                }
            }
        }
        seen[idx(0, 1)]
    }

    /// Whether the stabilizer of the base coset is normal in `F_d`,
    /// equivalently whether every point stabilizer coincides with it.
    ///
    /// Each Schreier generator `t(s·p)⁻¹ · s · t(p)` of the stabilizer
    /// (where `t(q)` is a BFS transversal word) must act as the identity
    /// permutation.
    pub fn is_normal(&self) -> bool {
        // trans[p][x] = act(t(p), x) for the BFS transversal word t(p).
        let mut trans: Vec<Option<Vec<usize>>> = vec![None; self.n];
        trans[0] = Some((0..self.n).collect());
        let mut queue = VecDeque::from([0usize]);
        let letters = 2 * self.rank() as u32;
        while let Some(p) = queue.pop_front() {
            for code in 0..letters {
                let q = self.act_code(code, p);
                if trans[q].is_none() {
                    let perm =
                        trans[p].as_ref().unwrap().iter().map(|&x| self.act_code(code, x)).collect();
                    trans[q] = Some(perm);
                    queue.push_back(q);
                }
            }
        }
        let trans: Vec<Vec<usize>> = trans.into_iter().map(Option::unwrap).collect();
        let mut inv_trans = vec![vec![0usize; self.n]; self.n];
        for (p, perm) in trans.iter().enumerate() {
            for (x, &y) in perm.iter().enumerate() {
                inv_trans[p][y] = x;
            }
        }
        for p in 0..self.n {
            for code in 0..letters {
                let q = self.act_code(code, p);
                // g = t(q)⁻¹ · s · t(p) stabilizes 0; normality needs it to
                // fix every point.
                for x in 0..self.n {
                    if inv_trans[q][self.act_code(code, trans[p][x])] != x {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Applies the normalized adjacency operator `M = (1/2d) Σ_s P_s` to a
    /// vector, summing over all `2d` letters.
    fn apply_adjacency(&self, src: &[f64], dst: &mut [f64]) {
        dst.fill(0.0);
        for code in 0..2 * self.rank() as u32 {
            for p in 0..self.n {
                dst[p] += src[self.act_code(code, p)];
            }
        }
        let scale = 1.0 / (2.0 * self.rank() as f64);
        for v in dst.iter_mut() {
            *v *= scale;
        }
    }

    /// Second eigenvalue data of the normalized adjacency operator `M`:
    /// the largest eigenvalue below the top one (by value) and the largest
    /// modulus among non-top eigenvalues.
    ///
    /// Dense symmetric eigendecomposition for `n ≤ 2000`; beyond that, power
    /// iteration on `(M+I)/2` and on `M²` with the constant eigenvector
    /// deflated, tolerance 1e-10, deterministic start vector.
    pub fn spectral_gap(&self) -> Result<Lambda2, SchreierError> {
        if self.n < 2 {
            return Err(SchreierError::PointOutOfRange { point: 1, n: self.n });
        }
        if self.n <= DENSE_SPECTRAL_LIMIT {
            Ok(self.spectral_dense())
        } else {
            Ok(self.spectral_power())
        }
    }

    fn spectral_dense(&self) -> Lambda2 {
        let scale = 1.0 / (2.0 * self.rank() as f64);
        let mut m = DMatrix::<f64>::zeros(self.n, self.n);
        for code in 0..2 * self.rank() as u32 {
            for p in 0..self.n {
                m[(self.act_code(code, p), p)] += scale;
            }
        }
        let mut eigen: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eigen.sort_by(|a, b| b.partial_cmp(a).unwrap());
        debug_assert!((eigen[0] - 1.0).abs() < 1e-9, "top eigenvalue must be 1");
        let by_value = eigen[1];
        let by_modulus = eigen[1].abs().max(eigen[self.n - 1].abs());
        Lambda2 { by_value, by_modulus }
    }

    fn spectral_power(&self) -> Lambda2 {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut buf = vec![0.0; n];
        // Largest eigenvalue of (M+I)/2 orthogonal to constants; maps back
        // by λ = 2μ − 1 and preserves the eigenvalue order.
        let mu = power_top(
            |src, dst| {
                self.apply_adjacency(src, dst);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = 0.5 * (*d + s);
                }
            },
            &start,
            &mut buf,
        );
        // Largest eigenvalue of M² orthogonal to constants is the squared
        // modulus; M² merges a ±λ pair into one eigenvalue, so the iteration
        // converges even for bipartite spectra.
        let mut tmp = vec![0.0; n];
        let nu = power_top(
            |src, dst| {
                self.apply_adjacency(src, &mut tmp);
                self.apply_adjacency(&tmp, dst);
            },
            &start,
            &mut buf,
        );
        Lambda2 { by_value: 2.0 * mu - 1.0, by_modulus: nu.max(0.0).sqrt() }
    }

    /// Exact endpoint distribution of `act(w, 0)` for `w` uniform over the
    /// sphere of radius `l` (all reduced words of length exactly `l`).
    pub fn sphere_distribution(&self, l: u32) -> Vec<f64> {
        self.sphere_distribution_from(l, 0)
    }

    /// Same, started at an arbitrary basepoint.
    pub fn sphere_distribution_from(&self, l: u32, basepoint: usize) -> Vec<f64> {
        assert!(basepoint < self.n, "basepoint out of range");
        if l == 0 {
            let mut dist = vec![0.0; self.n];
            dist[basepoint] = 1.0;
            return dist;
        }
        let letters = 2 * self.rank() as u32;
        // state[(p, s)] = probability that the word so far (rightmost
        // letters) moved the basepoint to p, with s the letter applied last.
        let idx = |p: usize, code: u32| p * letters as usize + code as usize;
        let mut state = vec![0.0; self.n * letters as usize];
        let first_weight = 1.0 / letters as f64;
        for code in 0..letters {
            state[idx(self.act_code(code, basepoint), code)] += first_weight;
        }
        let step_weight = 1.0 / (letters - 1) as f64;
        let preset = self.preset();
        for _ in 1..l {
            let mut next = vec![0.0; self.n * letters as usize];
            for p in 0..self.n {
                for last in 0..letters {
                    let mass = state[idx(p, last)];
                    if mass == 0.0 {
                        continue;
                    }
                    for code in 0..letters {
                        if code == preset.inverse_code(last) {
                            continue;
                        }
                        next[idx(self.act_code(code, p), code)] += mass * step_weight;
                    }
                }
            }
            state = next;
        }
        let mut dist = vec![0.0; self.n];
        for p in 0..self.n {
            for code in 0..letters {
                dist[p] += state[idx(p, code)];
            }
        }
        dist
    }

    /// Runs the three equivalent predicates independently, fails loudly if
    /// they disagree, and assembles the full report.
    pub fn lemma_even_crosscheck(&self) -> Result<SchreierReport, SchreierError> {
        let bipartite = self.is_bipartite();
        let even_transitive = self.even_transitive();
        let odd_stabilizer_reachable = self.odd_stabilizer_reachable();
        let even_orbit_size = self.even_orbit_size();
        let expected_orbit = if bipartite { self.n / 2 } else { self.n };
        let consistent = bipartite == !even_transitive
            && bipartite == !odd_stabilizer_reachable
            && even_orbit_size == expected_orbit;
        if !consistent {
            return Err(SchreierError::EquivalenceViolation {
                action: Box::new(self.clone()),
                n: self.n,
                bipartite,
                even_transitive,
                odd_stabilizer_reachable,
                even_orbit_size,
            });
        }
        let spectral = if self.n >= 2 { Some(self.spectral_gap()?) } else { None };
        Ok(SchreierReport {
            transitive: true,
            index: self.n,
            bipartite,
            even_transitive,
            odd_stabilizer_word_found: odd_stabilizer_reachable,
            even_orbit_size,
            normal: self.is_normal(),
            lambda2_by_value: spectral.map(|s| s.by_value),
            lambda2_by_modulus: spectral.map(|s| s.by_modulus),
            spectral_gap: spectral.map(|s| 1.0 - s.by_value),
        })
    }
}

/// Second-eigenvalue summary of the normalized adjacency operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lambda2 {
    pub by_value: f64,
    pub by_modulus: f64,
}

/// Diagnostic summary of one coset action.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SchreierReport {
    pub transitive: bool,
    pub index: usize,
    pub bipartite: bool,
    pub even_transitive: bool,
    pub odd_stabilizer_word_found: bool,
    pub even_orbit_size: usize,
    pub normal: bool,
    /// `None` when the action has a single point (no second eigenvalue).
    pub lambda2_by_value: Option<f64>,
    pub lambda2_by_modulus: Option<f64>,
    pub spectral_gap: Option<f64>,
}

/// Power iteration for the top eigenvalue of a symmetric operator restricted
/// to the complement of the constant vector. `apply` must implement the
/// operator; the Rayleigh quotient is returned once it stabilizes.
fn power_top(mut apply: impl FnMut(&[f64], &mut [f64]), start: &[f64], buf: &mut [f64]) -> f64 {
    let mut x = start.to_vec();
    project_and_normalize(&mut x);
    let mut prev = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        apply(&x, buf);
        let value: f64 = x.iter().zip(buf.iter()).map(|(a, b)| a * b).sum();
        x.copy_from_slice(buf);
        if !project_and_normalize(&mut x) {
            return 0.0; // landed in the kernel
        }
        if (value - prev).abs() < POWER_TOL {
            return value;
        }
        prev = value;
    }
    prev
}

/// Removes the component along the constant vector and normalizes.
/// Returns false if the vector vanished.
fn project_and_normalize(x: &mut [f64]) -> bool {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= f64::MIN_POSITIVE {
        return false;
    }
    for v in x.iter_mut() {
        *v /= norm;
    }
    true
}

/// Samples a transitive coset action by rejection: `d` uniform permutations,
/// kept once the generated group is transitive.
pub fn random_transitive_action(d: usize, n: usize, rng: &mut impl Rng) -> CosetAction {
    assert!(d >= 1 && n >= 1);
    loop {
        let gens: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(rng);
                perm
            })
            .collect();
        match CosetAction::new(n, gens) {
            Ok(action) => return action,
            Err(SchreierError::NonTransitive) => continue,
            Err(other) => unreachable!("sampled permutations must be valid: {other}"),
        }
    }
}

/// Supported tower shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TowerKind {
    /// Cyclic quotients `F_d → Z/(base·stepʲ)`, generator `i` acting by
    /// `+exponents[i]`.
    Cycle,
}

/// Builds the nested family of cyclic quotient actions, one level per
/// `j = 0, …, depth−1` of size `base·stepʲ`.
///
/// The kernels are nested normal subgroups since each level size divides the
/// next. Fails if the exponents do not generate some level (the action would
/// not be transitive) or a level exceeds [`TOWER_CAP`].
pub fn tower(
    kind: TowerKind,
    base: u64,
    step: u64,
    depth: u32,
    exponents: &[i64],
) -> Result<Vec<CosetAction>, SchreierError> {
    let TowerKind::Cycle = kind;
    if base == 0 || step == 0 || exponents.is_empty() {
        return Err(SchreierError::Empty);
    }
    let mut levels = Vec::with_capacity(depth as usize);
    let mut size = base;
    for _ in 0..depth {
        if size > TOWER_CAP {
            return Err(SchreierError::TowerTooLarge { size, cap: TOWER_CAP });
        }
        let m = size;
        let gcd_all = exponents.iter().fold(m, |acc, &e| gcd(acc, e.unsigned_abs() % m));
        if gcd_all != 1 {
            return Err(SchreierError::NonGeneratingExponents {
                exponents: exponents.to_vec(),
                modulus: m,
            });
        }
        let gens = exponents
            .iter()
            .map(|&e| {
                let shift = e.rem_euclid(m as i64) as u64;
                (0..m).map(|p| ((p + shift) % m) as usize).collect()
            })
            .collect();
        levels.push(CosetAction::new(m as usize, gens)?);
        size = size.saturating_mul(step);
    }
    Ok(levels)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}
