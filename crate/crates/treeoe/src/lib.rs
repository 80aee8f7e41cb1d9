//! Computational orbit equivalence on free-group Cayley trees.
//!
//! The crate has four layers, each usable on its own:
//!
//! * [`words`] — reduced-word arithmetic for free groups `F_d` and universal
//!   Coxeter groups `W_m`, plus ball enumeration in the Cayley tree.
//! * [`schreier`] — finite-index subgroups presented as transitive coset
//!   actions; bipartiteness / even-subgroup criteria, normality, spectral
//!   gaps, non-backtracking sphere distributions, and cycle towers.
//! * [`treeiso`] — truncated isometries of the Cayley tree fixing the
//!   identity, Haar sampling, the length-preserving cocycle `sigma`, and the
//!   quotient/diagonal action pair with its intertwining map `psi`.
//! * [`coloring`] — rainbow 5-colorings of the 4-regular tree, the
//!   translation action `*` and the twisted action `⋆`, the cocycle relating
//!   them, and exact plus Monte Carlo correlation series.

pub mod coloring;
pub mod schreier;
pub mod treeiso;
pub mod words;

pub use coloring::{
    ColoringError, ColoringState, CorrelationAction, CorrelationRow, CorrelationSeries,
    FivePointPermutations,
};
pub use schreier::{CosetAction, SchreierError, SchreierReport};
pub use treeiso::{PairAction, QuotientPoint, TreeIsoError, TruncatedIsometry};
pub use words::{GroupKind, GroupPreset, Letter, ReducedWord, WordError};
