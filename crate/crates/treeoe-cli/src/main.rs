//! Command-line front end: analyses of coset actions, cycle towers,
//! truncated tree isometries, and rainbow-coloring correlations.
//!
//! Conventions shared by every subcommand:
//!
//! * JSON reports are `{"schemaVersion": "1", "config": …, "report": …}`;
//!   CSV reports carry the same information in a leading `#` comment line.
//! * Identical configuration (including the seed) produces byte-identical
//!   output; every stochastic subcommand requires an explicit `--seed`.
//! * Exit codes: 0 success, 1 invariant violation (details on stderr and in
//!   the report), 2 usage error.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use treeoe::coloring::{
    self, star_act, twisted_act, twisted_cocycle, ColoringState, CorrelationAction,
    CorrelationRow, FivePointPermutations,
};
use treeoe::schreier::{
    random_transitive_action, tower, CosetAction, CosetActionWire, SchreierError, TowerKind,
};
use treeoe::treeiso::{
    cocycle_identity_check, diagonal_act, orbit_distance, psi, quotient_act, sigma, PairAction,
    QuotientPoint, TruncatedIsometry,
};
use treeoe::words::{ball, GroupKind, GroupPreset, Letter, ReducedWord};

#[derive(Parser)]
#[command(
    name = "treeoe",
    version,
    about = "Orbit-equivalence analyses on free-group Cayley trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coset actions and their Schreier-graph criteria.
    Schreier {
        #[command(subcommand)]
        cmd: SchreierCmd,
    },
    /// Towers of nested cyclic quotients.
    Tower {
        #[command(subcommand)]
        cmd: TowerCmd,
    },
    /// Truncated isometries of the Cayley tree.
    Iso {
        #[command(subcommand)]
        cmd: IsoCmd,
    },
    /// Orbit equivalence of the quotient and diagonal actions.
    Oe {
        #[command(subcommand)]
        cmd: OeCmd,
    },
    /// Rainbow colorings and their correlation series.
    Coloring {
        #[command(subcommand)]
        cmd: ColoringCmd,
    },
}

#[derive(Subcommand)]
enum SchreierCmd {
    /// Analyze one coset action given as JSON ({"n": …, "gens": [[…], …]}).
    Analyze {
        /// Input file with the action.
        file: PathBuf,
    },
    /// Cross-validate the parity trichotomy on random transitive actions.
    BruteforceLemma {
        /// Largest number of points to draw.
        #[arg(long)]
        points: usize,
        /// Number of random actions to test.
        #[arg(long)]
        trials: u64,
        /// Seed for the action sampler.
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TowerCmd {
    /// Build the cycle tower and report level,size,bipartite,gap as CSV.
    Analyze {
        /// Number of points at the first level.
        #[arg(long)]
        base: u64,
        /// Multiplier from one level to the next.
        #[arg(long)]
        step: u64,
        /// Number of levels.
        #[arg(long)]
        depth: u32,
        /// Exponent of each free generator in the cyclic quotient, e.g. 1,1.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        exponents: Vec<i64>,
    },
}

#[derive(Subcommand)]
enum IsoCmd {
    /// Haar-sample truncated isometries and check their invariants.
    Verify {
        /// Free-group rank d.
        #[arg(long)]
        rank: u32,
        /// Truncation radius.
        #[arg(long)]
        radius: u32,
        /// Number of Haar samples.
        #[arg(long)]
        samples: u64,
        /// Seed for sampling.
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum OeCmd {
    /// Check the intertwining map and distance preservation on samples.
    Verify {
        /// Free-group rank d.
        #[arg(long)]
        rank: u32,
        /// Truncation radius (at least 2·max-len + 2).
        #[arg(long)]
        radius: u32,
        /// JSON file with the finite-index coset action.
        #[arg(long)]
        subgroup: PathBuf,
        /// Largest word length compared by orbit distance.
        #[arg(long = "max-len")]
        max_len: u32,
        /// Number of sampled points.
        #[arg(long)]
        samples: u64,
        /// Seed for sampling.
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ColoringCmd {
    /// Exact and Monte Carlo correlation rows as CSV.
    Correlate {
        /// Which action moves the coloring.
        #[arg(long, value_enum)]
        action: ActionArg,
        /// The acting word (letters a, b, A, B; "1" for the identity).
        #[arg(long)]
        word: String,
        /// Root color before acting.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        i: u8,
        /// Root color after acting.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        j: u8,
        /// Also emit rows for word⁰ … wordⁿ.
        #[arg(long = "n-max")]
        n_max: Option<u32>,
        /// Monte Carlo samples per row (0 = exact column only).
        #[arg(long, default_value_t = 0)]
        mc: u64,
        /// Seed; required whenever --mc is positive.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the coloring invariant suite on sampled states.
    Verify {
        /// Number of sampled colorings.
        #[arg(long)]
        samples: u64,
        /// Seed for sampling.
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActionArg {
    Star,
    Twisted,
}

impl From<ActionArg> for CorrelationAction {
    fn from(a: ActionArg) -> Self {
        match a {
            ActionArg::Star => CorrelationAction::Star,
            ActionArg::Twisted => CorrelationAction::Twisted,
        }
    }
}

enum Failure {
    Usage(String),
    Violation(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn violation(e: impl std::fmt::Display) -> Failure {
    Failure::Violation(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Schreier { cmd } => match cmd {
            SchreierCmd::Analyze { file } => schreier_analyze(&file),
            SchreierCmd::BruteforceLemma { points, trials, seed } => {
                bruteforce_lemma(points, trials, seed)
            }
        },
        Command::Tower { cmd } => match cmd {
            TowerCmd::Analyze { base, step, depth, exponents } => {
                tower_analyze(base, step, depth, &exponents)
            }
        },
        Command::Iso { cmd } => match cmd {
            IsoCmd::Verify { rank, radius, samples, seed } => {
                iso_verify(rank, radius, samples, seed)
            }
        },
        Command::Oe { cmd } => match cmd {
            OeCmd::Verify { rank, radius, subgroup, max_len, samples, seed } => {
                oe_verify(rank, radius, &subgroup, max_len, samples, seed)
            }
        },
        Command::Coloring { cmd } => match cmd {
            ColoringCmd::Correlate { action, word, i, j, n_max, mc, seed } => {
                coloring_correlate(action, &word, i, j, n_max, mc, seed)
            }
            ColoringCmd::Verify { samples, seed } => coloring_verify(samples, seed),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Envelope<C: Serialize, R: Serialize> {
    schema_version: &'static str,
    config: C,
    report: R,
}

/// Writes one stdout line, exiting quietly if the reader has gone away
/// (`treeoe … | head` must not panic on the closed pipe).
fn emit(line: impl std::fmt::Display) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{line}").is_err() {
        std::process::exit(0);
    }
}

fn print_json(config: impl Serialize, report: impl Serialize) {
    let envelope = Envelope { schema_version: "1", config, report };
    emit(serde_json::to_string_pretty(&envelope).expect("reports are serializable"));
}

/// The `# …` provenance line carried by CSV outputs.
fn csv_preamble(config: impl Serialize) -> String {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Header<C: Serialize> {
        schema_version: &'static str,
        config: C,
    }
    let header = Header { schema_version: "1", config };
    format!("# {}", serde_json::to_string(&header).expect("configs are serializable"))
}

#[derive(Default, Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckCounts {
    checked: u64,
    violations: u64,
}

impl CheckCounts {
    fn tally(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }
}

fn load_action(file: &PathBuf) -> Result<CosetAction, Failure> {
    let text = fs::read_to_string(file)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", file.display())))?;
    let wire: CosetActionWire = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    CosetAction::try_from(wire).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))
}

fn schreier_analyze(file: &PathBuf) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config<'a> {
        command: &'static str,
        file: &'a str,
    }
    let action = load_action(file)?;
    match action.lemma_even_crosscheck() {
        Ok(report) => {
            let file = file.display().to_string();
            print_json(Config { command: "schreier analyze", file: &file }, report);
            Ok(())
        }
        Err(err) => {
            if let SchreierError::EquivalenceViolation { action, .. } = &err {
                eprintln!(
                    "counterexample action: {}",
                    serde_json::to_string(action).expect("actions are serializable")
                );
            }
            Err(violation(err))
        }
    }
}

fn bruteforce_lemma(points: usize, trials: u64, seed: u64) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config {
        command: &'static str,
        points: usize,
        trials: u64,
        seed: u64,
    }
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Counterexample {
        trial: u64,
        action: CosetAction,
    }
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Report {
        trials: u64,
        max_points: usize,
        violations: u64,
        counterexample: Option<Counterexample>,
    }
    if points == 0 {
        return Err(Failure::Usage("--points must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0u64;
    let mut counterexample = None;
    for trial in 0..trials {
        let n = rng.random_range(1..=points);
        let action = random_transitive_action(2, n, &mut rng);
        if action.lemma_even_crosscheck().is_err() {
            violations += 1;
            counterexample.get_or_insert(Counterexample { trial, action });
        }
    }
    let report = Report { trials, max_points: points, violations, counterexample };
    print_json(Config { command: "schreier bruteforce-lemma", points, trials, seed }, report);
    if violations > 0 {
        Err(Failure::Violation(format!("{violations} of {trials} trials broke the equivalence")))
    } else {
        Ok(())
    }
}

fn tower_analyze(base: u64, step: u64, depth: u32, exponents: &[i64]) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config<'a> {
        command: &'static str,
        base: u64,
        step: u64,
        depth: u32,
        exponents: &'a [i64],
    }
    let levels = tower(TowerKind::Cycle, base, step, depth, exponents).map_err(usage)?;
    let mut rows = Vec::with_capacity(levels.len());
    for (idx, action) in levels.iter().enumerate() {
        let report = action.lemma_even_crosscheck().map_err(violation)?;
        if report.bipartite {
            return Err(Failure::Violation(format!(
                "level {} (size {}) is bipartite: its kernel lies in the even subgroup, \
                 which the tower construction excludes",
                idx + 1,
                action.n()
            )));
        }
        rows.push((idx + 1, action.n(), report));
    }
    emit(csv_preamble(Config { command: "tower analyze", base, step, depth, exponents }));
    emit("level,size,bipartite,gap");
    for (level, size, report) in rows {
        let gap = report.spectral_gap.map(|g| g.to_string()).unwrap_or_default();
        emit(format!("{level},{size},{},{gap}", report.bipartite));
    }
    Ok(())
}

/// A uniformly random reduced word of exactly the requested length.
fn random_word(preset: GroupPreset, len: u32, rng: &mut impl Rng) -> ReducedWord {
    let mut word = ReducedWord::identity(preset);
    while word.len() < len as usize {
        let letter = match preset.kind() {
            GroupKind::Free => {
                let index = rng.random_range(0..preset.degree() / 2);
                let sign = if rng.random::<bool>() { 1 } else { -1 };
                ReducedWord::from_letters(preset, [Letter { index, sign }])
                    .expect("letter within rank")
            }
            GroupKind::UniversalCoxeter => {
                ReducedWord::generator(preset, rng.random_range(0..preset.degree()))
                    .expect("letter within rank")
            }
        };
        let next = word.multiply(&letter).expect("same preset");
        if next.len() > word.len() {
            word = next;
        }
    }
    word
}

fn iso_verify(rank: u32, radius: u32, samples: u64, seed: u64) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config {
        command: &'static str,
        rank: u32,
        radius: u32,
        samples: u64,
        seed: u64,
    }
    #[derive(Default, Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Report {
        validator: CheckCounts,
        inverse_round_trip: CheckCounts,
        sigma_length: CheckCounts,
        sphere_bijectivity: CheckCounts,
        cocycle_identity: CheckCounts,
    }
    if rank == 0 {
        return Err(Failure::Usage("--rank must be at least 1".into()));
    }
    let preset = GroupPreset::free(rank);
    let probe_radius = radius.min(3);
    let probe = ball(preset, probe_radius).map_err(usage)?;
    let identity = TruncatedIsometry::identity(preset, radius).map_err(usage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    for _ in 0..samples {
        let f = TruncatedIsometry::haar(preset, radius, rng.random()).map_err(violation)?;
        report.validator.tally(f.validate().is_ok());
        let inverse = f.inverse();
        let round_trip = inverse.validate().is_ok()
            && f.compose(&inverse).map_err(violation)? == identity
            && inverse.inverse() == f;
        report.inverse_round_trip.tally(round_trip);
        let mut images: Vec<HashSet<ReducedWord>> =
            vec![HashSet::new(); probe_radius as usize + 1];
        for gamma in &probe {
            let s = sigma(gamma, &f).map_err(violation)?;
            report.sigma_length.tally(s.len() == gamma.len());
            images[gamma.len()].insert(s);
        }
        for (k, seen) in images.iter().enumerate() {
            let sphere = probe.iter().filter(|w| w.len() == k).count();
            report.sphere_bijectivity.tally(seen.len() == sphere);
        }
        for _ in 0..10 {
            let lg = rng.random_range(0..=radius / 2);
            let ld = rng.random_range(0..=(radius - lg).min(radius / 2));
            let gamma = random_word(preset, lg, &mut rng);
            let delta = random_word(preset, ld, &mut rng);
            let holds = cocycle_identity_check(&gamma, &delta, &f).map_err(violation)?;
            report.cocycle_identity.tally(holds);
        }
    }
    let total = report.validator.violations
        + report.inverse_round_trip.violations
        + report.sigma_length.violations
        + report.sphere_bijectivity.violations
        + report.cocycle_identity.violations;
    print_json(Config { command: "iso verify", rank, radius, samples, seed }, report);
    if total > 0 {
        Err(Failure::Violation(format!("{total} isometry invariant checks failed")))
    } else {
        Ok(())
    }
}

fn oe_verify(
    rank: u32,
    radius: u32,
    subgroup: &PathBuf,
    max_len: u32,
    samples: u64,
    seed: u64,
) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config<'a> {
        command: &'static str,
        rank: u32,
        radius: u32,
        subgroup: &'a str,
        max_len: u32,
        samples: u64,
        seed: u64,
    }
    #[derive(Default, Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Report {
        intertwining: CheckCounts,
        distance_preservation: CheckCounts,
    }
    let action = load_action(subgroup)?;
    if rank as usize != action.rank() {
        return Err(Failure::Usage(format!(
            "--rank {rank} does not match the {} generators of {}",
            action.rank(),
            subgroup.display()
        )));
    }
    if radius < 2 * max_len + 2 {
        return Err(Failure::Usage(format!(
            "--radius {radius} is below the soundness margin 2·max-len + 2 = {}: \
             truncated comparisons could report false matches",
            2 * max_len + 2
        )));
    }
    let preset = GroupPreset::free(rank);
    let gamma_words = ball(preset, max_len.min(3)).map_err(usage)?;
    let target_words = ball(preset, max_len).map_err(usage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    for _ in 0..samples {
        let iso = TruncatedIsometry::haar(preset, radius, rng.random()).map_err(violation)?;
        let coset = rng.random_range(0..action.n());
        let p = QuotientPoint { iso, coset };
        let p_psi = psi(&p);
        for gamma in &gamma_words {
            let lhs = psi(&quotient_act(gamma, &p, &action).map_err(violation)?);
            let s = sigma(gamma, &p.iso).map_err(violation)?;
            let rhs = diagonal_act(&s, &p_psi, &action).map_err(violation)?;
            report.intertwining.tally(lhs == rhs);
        }
        for w in &target_words {
            let moved = quotient_act(w, &p, &action).map_err(violation)?;
            let dq = orbit_distance(&p, &moved, &action, PairAction::Quotient, max_len)
                .map_err(violation)?;
            let dd = orbit_distance(&p_psi, &psi(&moved), &action, PairAction::Diagonal, max_len)
                .map_err(violation)?;
            report.distance_preservation.tally(dq.is_some() && dq == dd);
        }
    }
    let total = report.intertwining.violations + report.distance_preservation.violations;
    let subgroup_str = subgroup.display().to_string();
    print_json(
        Config {
            command: "oe verify",
            rank,
            radius,
            subgroup: &subgroup_str,
            max_len,
            samples,
            seed,
        },
        report,
    );
    if total > 0 {
        Err(Failure::Violation(format!("{total} orbit-equivalence checks failed")))
    } else {
        Ok(())
    }
}

fn coloring_correlate(
    action: ActionArg,
    word: &str,
    i: u8,
    j: u8,
    n_max: Option<u32>,
    mc: u64,
    seed: Option<u64>,
) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config<'a> {
        command: &'static str,
        action: CorrelationAction,
        word: &'a str,
        i: u8,
        j: u8,
        n_max: Option<u32>,
        mc: u64,
        seed: Option<u64>,
    }
    let preset = GroupPreset::free(2);
    let w = ReducedWord::parse(preset, word).map_err(usage)?;
    if mc > 0 && seed.is_none() {
        return Err(Failure::Usage("--seed is required when --mc > 0".into()));
    }
    let correlation_action = CorrelationAction::from(action);
    let perms = FivePointPermutations::default();
    let words = match n_max {
        Some(m) => {
            // Rows for word⁰, word¹, …, wordᵐ (reduced powers).
            let mut powers = Vec::with_capacity(m as usize + 1);
            let mut cur = ReducedWord::identity(preset);
            for _ in 0..=m {
                powers.push(cur.clone());
                cur = cur.multiply(&w).expect("same preset");
            }
            powers
        }
        None => vec![w.clone()],
    };
    emit(csv_preamble(Config {
        command: "coloring correlate",
        action: correlation_action,
        word,
        i,
        j,
        n_max,
        mc,
        seed,
    }));
    emit("n,word,exact,mc,stderr");
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    for wk in &words {
        let row: CorrelationRow = if mc == 0 {
            coloring::exact_row(correlation_action, wk, i, j, &perms)
        } else {
            let row_seed = rng.as_mut().expect("checked above").random::<u64>();
            coloring::mc_correlation(correlation_action, wk, i, j, mc, row_seed, &perms)
                .map_err(violation)?
        };
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        emit(format!(
            "{},{},{},{},{}",
            row.n,
            row.word,
            row.exact_value,
            fmt(row.mc_estimate),
            fmt(row.mc_std_err)
        ));
    }
    Ok(())
}

fn coloring_verify(samples: u64, seed: u64) -> Result<(), Failure> {
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Config {
        command: &'static str,
        samples: u64,
        seed: u64,
    }
    #[derive(Default, Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Report {
        rainbow_neighborhoods: CheckCounts,
        root_equivariance: CheckCounts,
        undo: CheckCounts,
        cocycle_length: CheckCounts,
        cocycle_relation: CheckCounts,
        multiplicativity: CheckCounts,
    }
    let preset = GroupPreset::free(2);
    let perms = FivePointPermutations::default();
    let letters: Vec<ReducedWord> = ball(preset, 1).map_err(usage)?
        .into_iter()
        .filter(|w| w.len() == 1)
        .collect();
    let small = ball(preset, 2).map_err(usage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    for _ in 0..samples {
        let state = ColoringState::sample(rng.random());
        // Rainbow closed neighborhoods at random vertices.
        for _ in 0..20 {
            let len = rng.random_range(0..6);
            let v = random_word(preset, len, &mut rng);
            let mut seen = [false; 5];
            seen[state.color(&v) as usize - 1] = true;
            let mut ok = true;
            for s in &letters {
                let c = state.color(&v.multiply(s).expect("same preset")) as usize - 1;
                ok &= !seen[c];
                seen[c] = true;
            }
            report.rainbow_neighborhoods.tally(ok && seen.iter().all(|&b| b));
        }
        // Root-color equivariance of the twisted action.
        for w in small.iter().cloned().chain((0..2).map(|_| random_word(preset, 5, &mut rng))) {
            let moved = twisted_act(&w, &state, &perms).map_err(violation)?;
            report
                .root_equivariance
                .tally(moved.root_color() == perms.pi(&w, state.root_color()));
        }
        // Each letter's twist undoes itself.
        for s in &letters {
            let there = twisted_act(s, &state, &perms).map_err(violation)?;
            let back = twisted_act(&s.inverse(), &there, &perms).map_err(violation)?;
            report.undo.tally(back == state);
        }
        // The cocycle preserves length and conjugates ⋆ into *.
        for _ in 0..3 {
            let len = rng.random_range(1..=6);
            let w = random_word(preset, len, &mut rng);
            let c = twisted_cocycle(&w, &state, &perms).map_err(violation)?;
            report.cocycle_length.tally(c.len() == w.len());
            let via_star = star_act(&c, &state);
            let via_twist = twisted_act(&w, &state, &perms).map_err(violation)?;
            report.cocycle_relation.tally(via_star == via_twist);
        }
        // Multiplicativity over one random factorization.
        let u = random_word(preset, rng.random_range(0..=3), &mut rng);
        let v = random_word(preset, rng.random_range(0..=3), &mut rng);
        let uv = u.multiply(&v).expect("same preset");
        let lhs = twisted_cocycle(&uv, &state, &perms).map_err(violation)?;
        let v_state = twisted_act(&v, &state, &perms).map_err(violation)?;
        let rhs = twisted_cocycle(&u, &v_state, &perms)
            .map_err(violation)?
            .multiply(&twisted_cocycle(&v, &state, &perms).map_err(violation)?)
            .expect("same preset");
        report.multiplicativity.tally(lhs == rhs);
    }
    let total = report.rainbow_neighborhoods.violations
        + report.root_equivariance.violations
        + report.undo.violations
        + report.cocycle_length.violations
        + report.cocycle_relation.violations
        + report.multiplicativity.violations;
    print_json(Config { command: "coloring verify", samples, seed }, report);
    if total > 0 {
        Err(Failure::Violation(format!("{total} coloring invariant checks failed")))
    } else {
        Ok(())
    }
}
