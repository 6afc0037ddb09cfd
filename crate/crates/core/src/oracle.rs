//! Brute-force verification of the closed forms and parameter sweeps.
//!
//! The direct path here never goes through [`PayoffCells`] or
//! [`chsh_report`]: payoffs are summed over every (setting, outcome)
//! combination of the box, factorizable boxes are assembled outcome by
//! outcome, and the CHSH value comes from outcome-product correlators. The
//! closed forms come from the library. Every identity is evaluated by
//! [`evaluate_identity`], which is also what [`replay`] uses, so a recorded
//! counterexample reproduces bit for bit.
//!
//! Sample points combine a deterministic lattice over each axis with
//! `sample_count` seeded uniform draws. Points are processed in parallel and
//! merged with an ordered, associative reduction, so reports are identical
//! for identical grids and seeds.
//!
//! [`PayoffCells`]: crate::payoff_engine::PayoffCells
//! [`chsh_report`]: crate::joint_box::chsh_report

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    build_constrained_box, classical_deltas, classical_ess_difference, derived_reduced_chsh,
    ess_margin, printed_reduced_chsh, row_identity_closed_form, ConstrainedFreeParams,
};
use crate::error::{Error, Result};
use crate::game_model::{omegas, GameMatrix};
use crate::joint_box::{
    chsh_report, exchange_symmetry_residuals, outcome_index, FactorizableParams, ProbabilityBox,
};
use crate::payoff_engine::{ess_classify, pure_payoffs, row_deltas, EssStatus};
use crate::DEFAULT_TOL;

/// Counterexamples kept per report; counts and maxima cover every check.
pub const MAX_COUNTEREXAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn unit(step: f64) -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            step,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && 0.0 <= self.lo
            && self.lo <= self.hi
            && self.hi <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "range `{name}` = [{}, {}] step {} must satisfy 0 <= lo <= hi <= 1, step > 0",
                self.lo, self.hi, self.step
            )))
        }
    }

    /// `lo + k·step` for every k landing in [lo, hi], rounded to 12 decimals
    /// so that e.g. 3·0.1 is exactly 0.3.
    pub fn lattice(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let v = self.lo + k as f64 * self.step;
                ((v * 1e12).round() / 1e12).min(self.hi)
            })
            .collect()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Per-parameter ranges (defaulting to [0, 1] at `step`), seeded random
/// fill-in, and the tolerance identities are judged against.
///
/// Axis names: `r`, `r_prime`, `s_prime` for factorizable sweeps,
/// `p4`, `p5`, `p8`, `p9` for the constrained family and `x` for the
/// strategy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub step: f64,
    #[serde(default)]
    pub ranges: BTreeMap<String, ParamRange>,
    pub seed: u64,
    pub sample_count: usize,
    pub tol: f64,
}

impl SweepGrid {
    pub fn new(step: f64, seed: u64, sample_count: usize) -> Self {
        Self {
            step,
            ranges: BTreeMap::new(),
            seed,
            sample_count,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_range(mut self, name: &str, lo: f64, hi: f64, step: f64) -> Self {
        self.ranges
            .insert(name.to_string(), ParamRange { lo, hi, step });
        self
    }

    pub fn range(&self, name: &str) -> ParamRange {
        self.ranges
            .get(name)
            .copied()
            .unwrap_or(ParamRange::unit(self.step))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "step {} must be positive",
                self.step
            )));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "tol {} must be non-negative",
                self.tol
            )));
        }
        self.ranges
            .iter()
            .try_for_each(|(name, r)| r.validate(name))
    }

    fn x_grid(&self) -> Vec<f64> {
        self.range("x").lattice()
    }

    /// Lattice over the named axes followed by the seeded random draws.
    fn points(&self, axes: &[&str]) -> Vec<Vec<f64>> {
        let ranges: Vec<ParamRange> = axes.iter().map(|a| self.range(a)).collect();
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for r in &ranges {
            let values = r.lattice();
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        points.extend(
            (0..self.sample_count).map(|_| ranges.iter().map(|r| r.draw(&mut rng)).collect()),
        );
        points
    }
}

// ---------------------------------------------------------------------------
// Direct path
// ---------------------------------------------------------------------------

const OUTCOMES: [i8; 2] = [1, -1];

/// Row player's matrix cell for an outcome pair: (+,+)->a1 ... (-,-)->a4.
fn row_cell(game: &GameMatrix, pi1: i8, pi2: i8) -> f64 {
    match (pi1, pi2) {
        (1, 1) => game.a1,
        (1, -1) => game.a2,
        (-1, 1) => game.a3,
        _ => game.a4,
    }
}

fn entry(bx: &ProbabilityBox, pi1: i8, pi2: i8, a: u8, b: u8) -> f64 {
    bx.p(outcome_index(pi1, pi2, a, b).expect("enumerated arguments are in range"))
}

/// Row player's expected payoff when player 1 picks setting 1 with
/// probability `x` and player 2 with probability `y`, summed over all
/// settings and outcomes.
pub fn direct_payoff(bx: &ProbabilityBox, game: &GameMatrix, x: f64, y: f64) -> f64 {
    let mut total = 0.0;
    for (a, wa) in [(1u8, x), (2u8, 1.0 - x)] {
        for (b, wb) in [(1u8, y), (2u8, 1.0 - y)] {
            for pi1 in OUTCOMES {
                for pi2 in OUTCOMES {
                    total += wa * wb * row_cell(game, pi1, pi2) * entry(bx, pi1, pi2, a, b);
                }
            }
        }
    }
    total
}

/// Row payoff for pure settings (a, b).
fn direct_pure(bx: &ProbabilityBox, game: &GameMatrix, a: u8, b: u8) -> f64 {
    let w = |s: u8| if s == 1 { 1.0 } else { 0.0 };
    direct_payoff(bx, game, w(a), w(b))
}

/// Product box assembled outcome by outcome.
pub fn direct_factorizable_box(r: f64, s: f64, r_prime: f64, s_prime: f64) -> ProbabilityBox {
    let mut p = [0.0; 16];
    for a in [1u8, 2] {
        for b in [1u8, 2] {
            let plus1 = if a == 1 { r } else { s };
            let plus2 = if b == 1 { r_prime } else { s_prime };
            for pi1 in OUTCOMES {
                for pi2 in OUTCOMES {
                    let m1 = if pi1 == 1 { plus1 } else { 1.0 - plus1 };
                    let m2 = if pi2 == 1 { plus2 } else { 1.0 - plus2 };
                    p[outcome_index(pi1, pi2, a, b).unwrap() - 1] = m1 * m2;
                }
            }
        }
    }
    ProbabilityBox::new(p).expect("finite products")
}

/// E(1,1) + E(1,2) + E(2,1) - E(2,2) with `E(a,b) = Σ π1·π2·Pr(π1,π2;a,b)`.
pub fn direct_chsh(bx: &ProbabilityBox) -> f64 {
    let correlator = |a: u8, b: u8| -> f64 {
        OUTCOMES
            .iter()
            .flat_map(|&pi1| OUTCOMES.iter().map(move |&pi2| (pi1, pi2)))
            .map(|(pi1, pi2)| f64::from(pi1 * pi2) * entry(bx, pi1, pi2, a, b))
            .sum()
    };
    correlator(1, 1) + correlator(1, 2) + correlator(2, 1) - correlator(2, 2)
}

// ---------------------------------------------------------------------------
// Identities
// ---------------------------------------------------------------------------

/// Every closed form the oracle checks. Inputs are laid out as
/// `[r, s, r', s', extra..]` for factorizable identities and
/// `[p4, p5, p8, p9, extra..]` for constrained ones; extras are `x*, x` for
/// the two ESS-definition parts and `x` for the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    FactorizableEq16First,
    FactorizableEq16Second,
    Eq17Delta1,
    Eq17Delta2,
    Eq18First,
    Eq18Second,
    ConstrainedEq16First,
    ConstrainedEq16Second,
    Eq25,
    Eq25NePreserved,
    Eq30,
    Eq31,
    ReducedChsh,
}

impl Identity {
    pub const ALL: [Identity; 13] = [
        Identity::FactorizableEq16First,
        Identity::FactorizableEq16Second,
        Identity::Eq17Delta1,
        Identity::Eq17Delta2,
        Identity::Eq18First,
        Identity::Eq18Second,
        Identity::ConstrainedEq16First,
        Identity::ConstrainedEq16Second,
        Identity::Eq25,
        Identity::Eq25NePreserved,
        Identity::Eq30,
        Identity::Eq31,
        Identity::ReducedChsh,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Identity::FactorizableEq16First => "factorizable_eq16_first",
            Identity::FactorizableEq16Second => "factorizable_eq16_second",
            Identity::Eq17Delta1 => "eq17_delta1",
            Identity::Eq17Delta2 => "eq17_delta2",
            Identity::Eq18First => "eq18_first",
            Identity::Eq18Second => "eq18_second",
            Identity::ConstrainedEq16First => "constrained_eq16_first",
            Identity::ConstrainedEq16Second => "constrained_eq16_second",
            Identity::Eq25 => "eq25",
            Identity::Eq25NePreserved => "eq25_ne_preserved",
            Identity::Eq30 => "eq30",
            Identity::Eq31 => "eq31",
            Identity::ReducedChsh => "reduced_chsh",
        }
    }

    fn is_factorizable(&self) -> bool {
        matches!(
            self,
            Identity::FactorizableEq16First
                | Identity::FactorizableEq16Second
                | Identity::Eq17Delta1
                | Identity::Eq17Delta2
                | Identity::Eq18First
                | Identity::Eq18Second
        )
    }

    fn extras(&self) -> usize {
        match self {
            Identity::FactorizableEq16First
            | Identity::FactorizableEq16Second
            | Identity::ConstrainedEq16First
            | Identity::ConstrainedEq16Second => 2,
            Identity::Eq18First | Identity::Eq18Second | Identity::Eq25 | Identity::Eq31 => 1,
            _ => 0,
        }
    }
}

/// Closed form and direct value of one identity at `inputs`, or `None` when
/// the inputs do not describe a feasible sample for `game`.
pub fn evaluate_identity(
    identity: Identity,
    game: &GameMatrix,
    inputs: &[f64],
) -> Option<(f64, f64)> {
    if inputs.len() != 4 + identity.extras() {
        return None;
    }
    let extra = &inputs[4..];
    if identity.is_factorizable() {
        let (r, s, rp, sp) = (inputs[0], inputs[1], inputs[2], inputs[3]);
        let params = FactorizableParams::new(r, s, rp, sp).ok()?;
        let bx = direct_factorizable_box(r, s, rp, sp);
        let lib_box = crate::joint_box::box_from_factorizable(&params).ok()?;
        let deltas = row_deltas(&pure_payoffs(&lib_box, game).ok()?);
        let pay = |x: f64, y: f64| direct_payoff(&bx, game, x, y);
        Some(match identity {
            Identity::FactorizableEq16First => {
                let (xs, x) = (extra[0], extra[1]);
                (deltas.first_condition(xs, x), pay(xs, xs) - pay(x, xs))
            }
            Identity::FactorizableEq16Second => {
                let (xs, x) = (extra[0], extra[1]);
                (deltas.second_condition(xs, x), pay(xs, x) - pay(x, x))
            }
            Identity::Eq17Delta1 => {
                let direct = direct_pure(&bx, game, 1, 1)
                    - direct_pure(&bx, game, 2, 1)
                    - direct_pure(&bx, game, 1, 2)
                    + direct_pure(&bx, game, 2, 2);
                (classical_deltas(&params, game).delta1, direct)
            }
            Identity::Eq17Delta2 => {
                let direct = direct_pure(&bx, game, 1, 2) - direct_pure(&bx, game, 2, 2);
                (classical_deltas(&params, game).delta2, direct)
            }
            Identity::Eq18First => {
                let x = extra[0];
                let closed = classical_ess_difference(&params, game, x).ok()?.0;
                (closed, pay(0.0, 0.0) - pay(x, 0.0))
            }
            Identity::Eq18Second => {
                let x = extra[0];
                let closed = classical_ess_difference(&params, game, x).ok()?.1;
                (closed, pay(0.0, x) - pay(x, x))
            }
            _ => unreachable!(),
        })
    } else {
        let o = omegas(game);
        let kappa = o.kappa?;
        let free =
            ConstrainedFreeParams::new(inputs[0], inputs[1], inputs[2], inputs[3], kappa).ok()?;
        let bx = build_constrained_box(&free).ok()?;
        let table = pure_payoffs(&bx, game).ok()?;
        let pay = |x: f64, y: f64| direct_payoff(&bx, game, x, y);
        Some(match identity {
            Identity::ConstrainedEq16First => {
                let (xs, x) = (extra[0], extra[1]);
                (
                    row_deltas(&table).first_condition(xs, x),
                    pay(xs, xs) - pay(x, xs),
                )
            }
            Identity::ConstrainedEq16Second => {
                let (xs, x) = (extra[0], extra[1]);
                (
                    row_deltas(&table).second_condition(xs, x),
                    pay(xs, x) - pay(x, x),
                )
            }
            Identity::Eq25 => {
                let x = extra[0];
                (
                    x * (table.row.sp_sp - table.row.s_sp),
                    pay(0.0, 0.0) - pay(x, 0.0),
                )
            }
            Identity::Eq25NePreserved => (
                0.0,
                direct_pure(&bx, game, 2, 2) - direct_pure(&bx, game, 1, 2),
            ),
            Identity::Eq30 => (
                row_identity_closed_form(&bx, game),
                direct_pure(&bx, game, 2, 1) - direct_pure(&bx, game, 1, 1),
            ),
            Identity::Eq31 => {
                let x = extra[0];
                (x * x * free.margin() * o.omega1, pay(0.0, x) - pay(x, x))
            }
            Identity::ReducedChsh => (derived_reduced_chsh(free.p4, free.p9), direct_chsh(&bx)),
            _ => unreachable!(),
        })
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdentityStats {
    pub checks: u64,
    pub max_abs_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub identity: Identity,
    pub inputs: Vec<f64>,
    pub closed_form: f64,
    pub direct: f64,
}

/// Re-evaluates a recorded counterexample; returns `(closed_form, direct)`.
pub fn replay(game: &GameMatrix, counterexample: &Counterexample) -> Option<(f64, f64)> {
    evaluate_identity(counterexample.identity, game, &counterexample.inputs)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleReport {
    pub tol: f64,
    pub checks_run: u64,
    pub factorizable_samples: u64,
    pub constrained_samples: u64,
    pub skipped_infeasible: u64,
    pub identities: BTreeMap<String, IdentityStats>,
    /// Feasible tuples where the printed `2(2p4 + p9 - 1)` disagrees with the
    /// CHSH value of the completed box.
    pub printed_chsh_mismatches: u64,
    pub printed_chsh_checked: u64,
    /// Total counterexamples, of which at most [`MAX_COUNTEREXAMPLES`] are kept.
    pub counterexample_count: u64,
    pub counterexamples: Vec<Counterexample>,
}

fn nan_aware_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

impl OracleReport {
    fn empty(tol: f64) -> Self {
        Self {
            tol,
            ..Default::default()
        }
    }

    fn record(&mut self, identity: Identity, inputs: Vec<f64>, (closed_form, direct): (f64, f64)) {
        let discrepancy = (closed_form - direct).abs();
        let stats = self
            .identities
            .entry(identity.name().to_string())
            .or_default();
        stats.checks += 1;
        stats.max_abs_discrepancy = nan_aware_max(stats.max_abs_discrepancy, discrepancy);
        self.checks_run += 1;
        if discrepancy.is_nan() || discrepancy > self.tol {
            self.counterexample_count += 1;
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(Counterexample {
                    identity,
                    inputs,
                    closed_form,
                    direct,
                });
            }
        }
    }

    /// Associative merge; `self` precedes `other` in sample order.
    pub fn merge(mut self, other: Self) -> Self {
        self.checks_run += other.checks_run;
        self.factorizable_samples += other.factorizable_samples;
        self.constrained_samples += other.constrained_samples;
        self.skipped_infeasible += other.skipped_infeasible;
        self.printed_chsh_mismatches += other.printed_chsh_mismatches;
        self.printed_chsh_checked += other.printed_chsh_checked;
        self.counterexample_count += other.counterexample_count;
        for (name, stats) in other.identities {
            let mine = self.identities.entry(name).or_default();
            mine.checks += stats.checks;
            mine.max_abs_discrepancy =
                nan_aware_max(mine.max_abs_discrepancy, stats.max_abs_discrepancy);
        }
        let room = MAX_COUNTEREXAMPLES.saturating_sub(self.counterexamples.len());
        self.counterexamples
            .extend(other.counterexamples.into_iter().take(room));
        self
    }

    pub fn max_discrepancy(&self, identity: Identity) -> Option<f64> {
        self.identities
            .get(identity.name())
            .map(|s| s.max_abs_discrepancy)
    }

    pub fn all_within_tolerance(&self) -> bool {
        self.counterexample_count == 0
    }
}

/// Factorizable parameters satisfying `s' = κ`, `r - s = r' - s'`.
/// When Ω1 = Ω2 = 0 every s' is admissible and `s_prime` is its own axis.
fn embedded_factorizable_points(game: &GameMatrix, grid: &SweepGrid) -> (Vec<[f64; 4]>, u64) {
    let o = omegas(game);
    let (points, free_s_prime): (Vec<Vec<f64>>, bool) = match o.kappa {
        Some(k) if (0.0..=1.0).contains(&k) => (grid.points(&["r", "r_prime"]), false),
        None if o.omega2.abs() <= DEFAULT_TOL => (grid.points(&["r", "r_prime", "s_prime"]), true),
        _ => return (Vec::new(), grid.points(&["r", "r_prime"]).len() as u64),
    };
    let mut skipped = 0;
    let mut out = Vec::with_capacity(points.len());
    for pt in points {
        let (r, rp) = (pt[0], pt[1]);
        let sp = if free_s_prime {
            pt[2]
        } else {
            o.kappa.unwrap()
        };
        let s = r - (rp - sp);
        if (-DEFAULT_TOL..=1.0 + DEFAULT_TOL).contains(&s) {
            out.push([r, s.clamp(0.0, 1.0), rp, sp]);
        } else {
            skipped += 1;
        }
    }
    (out, skipped)
}

fn constrained_points(game: &GameMatrix, grid: &SweepGrid) -> Vec<ConstrainedFreeParams> {
    let kappa = omegas(game).kappa.unwrap_or(f64::NAN);
    grid.points(&["p4", "p5", "p8", "p9"])
        .into_iter()
        .map(|p| ConstrainedFreeParams {
            p4: p[0],
            p5: p[1],
            p8: p[2],
            p9: p[3],
            kappa,
        })
        .collect()
}

/// Feasible constrained tuples of the grid with their completed boxes, in
/// sample order. Empty when κ is undefined or outside [0, 1].
pub fn feasible_constrained_samples(
    game: &GameMatrix,
    grid: &SweepGrid,
) -> Result<Vec<(ConstrainedFreeParams, ProbabilityBox)>> {
    grid.validate()?;
    Ok(constrained_points(game, grid)
        .par_iter()
        .filter_map(|free| build_constrained_box(free).ok().map(|bx| (*free, bx)))
        .collect())
}

/// Compares every closed form against the direct computation over the
/// embedded factorizable samples and the feasible constrained samples.
pub fn verify_identities(game: &GameMatrix, grid: &SweepGrid) -> Result<OracleReport> {
    grid.validate()?;
    let xs = grid.x_grid();
    let tol = grid.tol;

    let (factorizable, skipped_f) = embedded_factorizable_points(game, grid);
    let classical = factorizable
        .par_iter()
        .map(|q| {
            let mut rep = OracleReport::empty(tol);
            rep.factorizable_samples = 1;
            let base = q.to_vec();
            let with = |extra: &[f64]| {
                let mut v = base.clone();
                v.extend_from_slice(extra);
                v
            };
            for id in [Identity::Eq17Delta1, Identity::Eq17Delta2] {
                if let Some(vals) = evaluate_identity(id, game, &base) {
                    rep.record(id, base.clone(), vals);
                }
            }
            for &x in &xs {
                for id in [Identity::Eq18First, Identity::Eq18Second] {
                    let inputs = with(&[x]);
                    if let Some(vals) = evaluate_identity(id, game, &inputs) {
                        rep.record(id, inputs, vals);
                    }
                }
                for &x_star in &xs {
                    for id in [
                        Identity::FactorizableEq16First,
                        Identity::FactorizableEq16Second,
                    ] {
                        let inputs = with(&[x_star, x]);
                        if let Some(vals) = evaluate_identity(id, game, &inputs) {
                            rep.record(id, inputs, vals);
                        }
                    }
                }
            }
            rep
        })
        .reduce(|| OracleReport::empty(tol), OracleReport::merge);

    let quantum = constrained_points(game, grid)
        .par_iter()
        .map(|free| {
            let mut rep = OracleReport::empty(tol);
            if build_constrained_box(free).is_err() {
                rep.skipped_infeasible = 1;
                return rep;
            }
            rep.constrained_samples = 1;
            let base = vec![free.p4, free.p5, free.p8, free.p9];
            let with = |extra: &[f64]| {
                let mut v = base.clone();
                v.extend_from_slice(extra);
                v
            };
            for id in [
                Identity::Eq25NePreserved,
                Identity::Eq30,
                Identity::ReducedChsh,
            ] {
                if let Some(vals) = evaluate_identity(id, game, &base) {
                    rep.record(id, base.clone(), vals);
                }
            }
            if let Some((_, direct)) = evaluate_identity(Identity::ReducedChsh, game, &base) {
                rep.printed_chsh_checked = 1;
                if (printed_reduced_chsh(free.p4, free.p9) - direct).abs() > tol {
                    rep.printed_chsh_mismatches = 1;
                }
            }
            for &x in &xs {
                for id in [Identity::Eq25, Identity::Eq31] {
                    let inputs = with(&[x]);
                    if let Some(vals) = evaluate_identity(id, game, &inputs) {
                        rep.record(id, inputs, vals);
                    }
                }
                for &x_star in &xs {
                    for id in [
                        Identity::ConstrainedEq16First,
                        Identity::ConstrainedEq16Second,
                    ] {
                        let inputs = with(&[x_star, x]);
                        if let Some(vals) = evaluate_identity(id, game, &inputs) {
                            rep.record(id, inputs, vals);
                        }
                    }
                }
            }
            rep
        })
        .reduce(|| OracleReport::empty(tol), OracleReport::merge);

    let mut report = classical.merge(quantum);
    report.skipped_infeasible += skipped_f;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizableScan {
    pub kappa: Option<f64>,
    pub embedded_count: u64,
    pub skipped: u64,
    /// Samples with Π(0,x) - Π(x,x) > tol at some grid x.
    pub positive_count: u64,
    /// Samples where x* = 0 classifies as an ESS.
    pub ess_count: u64,
    pub max_second_difference: f64,
    /// Largest |direct - (-x²(r-s)²Ω1)| over all samples and x.
    pub max_closed_form_discrepancy: f64,
}

/// Scans embedded factorizable parameters for a positive second ESS
/// difference at x* = 0.
pub fn sweep_factorizable(game: &GameMatrix, grid: &SweepGrid) -> Result<FactorizableScan> {
    grid.validate()?;
    let xs = grid.x_grid();
    let tol = grid.tol;
    let o = omegas(game);
    let (points, skipped) = embedded_factorizable_points(game, grid);

    #[derive(Clone, Copy)]
    struct Acc {
        positive: u64,
        ess: u64,
        max_second: f64,
        max_disc: f64,
    }
    let empty = || Acc {
        positive: 0,
        ess: 0,
        max_second: f64::NEG_INFINITY,
        max_disc: 0.0,
    };

    let acc = points
        .par_iter()
        .map(|&[r, s, rp, sp]| {
            let bx = direct_factorizable_box(r, s, rp, sp);
            let mut a = empty();
            for &x in &xs {
                let direct = direct_payoff(&bx, game, 0.0, x) - direct_payoff(&bx, game, x, x);
                let closed = -x * x * (r - s) * (r - s) * o.omega1;
                a.max_second = a.max_second.max(direct);
                a.max_disc = nan_aware_max(a.max_disc, (direct - closed).abs());
            }
            if a.max_second > tol {
                a.positive = 1;
            }
            let is_ess = pure_payoffs(&bx, game)
                .and_then(|t| ess_classify(0.0, &t.symmetric_from_row(), tol))
                .map(|v| {
                    matches!(
                        v.status,
                        EssStatus::ESSByCondition1 | EssStatus::ESSByCondition2
                    )
                })
                .unwrap_or(false);
            a.ess = u64::from(is_ess);
            a
        })
        .reduce(empty, |a, b| Acc {
            positive: a.positive + b.positive,
            ess: a.ess + b.ess,
            max_second: a.max_second.max(b.max_second),
            max_disc: nan_aware_max(a.max_disc, b.max_disc),
        });

    Ok(FactorizableScan {
        kappa: o.kappa,
        embedded_count: points.len() as u64,
        skipped,
        positive_count: acc.positive,
        ess_count: acc.ess,
        max_second_difference: if points.is_empty() {
            0.0
        } else {
            acc.max_second
        },
        max_closed_form_discrepancy: acc.max_disc,
    })
}

/// One CSV row of the constrained sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p4: f64,
    pub p5: f64,
    pub p8: f64,
    pub p9: f64,
    pub feasible: bool,
    pub symmetric: bool,
    pub margin: f64,
    pub delta: Option<f64>,
    pub local_range: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedScan {
    pub kappa: Option<f64>,
    pub candidates: u64,
    pub feasible_count: u64,
    pub symmetric_count: u64,
    pub ess_count: u64,
    pub ess_without_violation_count: u64,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

impl ConstrainedScan {
    /// Writes `p4,p5,p8,p9,feasible,symmetric,margin,delta,local_range`;
    /// delta and local_range are empty for infeasible rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "p4",
                "p5",
                "p8",
                "p9",
                "feasible",
                "symmetric",
                "margin",
                "delta",
                "local_range",
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maps the constrained family over the (p4, p5, p8, p9) grid.
pub fn sweep_constrained(game: &GameMatrix, grid: &SweepGrid) -> Result<ConstrainedScan> {
    grid.validate()?;
    let kappa = omegas(game).kappa;
    let rows: Vec<(SweepRow, bool)> = constrained_points(game, grid)
        .par_iter()
        .map(|free| {
            let mut row = SweepRow {
                p4: free.p4,
                p5: free.p5,
                p8: free.p8,
                p9: free.p9,
                feasible: false,
                symmetric: false,
                margin: free.margin(),
                delta: None,
                local_range: None,
            };
            let interior = matches!(kappa, Some(k) if k > 0.0 && k < 1.0);
            let built = if interior {
                build_constrained_box(free).ok()
            } else {
                None
            };
            let Some(bx) = built else {
                return (row, false);
            };
            let chsh = chsh_report(&bx);
            row.feasible = true;
            row.symmetric = exchange_symmetry_residuals(&bx, grid.tol).symmetric;
            row.delta = Some(chsh.delta);
            row.local_range = Some(chsh.is_local_range);
            let is_ess = ess_margin(free, game).map(|r| r.is_ess()).unwrap_or(false);
            (row, is_ess)
        })
        .collect();

    let mut scan = ConstrainedScan {
        kappa,
        candidates: rows.len() as u64,
        feasible_count: 0,
        symmetric_count: 0,
        ess_count: 0,
        ess_without_violation_count: 0,
        delta_min: None,
        delta_max: None,
        rows: Vec::with_capacity(rows.len()),
    };
    for (row, is_ess) in rows {
        if row.feasible {
            scan.feasible_count += 1;
            scan.symmetric_count += u64::from(row.symmetric);
            scan.ess_count += u64::from(is_ess);
            scan.ess_without_violation_count += u64::from(is_ess && row.local_range == Some(true));
            let d = row.delta.unwrap_or(f64::NAN);
            scan.delta_min = Some(scan.delta_min.map_or(d, |m| m.min(d)));
            scan.delta_max = Some(scan.delta_max.map_or(d, |m| m.max(d)));
        }
        scan.rows.push(row);
    }
    Ok(scan)
}
