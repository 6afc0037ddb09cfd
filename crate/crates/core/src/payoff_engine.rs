//! Payoffs of a game played through a box, Nash checks, fitness and ESS.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::game_model::GameMatrix;
use crate::joint_box::{validate_box, ProbabilityBox};
use crate::DEFAULT_TOL;

/// Payoffs of one player for the four pure setting pairs, first strategy
/// always player 1's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffCells {
    pub ss: f64,
    pub s_sp: f64,
    pub sp_s: f64,
    pub sp_sp: f64,
}

impl PayoffCells {
    /// Bilinear form `(x, 1-x) · cells · (y, 1-y)ᵀ`.
    pub fn mixed(&self, x: f64, y: f64) -> f64 {
        x * y * self.ss
            + x * (1.0 - y) * self.s_sp
            + (1.0 - x) * y * self.sp_s
            + (1.0 - x) * (1.0 - y) * self.sp_sp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurePayoffTable {
    pub row: PayoffCells,
    pub column: PayoffCells,
}

impl PurePayoffTable {
    /// The symmetric game whose payoff is the row player's: the column
    /// player gets `Π(y, x)`. This is how the classical factorizable regime
    /// is read, where the symmetric-game conditions reduce to `A = Bᵀ` even
    /// when the two players' marginals differ.
    pub fn symmetric_from_row(&self) -> Self {
        let row = self.row;
        Self {
            row,
            column: PayoffCells {
                ss: row.ss,
                s_sp: row.sp_s,
                sp_s: row.s_sp,
                sp_sp: row.sp_sp,
            },
        }
    }
}

fn dot(weights: [f64; 4], probs: [f64; 4]) -> f64 {
    weights.iter().zip(probs.iter()).map(|(w, p)| w * p).sum()
}

/// Weighs each setting group of the box by the players' payoff entries.
/// Outcome pairs (+,+), (+,-), (-,+), (-,-) map to matrix cells 1..4; the
/// column player uses the transposed matrix.
pub fn pure_payoffs(bx: &ProbabilityBox, game: &GameMatrix) -> Result<PurePayoffTable> {
    let report = validate_box(bx, DEFAULT_TOL);
    if !report.valid {
        return Err(Error::InvalidBox {
            max_residual: report.max_residual,
        });
    }
    Ok(pure_payoffs_unchecked(bx, game))
}

/// Same weighted sums without validating the box first.
pub fn pure_payoffs_unchecked(bx: &ProbabilityBox, game: &GameMatrix) -> PurePayoffTable {
    let cells = |w: [f64; 4]| PayoffCells {
        ss: dot(w, bx.group(1, 1)),
        s_sp: dot(w, bx.group(1, 2)),
        sp_s: dot(w, bx.group(2, 1)),
        sp_sp: dot(w, bx.group(2, 2)),
    };
    PurePayoffTable {
        row: cells(game.entries()),
        column: cells(game.column_entries()),
    }
}

/// Probabilities with which player 1 (`x`) and player 2 (`y`) choose S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub x: f64,
    pub y: f64,
}

impl StrategyProfile {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        Ok(Self {
            x: check_probability("x", x)?,
            y: check_probability("y", y)?,
        })
    }
}

pub fn mixed_payoffs(profile: &StrategyProfile, table: &PurePayoffTable) -> (f64, f64) {
    (
        table.row.mixed(profile.x, profile.y),
        table.column.mixed(profile.x, profile.y),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResiduals {
    /// |Π_A(S,S)-Π_B(S,S)|, |Π_A(S,S')-Π_B(S',S)|, |Π_A(S',S)-Π_B(S,S')|,
    /// |Π_A(S',S')-Π_B(S',S')|
    pub residuals: [f64; 4],
    pub symmetric: bool,
}

pub fn symmetry_residuals(table: &PurePayoffTable, tol: f64) -> SymmetryResiduals {
    let PurePayoffTable { row, column } = table;
    let residuals = [
        (row.ss - column.ss).abs(),
        (row.s_sp - column.sp_s).abs(),
        (row.sp_s - column.s_sp).abs(),
        (row.sp_sp - column.sp_sp).abs(),
    ];
    SymmetryResiduals {
        residuals,
        symmetric: residuals.iter().all(|r| *r <= tol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashVerdict {
    /// min over pure deviations x of Π_A(x*,y*) - Π_A(x,y*)
    pub row_gap: f64,
    /// min over pure deviations y of Π_B(x*,y*) - Π_B(x*,y)
    pub column_gap: f64,
    pub is_nash: bool,
}

fn pure_deviations(star: f64) -> impl Iterator<Item = f64> {
    [0.0, 1.0].into_iter().filter(move |d| *d != star)
}

/// Payoffs are bilinear, so checking the pure deviations covers every mixed
/// deviation as well.
pub fn nash_check(profile: &StrategyProfile, table: &PurePayoffTable, tol: f64) -> NashVerdict {
    let StrategyProfile { x, y } = *profile;
    let here_row = table.row.mixed(x, y);
    let here_col = table.column.mixed(x, y);
    let row_gap = pure_deviations(x)
        .map(|dx| here_row - table.row.mixed(dx, y))
        .fold(f64::INFINITY, f64::min);
    let column_gap = pure_deviations(y)
        .map(|dy| here_col - table.column.mixed(x, dy))
        .fold(f64::INFINITY, f64::min);
    NashVerdict {
        row_gap,
        column_gap,
        is_nash: row_gap >= -tol && column_gap >= -tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssDeltas {
    /// Π(S,S) - Π(S',S) - Π(S,S') + Π(S',S')
    pub delta1: f64,
    /// Π(S,S') - Π(S',S')
    pub delta2: f64,
}

impl EssDeltas {
    /// Closed form of Π(x*,x*) - Π(x,x*).
    pub fn first_condition(&self, x_star: f64, x: f64) -> f64 {
        (x_star - x) * (x_star * self.delta1 + self.delta2)
    }

    /// Closed form of Π(x*,x) - Π(x,x).
    pub fn second_condition(&self, x_star: f64, x: f64) -> f64 {
        (x_star - x) * (x * self.delta1 + self.delta2)
    }
}

fn require_symmetric(table: &PurePayoffTable) -> Result<()> {
    let sym = symmetry_residuals(table, DEFAULT_TOL);
    if sym.symmetric {
        Ok(())
    } else {
        Err(Error::AsymmetricTable {
            max_residual: sym.residuals.iter().copied().fold(0.0, f64::max),
        })
    }
}

/// Row-player deltas without the symmetry check. Only meaningful as an
/// identity on asymmetric tables; ESS reasoning should go through
/// [`ess_deltas`].
pub fn row_deltas(table: &PurePayoffTable) -> EssDeltas {
    let c = &table.row;
    EssDeltas {
        delta1: c.ss - c.sp_s - c.s_sp + c.sp_sp,
        delta2: c.s_sp - c.sp_sp,
    }
}

pub fn ess_deltas(table: &PurePayoffTable) -> Result<EssDeltas> {
    require_symmetric(table)?;
    Ok(row_deltas(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EssStatus {
    NotNE,
    NEOnly,
    ESSByCondition1,
    ESSByCondition2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssVerdict {
    pub x_star: f64,
    pub is_symmetric_nash: bool,
    pub delta1: f64,
    pub delta2: f64,
    /// `x*·Δ1 + Δ2`; the first condition is `(x*-x)` times this.
    pub first_condition_slope: f64,
    /// `-Δ1`; once the first condition binds, the second reads
    /// `Π(x*,x) - Π(x,x) = margin·(x-x*)²`.
    pub margin: f64,
    pub status: EssStatus,
}

/// Classifies `x_star` against the two-part ESS definition.
///
/// Π(x*,x*) - Π(x,x*) is linear in x and vanishes at x*, so it is
/// non-negative on [0,1] iff it is at both pure endpoints, and strictly
/// positive away from x* only when x* is pure and the far endpoint is
/// positive. When it vanishes identically the second condition reduces to
/// -(x-x*)²Δ1, positive for all x != x* iff Δ1 < 0.
pub fn ess_classify(x_star: f64, table: &PurePayoffTable, tol: f64) -> Result<EssVerdict> {
    check_probability("x_star", x_star)?;
    let deltas = ess_deltas(table)?;
    let slope = x_star * deltas.delta1 + deltas.delta2;

    let is_symmetric_nash =
        pure_deviations(x_star).all(|x| deltas.first_condition(x_star, x) >= -tol);
    let strict_first =
        (x_star == 0.0 || x_star == 1.0) && deltas.first_condition(x_star, 1.0 - x_star) > tol;
    let margin = -deltas.delta1;

    let status = if !is_symmetric_nash {
        EssStatus::NotNE
    } else if strict_first {
        EssStatus::ESSByCondition1
    } else if margin > tol {
        EssStatus::ESSByCondition2
    } else {
        EssStatus::NEOnly
    };

    Ok(EssVerdict {
        x_star,
        is_symmetric_nash,
        delta1: deltas.delta1,
        delta2: deltas.delta2,
        first_condition_slope: slope,
        margin,
        status,
    })
}

/// Mutant share `epsilon` playing `x` in a population otherwise playing `x_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessInputs {
    pub epsilon: f64,
    pub x: f64,
    pub x_star: f64,
}

/// Returns `(F(x), F(x*))` with
/// `F(x) = εΠ(x,x) + (1-ε)Π(x,x*)` and `F(x*) = εΠ(x*,x) + (1-ε)Π(x*,x*)`.
pub fn fitness(inputs: &FitnessInputs, table: &PurePayoffTable) -> Result<(f64, f64)> {
    let FitnessInputs { epsilon, x, x_star } = *inputs;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    check_probability("x", x)?;
    check_probability("x_star", x_star)?;
    require_symmetric(table)?;
    let pay = |u: f64, v: f64| table.row.mixed(u, v);
    let mutant = epsilon * pay(x, x) + (1.0 - epsilon) * pay(x, x_star);
    let incumbent = epsilon * pay(x_star, x) + (1.0 - epsilon) * pay(x_star, x_star);
    Ok((mutant, incumbent))
}
