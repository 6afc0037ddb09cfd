//! Symmetric 2x2 games.
//!
//! The row player's matrix is read row-major: `a1 = Π(S,S)`, `a2 = Π(S,S')`,
//! `a3 = Π(S',S)`, `a4 = Π(S',S')`. The column player's matrix is always the
//! transpose, so only the four row entries are stored.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::DEFAULT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameFile", into = "GameFile")]
pub struct GameMatrix {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

/// On-disk form: `{"a": [a1, a2, a3, a4]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GameFile {
    a: Vec<f64>,
}

impl TryFrom<GameFile> for GameMatrix {
    type Error = String;

    fn try_from(file: GameFile) -> std::result::Result<Self, String> {
        let [a1, a2, a3, a4] = <[f64; 4]>::try_from(file.a.as_slice())
            .map_err(|_| format!("field `a`: expected 4 entries, found {}", file.a.len()))?;
        GameMatrix::new(a1, a2, a3, a4).map_err(|e| format!("field `a`: {e}"))
    }
}

impl From<GameMatrix> for GameFile {
    fn from(g: GameMatrix) -> Self {
        GameFile {
            a: g.entries().to_vec(),
        }
    }
}

impl GameMatrix {
    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64) -> Result<Self> {
        Ok(Self {
            a1: check_finite("a1", a1)?,
            a2: check_finite("a2", a2)?,
            a3: check_finite("a3", a3)?,
            a4: check_finite("a4", a4)?,
        })
    }

    pub fn from_entries(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Row player's entries in cell order (S,S), (S,S'), (S',S), (S',S').
    pub fn entries(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a4]
    }

    /// Column player's entries in the same cell order, i.e. the transpose.
    pub fn column_entries(&self) -> [f64; 4] {
        [self.a1, self.a3, self.a2, self.a4]
    }

    pub fn omegas(&self) -> OmegaTriple {
        omegas(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaTriple {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    /// `omega2 / omega1`, absent when `omega1` is zero.
    pub kappa: Option<f64>,
}

pub fn omegas(game: &GameMatrix) -> OmegaTriple {
    let omega1 = game.a1 - game.a2 - game.a3 + game.a4;
    let omega2 = game.a4 - game.a2;
    let omega3 = game.a3 - game.a1;
    let kappa = if omega1.abs() <= DEFAULT_TOL {
        None
    } else {
        Some(omega2 / omega1)
    };
    OmegaTriple {
        omega1,
        omega2,
        omega3,
        kappa,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderingLabel {
    StrictPD,
    GeneralizedPDInequality,
    EmbeddingFeasible,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingClass {
    /// a3 > a1 > a4 > a2
    pub is_strict_pd: bool,
    /// a4 - a2 > a3 - a1
    pub satisfies_generalized_pd_inequality: bool,
    /// 0 < kappa < 1
    pub kappa_in_unit_interval: bool,
    pub label: OrderingLabel,
}

/// Flags every ordering condition independently and picks the most specific
/// label. A strict PD ordering has omega3 > 0, which forces kappa > 1 whenever
/// omega1 > 0, so `EmbeddingFeasible` never co-occurs with the PD labels.
pub fn classify_ordering(game: &GameMatrix) -> OrderingClass {
    let GameMatrix { a1, a2, a3, a4 } = *game;
    let is_strict_pd = a3 > a1 && a1 > a4 && a4 > a2;
    let satisfies_generalized_pd_inequality = a4 - a2 > a3 - a1;
    let kappa_in_unit_interval = matches!(omegas(game).kappa, Some(k) if k > 0.0 && k < 1.0);

    let label = if kappa_in_unit_interval {
        OrderingLabel::EmbeddingFeasible
    } else if is_strict_pd && satisfies_generalized_pd_inequality {
        OrderingLabel::GeneralizedPDInequality
    } else if is_strict_pd {
        OrderingLabel::StrictPD
    } else {
        OrderingLabel::Other
    };

    OrderingClass {
        is_strict_pd,
        satisfies_generalized_pd_inequality,
        kappa_in_unit_interval,
        label,
    }
}

/// Returns kappa if it lies strictly inside (0, 1), otherwise the reason it
/// does not.
pub fn interior_kappa(game: &GameMatrix) -> Result<f64> {
    match omegas(game).kappa {
        None => Err(Error::UndefinedKappa),
        Some(k) if k > 0.0 && k < 1.0 => Ok(k),
        Some(k) => Err(Error::KappaOutOfRange(k)),
    }
}
