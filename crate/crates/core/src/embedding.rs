//! Embedding the classical game in the box framework and its quantum
//! extension.
//!
//! Classically the defection strategy x* = 0 stays a symmetric NE when the
//! factorization parameters satisfy `s' = κ` and `r - s = r' - s'`, with
//! `κ = Ω2/Ω1`. Translated to box entries these become
//! `p5 + p7 = κ` and `p5 + p12 = p8 + p9`; keeping the NE for a
//! non-factorizable box adds `p5 + p8 + p14 + p15 = 1` and
//! `p1 + p12 = p4 + p9`. Together they fix
//!
//! ```text
//! p1  = p4 + p5 - p8      p12 = p8 + p9 - p5
//! p14 = 1 - κ - p8        p15 = κ - p5
//! ```
//!
//! leaving p4, p5, p8, p9 free. The remaining eight entries follow from
//! [`complete_from_independent`].

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_probability, Error, Result};
use crate::game_model::{omegas, GameMatrix};
use crate::joint_box::{
    chsh_report, complete_from_independent, exchange_symmetry_residuals, FactorizableParams,
    IndependentOctet, ProbabilityBox,
};
use crate::payoff_engine::{ess_classify, pure_payoffs, EssDeltas, EssStatus};
use crate::DEFAULT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstraints {
    /// Required value of s' (and of p5 + p15 in the quantum game).
    pub kappa: f64,
    /// s' = κ is a probability.
    pub feasible: bool,
}

impl EmbeddingConstraints {
    /// Largest violation of `s' = κ` and `r - s = r' - s'`.
    pub fn residual(&self, params: &FactorizableParams) -> f64 {
        let s_prime = (params.s_prime - self.kappa).abs();
        let difference = ((params.r - params.s) - (params.r_prime - params.s_prime)).abs();
        s_prime.max(difference)
    }
}

pub fn classical_embedding(game: &GameMatrix) -> Result<EmbeddingConstraints> {
    let kappa = omegas(game).kappa.ok_or(Error::UndefinedKappa)?;
    Ok(EmbeddingConstraints {
        kappa,
        feasible: (0.0..=1.0).contains(&kappa),
    })
}

/// Picks `s' = κ`, `s = r - (r' - κ)`; fails when any parameter leaves [0, 1].
pub fn sample_classical_params(
    constraints: &EmbeddingConstraints,
    r: f64,
    r_prime: f64,
) -> Result<FactorizableParams> {
    let kappa = constraints.kappa;
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::KappaOutOfRange(kappa));
    }
    check_finite("r", r)?;
    check_finite("r_prime", r_prime)?;
    let s = r - (r_prime - kappa);

    let violations: Vec<String> = [("r", r), ("s", s), ("r_prime", r_prime)]
        .into_iter()
        .filter(|(_, v)| *v < -DEFAULT_TOL || *v > 1.0 + DEFAULT_TOL)
        .map(|(name, v)| format!("{name} = {} out of range", display_value(v)))
        .collect();
    if !violations.is_empty() {
        return Err(Error::Infeasible { violations });
    }
    FactorizableParams::new(
        r.clamp(0.0, 1.0),
        s.clamp(0.0, 1.0),
        r_prime.clamp(0.0, 1.0),
        kappa,
    )
}

/// Δ1 = (r-s)(r'-s')Ω1 and Δ2 = (r-s)(s'Ω1 - Ω2) for a factorizable box.
pub fn classical_deltas(params: &FactorizableParams, game: &GameMatrix) -> EssDeltas {
    let o = omegas(game);
    let d = params.r - params.s;
    EssDeltas {
        delta1: d * (params.r_prime - params.s_prime) * o.omega1,
        delta2: d * (params.s_prime * o.omega1 - o.omega2),
    }
}

/// `(Π(0,0) - Π(x,0), Π(0,x) - Π(x,x))` for embedded parameters, i.e.
/// `(0, -x²(r-s)²Ω1)`.
pub fn classical_ess_difference(
    params: &FactorizableParams,
    game: &GameMatrix,
    x: f64,
) -> Result<(f64, f64)> {
    check_probability("x", x)?;
    let constraints = classical_embedding(game)?;
    let residual = constraints.residual(params);
    if residual > DEFAULT_TOL {
        return Err(Error::ConstraintViolation { residual });
    }
    let d = params.r - params.s;
    Ok((0.0, -x * x * d * d * omegas(game).omega1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumConstraintResiduals {
    pub kappa: f64,
    /// p1+p5+p8+p12+p14+p15 - (1+p4+p9)
    pub eq26_first: f64,
    /// p4+p5+p8+p9+p14+p15 - (1+p1+p12)
    pub eq26_second: f64,
    /// p5+p7 - κ
    pub s_prime: f64,
    /// p5+p12 - (p8+p9)
    pub difference_rule: f64,
    /// p5+p15 - κ
    pub eq29_p15: f64,
    /// p8+p14 - (1-κ)
    pub eq29_p14: f64,
    pub max_abs: f64,
}

pub fn quantum_constraint_residuals(
    bx: &ProbabilityBox,
    game: &GameMatrix,
) -> Result<QuantumConstraintResiduals> {
    let kappa = omegas(game).kappa.ok_or(Error::UndefinedKappa)?;
    let p = |i| bx.p(i);
    let eq26_first = p(1) + p(5) + p(8) + p(12) + p(14) + p(15) - (1.0 + p(4) + p(9));
    let eq26_second = p(4) + p(5) + p(8) + p(9) + p(14) + p(15) - (1.0 + p(1) + p(12));
    let s_prime = p(5) + p(7) - kappa;
    let difference_rule = p(5) + p(12) - (p(8) + p(9));
    let eq29_p15 = p(5) + p(15) - kappa;
    let eq29_p14 = p(8) + p(14) - (1.0 - kappa);
    let max_abs = [
        eq26_first,
        eq26_second,
        s_prime,
        difference_rule,
        eq29_p15,
        eq29_p14,
    ]
    .iter()
    .map(|r| r.abs())
    .fold(0.0, f64::max);
    Ok(QuantumConstraintResiduals {
        kappa,
        eq26_first,
        eq26_second,
        s_prime,
        difference_rule,
        eq29_p15,
        eq29_p14,
        max_abs,
    })
}

/// The four probabilities left free by the quantum constraints, plus κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedFreeParams {
    pub p4: f64,
    pub p5: f64,
    pub p8: f64,
    pub p9: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedProbabilities {
    pub p1: f64,
    pub p12: f64,
    pub p14: f64,
    pub p15: f64,
}

impl ConstrainedFreeParams {
    pub fn new(p4: f64, p5: f64, p8: f64, p9: f64, kappa: f64) -> Result<Self> {
        Ok(Self {
            p4: check_probability("p4", p4)?,
            p5: check_probability("p5", p5)?,
            p8: check_probability("p8", p8)?,
            p9: check_probability("p9", p9)?,
            kappa: check_finite("kappa", kappa)?,
        })
    }

    pub fn derived(&self) -> DerivedProbabilities {
        DerivedProbabilities {
            p1: self.p4 + self.p5 - self.p8,
            p12: self.p8 + self.p9 - self.p5,
            p14: 1.0 - self.kappa - self.p8,
            p15: self.kappa - self.p5,
        }
    }

    /// p8 + p9 - p4 - p5
    pub fn margin(&self) -> f64 {
        self.p8 + self.p9 - self.p4 - self.p5
    }

    pub fn octet(&self) -> IndependentOctet {
        let d = self.derived();
        IndependentOctet {
            p1: d.p1,
            p4: self.p4,
            p5: self.p5,
            p8: self.p8,
            p9: self.p9,
            p12: d.p12,
            p14: d.p14,
            p15: d.p15,
        }
    }
}

/// Formats a probability for diagnostics, dropping float noise past 12 digits.
pub(crate) fn display_value(v: f64) -> String {
    let rounded = (v * 1e12).round() / 1e12;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

pub fn build_constrained_box(free: &ConstrainedFreeParams) -> Result<ProbabilityBox> {
    if !(0.0..=1.0).contains(&free.kappa) {
        return Err(Error::KappaOutOfRange(free.kappa));
    }
    let bx = complete_from_independent(&free.octet());
    let violations: Vec<String> = (1..=16)
        .filter(|&i| bx.p(i) < -DEFAULT_TOL || bx.p(i) > 1.0 + DEFAULT_TOL)
        .map(|i| format!("p{i} = {} out of range", display_value(bx.p(i))))
        .collect();
    if violations.is_empty() {
        Ok(bx)
    } else {
        Err(Error::Infeasible { violations })
    }
}

/// Δ of the completed constrained box after substituting the derived
/// entries: `4(p4 + p9) - 2`.
pub fn derived_reduced_chsh(p4: f64, p9: f64) -> f64 {
    4.0 * (p4 + p9) - 2.0
}

/// The reduced CHSH expression as it appears in print, `2(2p4 + p9 - 1)`.
/// It disagrees with direct substitution whenever p9 != 0 and is kept only
/// to report that discrepancy.
pub fn printed_reduced_chsh(p4: f64, p9: f64) -> f64 {
    2.0 * (2.0 * p4 + p9 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedChsh {
    /// `2(p1+p4+p5+p8+p9+p12+p14+p15-2)` on the completed box.
    pub delta: f64,
    pub derived: f64,
    pub printed: f64,
    pub derived_matches: bool,
    pub printed_matches: bool,
}

pub fn reduced_chsh(free: &ConstrainedFreeParams) -> Result<ReducedChsh> {
    let bx = build_constrained_box(free)?;
    let delta = chsh_report(&bx).delta;
    let derived = derived_reduced_chsh(free.p4, free.p9);
    let printed = printed_reduced_chsh(free.p4, free.p9);
    Ok(ReducedChsh {
        delta,
        derived,
        printed,
        derived_matches: (derived - delta).abs() <= DEFAULT_TOL,
        printed_matches: (printed - delta).abs() <= DEFAULT_TOL,
    })
}

/// Π(S',S) - Π(S,S) rewritten as Ω3(p1 - p9) + Ω2(p12 - p4); holds for any
/// box satisfying the quantum constraints.
pub fn row_identity_closed_form(bx: &ProbabilityBox, game: &GameMatrix) -> f64 {
    let o = omegas(game);
    o.omega3 * (bx.p(1) - bx.p(9)) + o.omega2 * (bx.p(12) - bx.p(4))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumEssReport {
    /// p8 + p9 - p4 - p5
    pub margin: f64,
    /// margin · Ω1, the x² coefficient of Π(0,x) - Π(x,x)
    pub coefficient: f64,
    /// Π(S',S') - Π(S,S') vanishes for the row player
    pub ne_preserved: bool,
    /// Π(S',S) - Π(S,S) computed directly from the box
    pub row_identity: f64,
    pub delta_reduced: f64,
    pub violates_chsh: bool,
    pub exchange_symmetric: bool,
    /// κ of the free parameters equals Ω2/Ω1 of the game
    pub kappa_matches_game: bool,
    /// Only issued for exchange-symmetric boxes.
    pub ess_status: Option<EssStatus>,
}

impl QuantumEssReport {
    /// Defection is an ESS of the symmetric quantum game.
    pub fn is_ess(&self) -> bool {
        matches!(
            self.ess_status,
            Some(EssStatus::ESSByCondition1 | EssStatus::ESSByCondition2)
        )
    }
}

pub fn ess_margin(free: &ConstrainedFreeParams, game: &GameMatrix) -> Result<QuantumEssReport> {
    let bx = build_constrained_box(free)?;
    let table = pure_payoffs(&bx, game)?;
    let o = omegas(game);
    let margin = free.margin();
    let chsh = chsh_report(&bx);
    let exchange_symmetric = exchange_symmetry_residuals(&bx, DEFAULT_TOL).symmetric;
    let ess_status = if exchange_symmetric {
        Some(ess_classify(0.0, &table, DEFAULT_TOL)?.status)
    } else {
        None
    };
    Ok(QuantumEssReport {
        margin,
        coefficient: margin * o.omega1,
        ne_preserved: (table.row.sp_sp - table.row.s_sp).abs() <= DEFAULT_TOL,
        row_identity: table.row.sp_s - table.row.ss,
        delta_reduced: derived_reduced_chsh(free.p4, free.p9),
        violates_chsh: !chsh.is_local_range,
        exchange_symmetric,
        kappa_matches_game: matches!(o.kappa, Some(k) if (k - free.kappa).abs() <= DEFAULT_TOL),
        ess_status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_box::{box_from_factorizable, validate_box};
    use crate::payoff_engine::{nash_check, StrategyProfile};
    use proptest::prelude::*;

    fn game_g() -> GameMatrix {
        GameMatrix::new(5.0, 1.0, 2.0, 3.0).unwrap()
    }

    fn free(p4: f64, p5: f64, p8: f64, p9: f64) -> ConstrainedFreeParams {
        ConstrainedFreeParams::new(p4, p5, p8, p9, 0.4).unwrap()
    }

    const BOX_A: [f64; 16] = [
        0.0, 0.4, 0.4, 0.2, 0.1, 0.3, 0.3, 0.3, 0.1, 0.3, 0.3, 0.3, 0.1, 0.3, 0.3, 0.3,
    ];
    const BOX_B: [f64; 16] = [
        0.0, 0.5, 0.4, 0.1, 0.1, 0.4, 0.3, 0.2, 0.3, 0.2, 0.1, 0.4, 0.1, 0.4, 0.3, 0.2,
    ];

    fn assert_entries(bx: &ProbabilityBox, expected: &[f64; 16]) {
        for i in 1..=16 {
            assert!((bx.p(i) - expected[i - 1]).abs() < 1e-12, "p{i}");
        }
    }

    #[test]
    fn classical_embedding_examples() {
        let e = classical_embedding(&game_g()).unwrap();
        assert!((e.kappa - 0.4).abs() < 1e-15 && e.feasible);
        let e = classical_embedding(&GameMatrix::new(4.0, 0.0, 5.0, 2.0).unwrap()).unwrap();
        assert_eq!(e.kappa, 2.0);
        assert!(!e.feasible);
        let e = classical_embedding(&GameMatrix::new(3.0, 0.0, 5.0, 1.0).unwrap()).unwrap();
        assert_eq!(e.kappa, -1.0);
        assert!(!e.feasible);
        assert_eq!(
            classical_embedding(&GameMatrix::new(2.0, 1.0, 2.0, 1.0).unwrap()),
            Err(Error::UndefinedKappa)
        );
    }

    #[test]
    fn sample_params_examples() {
        let c = classical_embedding(&game_g()).unwrap();
        let p = sample_classical_params(&c, 0.7, 0.6).unwrap();
        for (x, y) in [(p.r, 0.7), (p.s, 0.5), (p.r_prime, 0.6), (p.s_prime, 0.4)] {
            assert!((x - y).abs() < 1e-12);
        }
        match sample_classical_params(&c, 0.1, 0.9) {
            Err(Error::Infeasible { violations }) => {
                assert_eq!(violations, vec!["s = -0.4 out of range".to_string()])
            }
            other => panic!("{other:?}"),
        }
        let p = sample_classical_params(&c, 0.4, 0.4).unwrap();
        assert!((p.r - p.s).abs() < 1e-15);
        assert!((p.s - 0.4).abs() < 1e-12);

        let bad = EmbeddingConstraints {
            kappa: 2.0,
            feasible: false,
        };
        assert_eq!(
            sample_classical_params(&bad, 0.5, 0.5),
            Err(Error::KappaOutOfRange(2.0))
        );
    }

    #[test]
    fn classical_difference_examples() {
        let params = FactorizableParams::new(0.7, 0.5, 0.6, 0.4).unwrap();
        let (first, second) = classical_ess_difference(&params, &game_g(), 1.0).unwrap();
        assert_eq!(first, 0.0);
        assert!((second + 0.2).abs() < 1e-12);

        let flat = FactorizableParams::new(0.4, 0.4, 0.4, 0.4).unwrap();
        assert_eq!(
            classical_ess_difference(&flat, &game_g(), 1.0).unwrap(),
            (0.0, 0.0)
        );

        let (_, second) = classical_ess_difference(&params, &game_g(), 0.5).unwrap();
        assert!((second + 0.05).abs() < 1e-12);
    }

    #[test]
    fn classical_difference_rejects_unembedded_params() {
        let params = FactorizableParams::new(0.7, 0.5, 0.6, 0.5).unwrap();
        assert!(matches!(
            classical_ess_difference(&params, &game_g(), 1.0),
            Err(Error::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn classical_deltas_match_table() {
        let params = FactorizableParams::new(0.7, 0.5, 0.6, 0.4).unwrap();
        let d = classical_deltas(&params, &game_g());
        assert!((d.delta1 - 0.2).abs() < 1e-12 && d.delta2.abs() < 1e-12);
    }

    #[test]
    fn constraint_residual_examples() {
        let r =
            quantum_constraint_residuals(&ProbabilityBox::new(BOX_A).unwrap(), &game_g()).unwrap();
        assert!(r.max_abs < 1e-12, "{r:?}");
        let r =
            quantum_constraint_residuals(&ProbabilityBox::new(BOX_B).unwrap(), &game_g()).unwrap();
        assert!(r.max_abs < 1e-12, "{r:?}");
        let r = quantum_constraint_residuals(&ProbabilityBox::uniform(), &game_g()).unwrap();
        assert!((r.eq29_p15 - 0.1).abs() < 1e-12);
        assert!(r.eq26_first.abs() < 1e-12 && r.eq26_second.abs() < 1e-12);
    }

    #[test]
    fn build_examples() {
        let a = build_constrained_box(&free(0.2, 0.1, 0.3, 0.1)).unwrap();
        assert_entries(&a, &BOX_A);
        let d = free(0.2, 0.1, 0.3, 0.1).derived();
        for (x, y) in [(d.p1, 0.0), (d.p12, 0.3), (d.p14, 0.3), (d.p15, 0.3)] {
            assert!((x - y).abs() < 1e-12);
        }
        let b = build_constrained_box(&free(0.1, 0.1, 0.2, 0.3)).unwrap();
        assert_entries(&b, &BOX_B);

        match build_constrained_box(&free(0.0, 0.5, 0.0, 0.0)) {
            Err(Error::Infeasible { violations }) => {
                assert!(
                    violations.contains(&"p15 = -0.1 out of range".to_string()),
                    "{violations:?}"
                )
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn build_rejects_kappa_outside_unit_interval() {
        let f = ConstrainedFreeParams::new(0.2, 0.1, 0.3, 0.1, -1.0).unwrap();
        assert_eq!(build_constrained_box(&f), Err(Error::KappaOutOfRange(-1.0)));
    }

    #[test]
    fn ess_margin_examples() {
        let r = ess_margin(&free(0.2, 0.1, 0.3, 0.1), &game_g()).unwrap();
        assert!((r.margin - 0.1).abs() < 1e-12);
        assert!((r.coefficient - 0.5).abs() < 1e-12);
        assert!(r.ne_preserved && r.exchange_symmetric && r.kappa_matches_game);
        assert_eq!(r.ess_status, Some(EssStatus::ESSByCondition2));
        assert!(r.is_ess());
        assert!(!r.violates_chsh);

        let r = ess_margin(&free(0.1, 0.1, 0.2, 0.3), &game_g()).unwrap();
        assert!((r.margin - 0.3).abs() < 1e-12);
        assert!((r.coefficient - 1.5).abs() < 1e-12);
        assert!((r.row_identity - 1.5).abs() < 1e-12);
        assert!(r.ne_preserved);
        assert!(!r.exchange_symmetric);
        assert_eq!(r.ess_status, None);
        assert!(!r.is_ess());

        let f = free(0.2, 0.2, 0.2, 0.2);
        let d = f.derived();
        for (x, y) in [(d.p15, 0.2), (d.p14, 0.4), (d.p1, 0.2), (d.p12, 0.2)] {
            assert!((x - y).abs() < 1e-12);
        }
        let r = ess_margin(&f, &game_g()).unwrap();
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.coefficient, 0.0);
        // p14 != p15, so the box is not exchange symmetric and gets no verdict
        assert!(!r.exchange_symmetric);
        assert_eq!(r.ess_status, None);
    }

    #[test]
    fn reduced_chsh_examples() {
        let r = reduced_chsh(&free(0.2, 0.1, 0.3, 0.1)).unwrap();
        assert!((r.delta + 0.8).abs() < 1e-12);
        assert!((r.printed + 1.0).abs() < 1e-12);
        assert!(r.derived_matches && !r.printed_matches);

        let r = reduced_chsh(&free(0.1, 0.1, 0.2, 0.3)).unwrap();
        assert!((r.delta + 0.4).abs() < 1e-12);
        assert!((r.printed + 1.0).abs() < 1e-12);
        assert!(r.derived_matches && !r.printed_matches);

        // p4 = p9 = 1/4, p5 = 0.1, p8 = 0.2 is feasible for κ = 0.4
        let r = reduced_chsh(&free(0.25, 0.1, 0.2, 0.25)).unwrap();
        assert!(r.delta.abs() < 1e-12 && r.derived.abs() < 1e-12);
    }

    fn brute_force_delta(bx: &ProbabilityBox) -> f64 {
        let s: f64 = [1, 4, 5, 8, 9, 12, 14, 15].iter().map(|&i| bx.p(i)).sum();
        2.0 * (s - 2.0)
    }

    proptest! {
        #[test]
        fn constrained_family_invariants(
            p4 in 0.0f64..=1.0, p5 in 0.0f64..=0.4, p8 in 0.0f64..=0.6, p9 in 0.0f64..=1.0
        ) {
            let f = free(p4, p5, p8, p9);
            let Ok(bx) = build_constrained_box(&f) else { return Ok(()); };
            prop_assert!(validate_box(&bx, DEFAULT_TOL).valid);
            let res = quantum_constraint_residuals(&bx, &game_g()).unwrap();
            prop_assert!(res.max_abs <= 1e-12, "{:?}", res);

            let table = pure_payoffs(&bx, &game_g()).unwrap();
            prop_assert!((table.row.s_sp - table.row.sp_sp).abs() <= 1e-12);
            prop_assert!(nash_check(&StrategyProfile::new(0.0, 0.0).unwrap(), &table, DEFAULT_TOL).row_gap >= -1e-12);

            // Π(0,x) - Π(x,x) straight from the bilinear form
            for k in 1..=10 {
                let x = k as f64 / 10.0;
                let direct = table.row.mixed(0.0, x) - table.row.mixed(x, x);
                prop_assert!((direct - x * x * 5.0 * f.margin()).abs() <= 1e-9);
            }
            let direct = table.row.sp_s - table.row.ss;
            prop_assert!((direct - row_identity_closed_form(&bx, &game_g())).abs() <= 1e-9);
            prop_assert!((brute_force_delta(&bx) - derived_reduced_chsh(p4, p9)).abs() <= 1e-12);
        }

        #[test]
        fn classical_second_difference_never_positive(r in 0.0f64..=1.0, rp in 0.0f64..=1.0, x in 0.0f64..=1.0) {
            let c = classical_embedding(&game_g()).unwrap();
            let Ok(params) = sample_classical_params(&c, r, rp) else { return Ok(()); };
            let table = pure_payoffs(&box_from_factorizable(&params).unwrap(), &game_g()).unwrap();
            let direct = table.row.mixed(0.0, x) - table.row.mixed(x, x);
            let (_, closed) = classical_ess_difference(&params, &game_g(), x).unwrap();
            prop_assert!((direct - closed).abs() <= 1e-9);
            prop_assert!(direct <= 1e-12);
        }
    }
}
