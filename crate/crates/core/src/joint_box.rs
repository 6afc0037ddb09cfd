//! The sixteen-probability joint box `p_i = Pr(π1, π2; a, b)`.
//!
//! Entries are numbered 1..=16. Setting pairs occupy consecutive groups of
//! four: (a,b) = (1,1) -> 1..=4, (1,2) -> 5..=8, (2,1) -> 9..=12,
//! (2,2) -> 13..=16. Inside a group the outcome pairs (π1, π2) run
//! (+1,+1), (+1,-1), (-1,+1), (-1,-1).

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_probability, Error, Result};
use crate::DEFAULT_TOL;

/// Cirel'son's bound on the CHSH combination for quantum boxes.
pub const CIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Bound on the CHSH combination for local boxes.
pub const LOCAL_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxFile", into = "BoxFile")]
pub struct ProbabilityBox {
    p: [f64; 16],
}

/// On-disk form: `{"p": [p1, ..., p16]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoxFile {
    p: Vec<f64>,
}

impl TryFrom<BoxFile> for ProbabilityBox {
    type Error = String;

    fn try_from(file: BoxFile) -> std::result::Result<Self, String> {
        let p = <[f64; 16]>::try_from(file.p.as_slice())
            .map_err(|_| format!("field `p`: expected 16 entries, found {}", file.p.len()))?;
        ProbabilityBox::new(p).map_err(|e| format!("field `p`: {e}"))
    }
}

impl From<ProbabilityBox> for BoxFile {
    fn from(b: ProbabilityBox) -> Self {
        BoxFile { p: b.p.to_vec() }
    }
}

impl ProbabilityBox {
    /// Accepts any finite entries; range, normalization and no-signaling are
    /// checked by [`validate_box`].
    pub fn new(p: [f64; 16]) -> Result<Self> {
        for (i, &v) in p.iter().enumerate() {
            check_finite(&format!("p{}", i + 1), v)?;
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: [0.25; 16] }
    }

    /// Entry `p_i` for `i` in 1..=16.
    ///
    /// Panics if `i` is outside 1..=16.
    pub fn p(&self, i: usize) -> f64 {
        assert!((1..=16).contains(&i), "box index {i} outside 1..=16");
        self.p[i - 1]
    }

    pub fn as_array(&self) -> &[f64; 16] {
        &self.p
    }

    /// The four outcome probabilities for setting pair (a, b), a and b in {1, 2}.
    pub fn group(&self, a: u8, b: u8) -> [f64; 4] {
        let start = 4 * (b as usize - 1) + 8 * (a as usize - 1);
        [
            self.p[start],
            self.p[start + 1],
            self.p[start + 2],
            self.p[start + 3],
        ]
    }

    pub fn independent_octet(&self) -> IndependentOctet {
        IndependentOctet {
            p1: self.p(1),
            p4: self.p(4),
            p5: self.p(5),
            p8: self.p(8),
            p9: self.p(9),
            p12: self.p(12),
            p14: self.p(14),
            p15: self.p(15),
        }
    }
}

/// Index of `Pr(π1, π2; a, b)` in 1..=16.
pub fn outcome_index(pi1: i8, pi2: i8, a: u8, b: u8) -> Result<usize> {
    let flip = |pi: i8| match pi {
        1 => Ok(0usize),
        -1 => Ok(1usize),
        other => Err(Error::InvalidOutcome(other)),
    };
    let setting = |s: u8| match s {
        1 | 2 => Ok(s as usize - 1),
        other => Err(Error::InvalidSetting(other)),
    };
    Ok(1 + flip(pi2)? + 2 * flip(pi1)? + 4 * setting(b)? + 8 * setting(a)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeViolation {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub range_violations: Vec<RangeViolation>,
    /// Group sum minus one, groups in index order.
    pub normalization_residuals: [f64; 4],
    /// Left minus right side of the eight no-signaling equalities.
    pub no_signaling_residuals: [f64; 8],
    pub max_residual: f64,
    pub tol: f64,
    pub valid: bool,
}

/// Pairs of index sets whose sums must agree for a no-signaling box.
const NO_SIGNALING: [([usize; 2], [usize; 2]); 8] = [
    ([1, 2], [5, 6]),
    ([1, 3], [9, 11]),
    ([9, 10], [13, 14]),
    ([5, 7], [13, 15]),
    ([3, 4], [7, 8]),
    ([11, 12], [15, 16]),
    ([2, 4], [10, 12]),
    ([6, 8], [14, 16]),
];

pub fn validate_box(bx: &ProbabilityBox, tol: f64) -> ValidationReport {
    let range_violations: Vec<RangeViolation> = (1..=16)
        .filter_map(|i| {
            let v = bx.p(i);
            (v < -tol || v > 1.0 + tol).then_some(RangeViolation { index: i, value: v })
        })
        .collect();

    let mut normalization_residuals = [0.0; 4];
    for (g, r) in normalization_residuals.iter_mut().enumerate() {
        *r = bx.p[4 * g..4 * g + 4].iter().sum::<f64>() - 1.0;
    }

    let mut no_signaling_residuals = [0.0; 8];
    for (r, (lhs, rhs)) in no_signaling_residuals.iter_mut().zip(NO_SIGNALING.iter()) {
        *r = bx.p(lhs[0]) + bx.p(lhs[1]) - bx.p(rhs[0]) - bx.p(rhs[1]);
    }

    let range_excess = range_violations
        .iter()
        .map(|v| {
            if v.value < 0.0 {
                -v.value
            } else {
                v.value - 1.0
            }
        })
        .fold(0.0, f64::max);
    let max_residual = normalization_residuals
        .iter()
        .chain(no_signaling_residuals.iter())
        .map(|r| r.abs())
        .fold(range_excess, f64::max);

    ValidationReport {
        valid: range_violations.is_empty() && max_residual <= tol,
        range_violations,
        normalization_residuals,
        no_signaling_residuals,
        max_residual,
        tol,
    }
}

/// Single-party probabilities of outcome +1: `r`/`s` for player 1 under
/// setting S/S', `r_prime`/`s_prime` for player 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizableParams {
    pub r: f64,
    pub s: f64,
    pub r_prime: f64,
    pub s_prime: f64,
}

impl FactorizableParams {
    pub fn new(r: f64, s: f64, r_prime: f64, s_prime: f64) -> Result<Self> {
        Ok(Self {
            r: check_probability("r", r)?,
            s: check_probability("s", s)?,
            r_prime: check_probability("r_prime", r_prime)?,
            s_prime: check_probability("s_prime", s_prime)?,
        })
    }
}

fn outer(q: f64, q_prime: f64) -> [f64; 4] {
    [
        q * q_prime,
        q * (1.0 - q_prime),
        (1.0 - q) * q_prime,
        (1.0 - q) * (1.0 - q_prime),
    ]
}

pub fn box_from_factorizable(params: &FactorizableParams) -> Result<ProbabilityBox> {
    let FactorizableParams {
        r,
        s,
        r_prime,
        s_prime,
    } = FactorizableParams::new(params.r, params.s, params.r_prime, params.s_prime)?;
    let mut p = [0.0; 16];
    for (g, (q, qp)) in [(r, r_prime), (r, s_prime), (s, r_prime), (s, s_prime)]
        .into_iter()
        .enumerate()
    {
        p[4 * g..4 * g + 4].copy_from_slice(&outer(q, qp));
    }
    Ok(ProbabilityBox { p })
}

/// Recovers `(r, s, r', s')` when the box is a product of single-party
/// marginals within `tol`, otherwise `None`.
///
/// Marginals come from `r = p1+p2, s = p9+p10, r' = p1+p3, s' = p5+p7`. If that
/// candidate does not reproduce the box, the equivalent no-signaling forms
/// `p5+p6, p13+p14, p9+p11, p13+p15` are tried before giving up.
pub fn product_form_test(bx: &ProbabilityBox, tol: f64) -> Option<FactorizableParams> {
    let candidates = [
        [
            bx.p(1) + bx.p(2),
            bx.p(9) + bx.p(10),
            bx.p(1) + bx.p(3),
            bx.p(5) + bx.p(7),
        ],
        [
            bx.p(5) + bx.p(6),
            bx.p(13) + bx.p(14),
            bx.p(9) + bx.p(11),
            bx.p(13) + bx.p(15),
        ],
    ];
    candidates.into_iter().find_map(|[r, s, rp, sp]| {
        if [r, s, rp, sp].iter().any(|v| *v < -tol || *v > 1.0 + tol) {
            return None;
        }
        let params = FactorizableParams {
            r: r.clamp(0.0, 1.0),
            s: s.clamp(0.0, 1.0),
            r_prime: rp.clamp(0.0, 1.0),
            s_prime: sp.clamp(0.0, 1.0),
        };
        let rebuilt = box_from_factorizable(&params).ok()?;
        bx.p.iter()
            .zip(rebuilt.p.iter())
            .all(|(a, b)| (a - b).abs() <= tol)
            .then_some(params)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependentOctet {
    pub p1: f64,
    pub p4: f64,
    pub p5: f64,
    pub p8: f64,
    pub p9: f64,
    pub p12: f64,
    pub p14: f64,
    pub p15: f64,
}

/// Fills the eight dependent probabilities from the independent ones.
/// Normalization and no-signaling hold identically for any input; range
/// validity is left to [`validate_box`].
pub fn complete_from_independent(o: &IndependentOctet) -> ProbabilityBox {
    let IndependentOctet {
        p1,
        p4,
        p5,
        p8,
        p9,
        p12,
        p14,
        p15,
    } = *o;
    let p2 = (1.0 - p1 - p4 + p5 - p8 - p9 + p12 + p14 - p15) / 2.0;
    let p3 = (1.0 - p1 - p4 - p5 + p8 + p9 - p12 - p14 + p15) / 2.0;
    let p6 = (1.0 + p1 - p4 - p5 - p8 - p9 + p12 + p14 - p15) / 2.0;
    let p7 = (1.0 - p1 + p4 - p5 - p8 + p9 - p12 - p14 + p15) / 2.0;
    let p10 = (1.0 - p1 + p4 + p5 - p8 - p9 - p12 + p14 - p15) / 2.0;
    let p11 = (1.0 + p1 - p4 - p5 + p8 - p9 - p12 - p14 + p15) / 2.0;
    let p13 = (1.0 - p1 + p4 + p5 - p8 + p9 - p12 - p14 - p15) / 2.0;
    let p16 = (1.0 + p1 - p4 - p5 + p8 - p9 + p12 - p14 - p15) / 2.0;
    ProbabilityBox {
        p: [
            p1, p2, p3, p4, p5, p6, p7, p8, p9, p10, p11, p12, p13, p14, p15, p16,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeSymmetryReport {
    /// |p5-p9|, |p6-p11|, |p7-p10|, |p8-p12|, |p2-p3|, |p14-p15|
    pub residuals: [f64; 6],
    pub symmetric: bool,
}

/// Invariance under swapping the players: `Pr(π1,π2;a,b) = Pr(π2,π1;b,a)`.
pub fn exchange_symmetry_residuals(bx: &ProbabilityBox, tol: f64) -> ExchangeSymmetryReport {
    let pairs = [(5, 9), (6, 11), (7, 10), (8, 12), (2, 3), (14, 15)];
    let mut residuals = [0.0; 6];
    for (r, (i, j)) in residuals.iter_mut().zip(pairs) {
        *r = (bx.p(i) - bx.p(j)).abs();
    }
    ExchangeSymmetryReport {
        residuals,
        symmetric: residuals.iter().all(|r| *r <= tol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    /// `2(p1+p4+p5+p8+p9+p12+p14+p15-2)`
    pub delta: f64,
    /// All sign-symmetrized CHSH combinations. Index 2k carries the
    /// anticorrelation on setting pair (2,2), (2,1), (1,2), (1,1) for
    /// k = 0..4; index 2k+1 is its negation. `variant_deltas[0] == delta`.
    pub variant_deltas: [f64; 8],
    pub is_local_range: bool,
    pub within_cirelson: bool,
}

pub fn chsh_report(bx: &ProbabilityBox) -> ChshReport {
    let same = |a: u8, b: u8| {
        let g = bx.group(a, b);
        g[0] + g[3]
    };
    let diff = |a: u8, b: u8| {
        let g = bx.group(a, b);
        g[1] + g[2]
    };
    let pairs = [(1u8, 1u8), (1, 2), (2, 1), (2, 2)];
    let mut variant_deltas = [0.0; 8];
    for (k, anti) in [(2u8, 2u8), (2, 1), (1, 2), (1, 1)].into_iter().enumerate() {
        let agree: f64 = pairs
            .iter()
            .map(|&(a, b)| {
                if (a, b) == anti {
                    diff(a, b)
                } else {
                    same(a, b)
                }
            })
            .sum();
        let value = 2.0 * (agree - 2.0);
        variant_deltas[2 * k] = value;
        variant_deltas[2 * k + 1] = -value;
    }
    let max_abs = variant_deltas.iter().map(|d| d.abs()).fold(0.0, f64::max);
    ChshReport {
        delta: variant_deltas[0],
        variant_deltas,
        is_local_range: max_abs <= LOCAL_BOUND + DEFAULT_TOL,
        within_cirelson: max_abs <= CIRELSON_BOUND + DEFAULT_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn box_a() -> ProbabilityBox {
        ProbabilityBox::new([
            0.0, 0.4, 0.4, 0.2, 0.1, 0.3, 0.3, 0.3, 0.1, 0.3, 0.3, 0.3, 0.1, 0.3, 0.3, 0.3,
        ])
        .unwrap()
    }

    fn box_b() -> ProbabilityBox {
        ProbabilityBox::new([
            0.0, 0.5, 0.4, 0.1, 0.1, 0.4, 0.3, 0.2, 0.3, 0.2, 0.1, 0.4, 0.1, 0.4, 0.3, 0.2,
        ])
        .unwrap()
    }

    fn assert_box_close(a: &ProbabilityBox, b: &ProbabilityBox, tol: f64) {
        for i in 1..=16 {
            assert!(
                (a.p(i) - b.p(i)).abs() <= tol,
                "p{i}: {} vs {}",
                a.p(i),
                b.p(i)
            );
        }
    }

    #[test]
    fn outcome_index_examples() {
        assert_eq!(outcome_index(1, -1, 2, 1).unwrap(), 10);
        assert_eq!(outcome_index(1, 1, 1, 1).unwrap(), 1);
        assert_eq!(outcome_index(-1, -1, 2, 2).unwrap(), 16);
    }

    #[test]
    fn outcome_index_is_a_bijection() {
        let mut seen = [false; 16];
        for pi1 in [1, -1] {
            for pi2 in [1, -1] {
                for a in [1, 2] {
                    for b in [1, 2] {
                        let i = outcome_index(pi1, pi2, a, b).unwrap();
                        assert!(!seen[i - 1], "index {i} hit twice");
                        seen[i - 1] = true;
                    }
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn outcome_index_rejects_bad_arguments() {
        assert_eq!(outcome_index(0, 1, 1, 1), Err(Error::InvalidOutcome(0)));
        assert_eq!(outcome_index(1, 2, 1, 1), Err(Error::InvalidOutcome(2)));
        assert_eq!(outcome_index(1, 1, 3, 1), Err(Error::InvalidSetting(3)));
        assert_eq!(outcome_index(1, 1, 1, 0), Err(Error::InvalidSetting(0)));
    }

    #[test]
    fn validate_examples() {
        let r = validate_box(&ProbabilityBox::uniform(), DEFAULT_TOL);
        assert!(r.valid);
        assert_eq!(r.max_residual, 0.0);

        assert!(validate_box(&box_a(), DEFAULT_TOL).valid);
        assert!(validate_box(&box_b(), DEFAULT_TOL).valid);

        let mut p = [0.25; 16];
        p[0] = 0.5;
        p[1] = 0.2;
        p[2] = 0.2;
        p[3] = 0.2;
        let r = validate_box(&ProbabilityBox::new(p).unwrap(), DEFAULT_TOL);
        assert!(!r.valid);
        assert!((r.normalization_residuals[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn validate_reports_range_violations() {
        let mut p = [0.25; 16];
        p[0] = -0.1;
        p[1] = 0.6;
        let r = validate_box(&ProbabilityBox::new(p).unwrap(), DEFAULT_TOL);
        assert!(!r.valid);
        assert_eq!(
            r.range_violations,
            vec![RangeViolation {
                index: 1,
                value: -0.1
            }]
        );
    }

    #[test]
    fn factorizable_examples() {
        let b =
            box_from_factorizable(&FactorizableParams::new(1.0, 0.0, 1.0, 0.0).unwrap()).unwrap();
        for i in 1..=16 {
            let expected = if [1, 6, 11, 16].contains(&i) {
                1.0
            } else {
                0.0
            };
            assert_eq!(b.p(i), expected, "p{i}");
        }

        let b =
            box_from_factorizable(&FactorizableParams::new(0.5, 0.5, 0.5, 0.5).unwrap()).unwrap();
        assert_eq!(b, ProbabilityBox::uniform());

        let b =
            box_from_factorizable(&FactorizableParams::new(0.7, 0.5, 0.6, 0.4).unwrap()).unwrap();
        for (i, v) in [(1, 0.42), (5, 0.28), (9, 0.30), (13, 0.20)] {
            assert!((b.p(i) - v).abs() < 1e-12, "p{i}");
        }
    }

    #[test]
    fn factorizable_rejects_out_of_range() {
        let bad = FactorizableParams {
            r: 1.2,
            s: 0.0,
            r_prime: 0.0,
            s_prime: 0.0,
        };
        assert!(matches!(
            box_from_factorizable(&bad),
            Err(Error::OutOfRange { .. })
        ));
        assert!(FactorizableParams::new(0.0, -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn product_form_examples() {
        let params = FactorizableParams::new(0.7, 0.5, 0.6, 0.4).unwrap();
        let got = product_form_test(&box_from_factorizable(&params).unwrap(), DEFAULT_TOL).unwrap();
        for (x, y) in [
            (got.r, 0.7),
            (got.s, 0.5),
            (got.r_prime, 0.6),
            (got.s_prime, 0.4),
        ] {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(product_form_test(&box_a(), DEFAULT_TOL), None);
        assert_eq!(
            product_form_test(&ProbabilityBox::uniform(), DEFAULT_TOL),
            Some(FactorizableParams::new(0.5, 0.5, 0.5, 0.5).unwrap())
        );
    }

    #[test]
    fn product_form_handles_degenerate_marginals() {
        let params = FactorizableParams::new(0.0, 1.0, 0.3, 0.0).unwrap();
        let got = product_form_test(&box_from_factorizable(&params).unwrap(), DEFAULT_TOL).unwrap();
        assert!((got.r_prime - 0.3).abs() < 1e-12);
        assert_eq!((got.r, got.s, got.s_prime), (0.0, 1.0, 0.0));
    }

    #[test]
    fn completion_examples() {
        let a = complete_from_independent(&IndependentOctet {
            p1: 0.0,
            p4: 0.2,
            p5: 0.1,
            p8: 0.3,
            p9: 0.1,
            p12: 0.3,
            p14: 0.3,
            p15: 0.3,
        });
        assert_box_close(&a, &box_a(), 1e-12);

        let b = complete_from_independent(&IndependentOctet {
            p1: 0.0,
            p4: 0.1,
            p5: 0.1,
            p8: 0.2,
            p9: 0.3,
            p12: 0.4,
            p14: 0.4,
            p15: 0.3,
        });
        assert_box_close(&b, &box_b(), 1e-12);

        let u = complete_from_independent(&ProbabilityBox::uniform().independent_octet());
        assert_box_close(&u, &ProbabilityBox::uniform(), 0.0);
    }

    #[test]
    fn exchange_symmetry_examples() {
        let r = exchange_symmetry_residuals(&box_a(), DEFAULT_TOL);
        assert!(r.symmetric);
        assert!(r.residuals.iter().all(|x| *x < 1e-12));

        let r = exchange_symmetry_residuals(&box_b(), DEFAULT_TOL);
        assert!(!r.symmetric);
        assert!((r.residuals[3] - 0.2).abs() < 1e-12);

        assert!(exchange_symmetry_residuals(&ProbabilityBox::uniform(), DEFAULT_TOL).symmetric);
    }

    #[test]
    fn chsh_examples() {
        let mut p = [0.0; 16];
        for i in [1, 4, 5, 8, 9, 12, 14, 15] {
            p[i - 1] = 0.5;
        }
        let pr = chsh_report(&ProbabilityBox::new(p).unwrap());
        assert!((pr.delta - 4.0).abs() < 1e-12);
        assert!(!pr.is_local_range);
        assert!(!pr.within_cirelson);

        let a = chsh_report(&box_a());
        assert!((a.delta + 0.8).abs() < 1e-12);
        assert!(a.is_local_range);

        let det =
            box_from_factorizable(&FactorizableParams::new(1.0, 0.0, 1.0, 0.0).unwrap()).unwrap();
        let d = chsh_report(&det);
        assert!((d.delta + 2.0).abs() < 1e-12);
        assert!(d.is_local_range);
    }

    #[test]
    fn chsh_delta_is_first_variant_and_matches_correlators() {
        let r = chsh_report(&box_b());
        assert_eq!(r.delta, r.variant_deltas[0]);
        // E(a,b) = P(same) - P(diff); delta = E11 + E12 + E21 - E22
        let e = |a, b| {
            let g = box_b().group(a, b);
            g[0] + g[3] - g[1] - g[2]
        };
        let s = e(1, 1) + e(1, 2) + e(2, 1) - e(2, 2);
        assert!((r.delta - s).abs() < 1e-12);
        let s11 = -e(1, 1) + e(1, 2) + e(2, 1) + e(2, 2);
        assert!((r.variant_deltas[6] - s11).abs() < 1e-12);
    }

    #[test]
    fn box_json_wire_format() {
        let text = serde_json::to_string(&box_a()).unwrap();
        let back: ProbabilityBox = serde_json::from_str(&text).unwrap();
        assert_eq!(back, box_a());
        let err =
            serde_json::from_str::<ProbabilityBox>(r#"{"p": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]}"#)
                .unwrap_err();
        assert!(
            err.to_string()
                .contains("field `p`: expected 16 entries, found 15"),
            "{err}"
        );
    }

    fn octet_strategy() -> impl Strategy<Value = IndependentOctet> {
        prop::array::uniform8(-2.0f64..2.0).prop_map(|v| IndependentOctet {
            p1: v[0],
            p4: v[1],
            p5: v[2],
            p8: v[3],
            p9: v[4],
            p12: v[5],
            p14: v[6],
            p15: v[7],
        })
    }

    proptest! {
        #[test]
        fn factorizable_boxes_are_valid_product_and_local(
            q in prop::array::uniform4(0.0f64..=1.0)
        ) {
            let params = FactorizableParams::new(q[0], q[1], q[2], q[3]).unwrap();
            let b = box_from_factorizable(&params).unwrap();
            let report = validate_box(&b, 1e-12);
            prop_assert!(report.valid, "{:?}", report);
            prop_assert!(product_form_test(&b, DEFAULT_TOL).is_some());
            let chsh = chsh_report(&b);
            prop_assert!(chsh.variant_deltas.iter().all(|d| d.abs() <= 2.0 + 1e-12));
        }

        #[test]
        fn completion_satisfies_identities(o in octet_strategy()) {
            let r = validate_box(&complete_from_independent(&o), 1e-12);
            prop_assert!(r.normalization_residuals.iter().all(|x| x.abs() <= 1e-12));
            prop_assert!(r.no_signaling_residuals.iter().all(|x| x.abs() <= 1e-12));
        }

        #[test]
        fn octet_round_trip(q in prop::array::uniform4(0.0f64..=1.0)) {
            let b = box_from_factorizable(&FactorizableParams::new(q[0], q[1], q[2], q[3]).unwrap()).unwrap();
            let rebuilt = complete_from_independent(&b.independent_octet());
            for i in 1..=16 {
                prop_assert!((rebuilt.p(i) - b.p(i)).abs() <= 1e-12);
            }
        }
    }
}
