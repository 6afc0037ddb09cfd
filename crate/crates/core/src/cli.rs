//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain-level failure (invalid box, infeasible
//! construction, oracle counterexamples), 2 input or usage error.
//! Every subcommand prints one JSON document on stdout; diagnostics go to
//! stderr. Numeric keys carry the equation tag of the quantity they report.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::embedding::{
    build_constrained_box, quantum_constraint_residuals, reduced_chsh, row_identity_closed_form,
    ConstrainedFreeParams,
};
use crate::error::Error;
use crate::game_model::{classify_ordering, interior_kappa, omegas, GameMatrix, OrderingClass};
use crate::joint_box::{chsh_report, exchange_symmetry_residuals, validate_box, ProbabilityBox};
use crate::oracle::{sweep_constrained, verify_identities, ParamRange, SweepGrid};
use crate::payoff_engine::{
    ess_classify, nash_check, pure_payoffs, symmetry_residuals, StrategyProfile,
};
use crate::DEFAULT_TOL;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Why no strict PD ordering can be embedded.
pub const STRICT_PD_NOTE: &str =
    "a strict PD ordering has omega2 = a4 - a2 > 0 and omega3 = a3 - a1 > 0, \
so kappa = omega2 / (omega2 - omega3) is either negative or above 1; \
the constrained construction needs 0 < kappa < 1 and is unavailable for every strict PD game";

#[derive(Debug, Parser)]
#[command(
    name = "eprgame",
    version,
    about = "EPR-Bohm joint-probability games: boxes, embeddings, ESS and CHSH analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check normalization, no-signaling and range of a box file.
    Validate {
        #[arg(long = "box")]
        box_path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Full analysis of a game/box pair.
    Analyze {
        #[arg(long)]
        game: PathBuf,
        #[arg(long = "box")]
        box_path: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        x_star: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Build the constrained box for a game from p4, p5, p8, p9.
    Build {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        p4: f64,
        #[arg(long)]
        p5: f64,
        #[arg(long)]
        p8: f64,
        #[arg(long)]
        p9: f64,
        /// Write the box here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map the constrained family over a (p4, p5, p8, p9) grid.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// CSV destination for the per-point rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every closed form against direct payoff arithmetic.
    Oracle {
        #[command(flatten)]
        grid: GridArgs,
        /// Destination for the full report, counterexamples included.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Omegas, kappa and ordering labels of a game.
    Classify {
        #[arg(long)]
        game: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points added to the lattice.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    /// Axis override, `name=lo:hi:step` (repeatable).
    #[arg(long = "range", value_parser = parse_range)]
    pub ranges: Vec<(String, ParamRange)>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

fn parse_range(s: &str) -> Result<(String, ParamRange), String> {
    let (name, spec) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=lo:hi:step, got `{s}`"))?;
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(format!("expected lo:hi:step for `{name}`, got `{spec}`"));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((
        name.to_string(),
        ParamRange {
            lo: num(lo)?,
            hi: num(hi)?,
            step: num(step)?,
        },
    ))
}

/// What a command produced: exit code, stdout document, optional stderr line.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    pub message: Option<String>,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self {
            code: EXIT_OK,
            report,
            message: None,
        }
    }

    fn fail(code: i32, message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            code,
            report: json!({ "error": message }),
            message: Some(message),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Outcome> {
    let text = fs::read_to_string(path).map_err(|e| {
        Outcome::fail(
            EXIT_USAGE,
            format!("cannot read {what} file {}: {e}", path.display()),
        )
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Outcome::fail(
            EXIT_USAGE,
            format!("invalid {what} file {}: {e}", path.display()),
        )
    })
}

fn check_tol(tol: f64) -> Result<(), Outcome> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Outcome::fail(
            EXIT_USAGE,
            format!("--tol must be positive, got {tol}"),
        ))
    }
}

fn validation_json(bx: &ProbabilityBox, tol: f64) -> Value {
    let r = validate_box(bx, tol);
    json!({
        "valid": r.valid,
        "tol": r.tol,
        "max_residual": r.max_residual,
        "eq20_normalization_residuals": r.normalization_residuals,
        "eq20_no_signaling_residuals": r.no_signaling_residuals,
        "range_violations": r.range_violations,
    })
}

fn ordering_json(game: &GameMatrix) -> Value {
    let o = omegas(game);
    let c: OrderingClass = classify_ordering(game);
    let mut v = json!({
        "a": game.entries(),
        "eq17_omega1": o.omega1,
        "eq17_omega2": o.omega2,
        "eq17_omega3": o.omega3,
        "eq19_kappa": o.kappa,
        "is_strict_pd": c.is_strict_pd,
        "satisfies_generalized_pd_inequality": c.satisfies_generalized_pd_inequality,
        "kappa_in_unit_interval": c.kappa_in_unit_interval,
        "label": c.label,
    });
    if c.is_strict_pd {
        v["note"] = json!(STRICT_PD_NOTE);
    }
    v
}

pub fn cmd_validate(box_path: &Path, tol: f64) -> Outcome {
    let run = || -> Result<Outcome, Outcome> {
        check_tol(tol)?;
        let bx: ProbabilityBox = read_json(box_path, "box")?;
        let report = validation_json(&bx, tol);
        let valid = report["valid"] == json!(true);
        Ok(Outcome {
            code: if valid { EXIT_OK } else { EXIT_DOMAIN },
            message: (!valid).then(|| "box is not a valid no-signaling box".to_string()),
            report,
        })
    };
    run().unwrap_or_else(|o| o)
}

pub fn cmd_classify(game_path: &Path) -> Outcome {
    match read_json::<GameMatrix>(game_path, "game") {
        Ok(game) => Outcome::ok(ordering_json(&game)),
        Err(o) => o,
    }
}

/// Analysis of an already-parsed pair; `cmd_analyze` adds the file handling.
pub fn analyze(game: &GameMatrix, bx: &ProbabilityBox, x_star: f64, tol: f64) -> Outcome {
    let validation = validation_json(bx, tol);
    let mut report = json!({
        "game": ordering_json(game),
        "validation": validation,
    });
    if validation["valid"] != json!(true) {
        return Outcome {
            code: EXIT_DOMAIN,
            report,
            message: Some("box is not a valid no-signaling box".into()),
        };
    }
    if !(0.0..=1.0).contains(&x_star) {
        return Outcome::fail(EXIT_USAGE, format!("--x-star = {x_star} outside [0, 1]"));
    }

    let table = pure_payoffs(bx, game).expect("box validated above");
    let sym = symmetry_residuals(&table, tol);
    let exchange = exchange_symmetry_residuals(bx, tol);
    let chsh = chsh_report(bx);
    let profile = StrategyProfile::new(x_star, x_star).expect("x_star checked");
    let nash = nash_check(&profile, &table, tol);
    let p = |i| bx.p(i);

    report["payoffs"] = json!({
        "eq8_row": table.row,
        "eq8_column": table.column,
    });
    report["symmetry"] = json!({
        "eq12_residuals": sym.residuals,
        "symmetric_game": sym.symmetric,
        "exchange_residuals": exchange.residuals,
        "exchange_symmetric": exchange.symmetric,
    });
    report["nash"] = json!({
        "x_star": x_star,
        "eq11_row_gap": nash.row_gap,
        "eq11_column_gap": nash.column_gap,
        "is_nash": nash.is_nash,
    });
    report["eq30_row_identity"] = json!(table.row.sp_s - table.row.ss);
    report["eq30_closed_form"] = json!(row_identity_closed_form(bx, game));
    report["eq31_margin"] = json!(p(8) + p(9) - p(4) - p(5));
    report["eq31_coefficient"] = json!((p(8) + p(9) - p(4) - p(5)) * omegas(game).omega1);
    report["chsh"] = json!({
        "eq32_delta": chsh.delta,
        "variants": chsh.variant_deltas,
        "local_range": chsh.is_local_range,
        "within_cirelson": chsh.within_cirelson,
    });
    if let Ok(c) = quantum_constraint_residuals(bx, game) {
        report["constraints"] = json!({
            "eq19_kappa": c.kappa,
            "eq26_first": c.eq26_first,
            "eq26_second": c.eq26_second,
            "eq27_s_prime": c.s_prime,
            "eq28_difference_rule": c.difference_rule,
            "eq29_p15": c.eq29_p15,
            "eq29_p14": c.eq29_p14,
            "max_abs": c.max_abs,
        });
    }
    if exchange.symmetric {
        match ess_classify(x_star, &table, tol) {
            Ok(v) => {
                report["ess"] = json!({
                    "x_star": v.x_star,
                    "is_symmetric_nash": v.is_symmetric_nash,
                    "eq16_delta1": v.delta1,
                    "eq16_delta2": v.delta2,
                    "eq16_first_condition_slope": v.first_condition_slope,
                    "eq16_second_condition_margin": v.margin,
                    "status": v.status,
                });
            }
            Err(e) => report["ess_error"] = json!(e.to_string()),
        }
    }
    Outcome::ok(report)
}

pub fn cmd_analyze(game_path: &Path, box_path: &Path, x_star: f64, tol: f64) -> Outcome {
    let run = || -> Result<Outcome, Outcome> {
        check_tol(tol)?;
        let game: GameMatrix = read_json(game_path, "game")?;
        let bx: ProbabilityBox = read_json(box_path, "box")?;
        Ok(analyze(&game, &bx, x_star, tol))
    };
    run().unwrap_or_else(|o| o)
}

/// Builds the constrained box. On success the report holds the box under
/// `"p"` together with its margin and CHSH value.
pub fn build(game: &GameMatrix, p4: f64, p5: f64, p8: f64, p9: f64) -> Outcome {
    let kappa = match interior_kappa(game) {
        Ok(k) => k,
        Err(Error::KappaOutOfRange(k)) => {
            return Outcome::fail(EXIT_USAGE, format!("kappa = {k} outside (0,1)"))
        }
        Err(e) => return Outcome::fail(EXIT_USAGE, e.to_string()),
    };
    let free = match ConstrainedFreeParams::new(p4, p5, p8, p9, kappa) {
        Ok(f) => f,
        Err(e) => return Outcome::fail(EXIT_USAGE, e.to_string()),
    };
    match build_constrained_box(&free) {
        Ok(bx) => {
            let chsh = reduced_chsh(&free).expect("feasible box");
            Outcome::ok(json!({
                "p": bx.as_array(),
                "eq19_kappa": kappa,
                "eq31_margin": free.margin(),
                "eq31_coefficient": free.margin() * omegas(game).omega1,
                "eq32_delta": chsh.delta,
            }))
        }
        Err(Error::Infeasible { violations }) => Outcome {
            code: EXIT_DOMAIN,
            message: Some(format!("infeasible: {}", violations.join(", "))),
            report: json!({ "feasible": false, "violations": violations }),
        },
        Err(e) => Outcome::fail(EXIT_DOMAIN, e.to_string()),
    }
}

/// With `out`, writes `{"p": [...]}` there and prints the summary;
/// without, prints the box file itself.
pub fn cmd_build(game_path: &Path, free: [f64; 4], out: Option<&Path>) -> Outcome {
    let game: GameMatrix = match read_json(game_path, "game") {
        Ok(g) => g,
        Err(o) => return o,
    };
    let mut outcome = build(&game, free[0], free[1], free[2], free[3]);
    if outcome.code != EXIT_OK {
        return outcome;
    }
    let box_doc = json!({ "p": outcome.report["p"].clone() });
    match out {
        Some(path) => {
            let text = serde_json::to_string_pretty(&box_doc).expect("serializable");
            if let Err(e) = fs::write(path, text + "\n") {
                return Outcome::fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display()));
            }
            outcome.report["box_path"] = json!(path.display().to_string());
        }
        None => outcome.report = box_doc,
    }
    outcome
}

fn grid_from(args: &GridArgs) -> Result<(GameMatrix, SweepGrid), Outcome> {
    check_tol(args.tol)?;
    let game: GameMatrix = read_json(&args.game, "game")?;
    let mut grid = SweepGrid::new(args.step, args.seed, args.samples);
    grid.tol = args.tol;
    for (name, range) in &args.ranges {
        grid.ranges.insert(name.clone(), *range);
    }
    grid.validate()
        .map_err(|e| Outcome::fail(EXIT_USAGE, e.to_string()))?;
    Ok((game, grid))
}

pub fn cmd_sweep(args: &GridArgs, out: Option<&Path>) -> Outcome {
    let run = || -> Result<Outcome, Outcome> {
        let (game, grid) = grid_from(args)?;
        let scan = sweep_constrained(&game, &grid)
            .map_err(|e| Outcome::fail(EXIT_USAGE, e.to_string()))?;
        if let Some(path) = out {
            let file = fs::File::create(path).map_err(|e| {
                Outcome::fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display()))
            })?;
            scan.write_csv(file).map_err(|e| {
                Outcome::fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display()))
            })?;
        }
        let mut report = json!({
            "grid": grid,
            "eq19_kappa": scan.kappa,
            "candidates": scan.candidates,
            "feasible_count": scan.feasible_count,
            "symmetric_count": scan.symmetric_count,
            "eq31_ess_count": scan.ess_count,
            "eq32_ess_without_violation_count": scan.ess_without_violation_count,
            "eq32_delta_min": scan.delta_min,
            "eq32_delta_max": scan.delta_max,
        });
        if classify_ordering(&game).is_strict_pd {
            report["note"] = json!(STRICT_PD_NOTE);
        }
        Ok(Outcome::ok(report))
    };
    run().unwrap_or_else(|o| o)
}

pub fn cmd_oracle(args: &GridArgs, out: Option<&Path>) -> Outcome {
    let run = || -> Result<Outcome, Outcome> {
        let (game, grid) = grid_from(args)?;
        let report = verify_identities(&game, &grid)
            .map_err(|e| Outcome::fail(EXIT_USAGE, e.to_string()))?;
        if let Some(path) = out {
            let text = serde_json::to_string_pretty(&report).expect("serializable");
            fs::write(path, text + "\n").map_err(|e| {
                Outcome::fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display()))
            })?;
        }
        let summary = json!({
            "grid": grid,
            "checks_run": report.checks_run,
            "factorizable_samples": report.factorizable_samples,
            "constrained_samples": report.constrained_samples,
            "skipped_infeasible": report.skipped_infeasible,
            "identities": report.identities,
            "eq33_printed_mismatches": report.printed_chsh_mismatches,
            "eq33_printed_checked": report.printed_chsh_checked,
            "counterexample_count": report.counterexample_count,
        });
        let clean = report.all_within_tolerance();
        Ok(Outcome {
            code: if clean { EXIT_OK } else { EXIT_DOMAIN },
            message: (!clean).then(|| {
                format!(
                    "{} closed-form checks exceeded tolerance",
                    report.counterexample_count
                )
            }),
            report: summary,
        })
    };
    run().unwrap_or_else(|o| o)
}

pub fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { box_path, tol } => cmd_validate(box_path, *tol),
        Command::Analyze {
            game,
            box_path,
            x_star,
            tol,
        } => cmd_analyze(game, box_path, *x_star, *tol),
        Command::Build {
            game,
            p4,
            p5,
            p8,
            p9,
            out,
        } => cmd_build(game, [*p4, *p5, *p8, *p9], out.as_deref()),
        Command::Sweep { grid, out } => cmd_sweep(grid, out.as_deref()),
        Command::Oracle { grid, out } => cmd_oracle(grid, out.as_deref()),
        Command::Classify { game } => cmd_classify(game),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let outcome = dispatch(&cli);
    let text = serde_json::to_string_pretty(&outcome.report).expect("serializable");
    let _ = writeln!(stdout, "{text}");
    if let Some(m) = &outcome.message {
        let _ = writeln!(stderr, "error: {m}");
    }
    outcome.code
}
