//! Built-in model gallery: the worked examples with their known
//! verdicts, runnable as a pass/fail table.

use serde::Serialize;

use crate::continuous::criteria::{criteria_halfline, criteria_wholeline, ContinuousOptions, HarmonicFn};
use crate::continuous::picard::{picard_solve, PicardOptions};
use crate::continuous::{ContinuousError, DiffusionModel, Domain};
use crate::criteria::{classify, CriteriaError, FitOptions, Mode, Verdict};
use crate::expr::Expr;
use crate::model::{DiscreteModel, Rate};

#[derive(Debug, thiserror::Error)]
pub enum GalleryError {
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Continuous(#[from] ContinuousError),
}

pub enum GalleryH {
    One,
    Expr(Expr),
    Picard {
        gamma: (f64, f64),
        interval: (f64, f64),
        opts: PicardOptions,
    },
}

pub enum GalleryCase {
    Discrete {
        model: DiscreteModel,
        mode: Mode,
        n_max: usize,
    },
    Diffusion {
        model: DiffusionModel,
        h: GalleryH,
        mode: Mode,
        x_max: f64,
    },
}

pub struct GalleryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub case: GalleryCase,
    /// expected verdict; more than one entry for documented boundary cases
    pub expected: Vec<Verdict>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GalleryOutcome {
    pub name: &'static str,
    pub description: &'static str,
    pub expected: Vec<Verdict>,
    pub got: Verdict,
    pub pass: bool,
    pub detail: String,
}

fn expr_rate(field: &'static str, src: &str) -> Rate {
    Rate::from_expr_str(field, src).expect("gallery rate parses")
}

/// b_n = n^4, mu_n = n^-2: both forms discrete.
pub fn quartic_b_model() -> DiscreteModel {
    DiscreteModel::new(
        expr_rate("a", "(n-1)^2 * n^2").with_override(1, 1.0),
        expr_rate("b", "n^4").with_override(0, 1.0),
        Rate::constant(0.0),
    )
}

/// b_n = a_{n+1} = n^gamma: minimal form discrete iff gamma > 2.
pub fn power_ratio_min(gamma: f64) -> DiscreteModel {
    DiscreteModel::new(
        expr_rate("a", &format!("(n-1)^{gamma}")).with_override(1, 1.0),
        expr_rate("b", &format!("n^{gamma}")).with_override(0, 1.0),
        Rate::constant(0.0),
    )
}

/// a_n = b_n = n^gamma: maximal form discrete iff gamma > 2.
pub fn power_ratio_max(gamma: f64) -> DiscreteModel {
    DiscreteModel::new(
        expr_rate("a", &format!("n^{gamma}")),
        expr_rate("b", &format!("n^{gamma}")).with_override(0, 1.0),
        Rate::constant(0.0),
    )
}

/// a = b = 1, c_n = 1/(n+1) down to 0: not discrete.
pub fn vanishing_killing_model() -> DiscreteModel {
    DiscreteModel::new(
        Rate::constant(1.0),
        Rate::constant(1.0),
        expr_rate("c", "1/(n+1)"),
    )
}

/// a_n = b_n = (n+1)/4, c_n = 9(n+1)/16: minimal form discrete.
pub fn linear_killing_model() -> DiscreteModel {
    DiscreteModel::new(
        expr_rate("a", "(n+1)/4"),
        expr_rate("b", "(n+1)/4"),
        expr_rate("c", "9*(n+1)/16"),
    )
}

/// a_n = b_n = (n+1)^2, c_n = 5 + 10/(5n-12): not discrete.
pub fn quadratic_decay_model() -> DiscreteModel {
    DiscreteModel::new(
        expr_rate("a", "(n+1)^2"),
        expr_rate("b", "(n+1)^2"),
        expr_rate("c", "5 + 10/(5*n - 12)"),
    )
}

/// Schroedinger-type: a = 1, b = 0, c = x^(2a-2)/4 + (a-1)/2 x^(a-2).
pub fn power_potential_model(alpha: f64) -> DiffusionModel {
    DiffusionModel::from_strs(
        "1",
        "0",
        &format!(
            "x^{} / 4 + {} * x^{}",
            2.0 * alpha - 2.0,
            (alpha - 1.0) / 2.0,
            alpha - 2.0
        ),
        Domain::HalfLine,
        0.0,
    )
    .expect("gallery model parses")
}

/// Shifted harmonic oscillator a = 1, b = 0, c = x^2 + 1 on the whole line
/// (the shift moves the spectrum by 1 and leaves discreteness intact).
pub fn oscillator_shifted() -> DiffusionModel {
    DiffusionModel::from_strs("1", "0", "x^2 + 1", Domain::WholeLine, 0.0)
        .expect("gallery model parses")
}

/// Drift-and-killing family on (0, inf) with harmonic (1+x)^(gamma/10).
pub fn gamma_family(gamma: f64) -> DiffusionModel {
    DiffusionModel::from_strs(
        &format!("(1+x)^{gamma}"),
        &format!("{} * (1+x)^{}", 0.8 * gamma, gamma - 1.0),
        &format!("{} * (1+x)^{}", gamma * (9.0 * gamma - 10.0) / 100.0, gamma - 2.0),
        Domain::HalfLine,
        0.0,
    )
    .expect("gallery model parses")
}

/// Killing-free drift family: a = 1, b = -x^(alpha-1), maximal form.
pub fn drift_family(alpha: f64) -> DiffusionModel {
    DiffusionModel::from_strs(
        "1",
        &format!("-x^{}", alpha - 1.0),
        "0",
        Domain::HalfLine,
        0.0,
    )
    .expect("gallery model parses")
}

pub fn gallery() -> Vec<GalleryEntry> {
    use Verdict::*;
    let mut entries = vec![
        GalleryEntry {
            name: "quartic-b",
            description: "b_n = n^4, mu_n = n^-2",
            case: GalleryCase::Discrete {
                model: quartic_b_model(),
                mode: Mode::Both,
                n_max: 10_000,
            },
            expected: vec![BothDiscrete],
        },
        GalleryEntry {
            name: "power-min g=1",
            description: "b_n = a_(n+1) = n, minimal form",
            case: GalleryCase::Discrete {
                model: power_ratio_min(1.0),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![NotDiscrete],
        },
        GalleryEntry {
            name: "power-min g=1.5",
            description: "b_n = a_(n+1) = n^1.5, minimal form",
            case: GalleryCase::Discrete {
                model: power_ratio_min(1.5),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![NotDiscrete],
        },
        GalleryEntry {
            name: "power-min g=2",
            description: "boundary case: discrete iff gamma > 2",
            case: GalleryCase::Discrete {
                model: power_ratio_min(2.0),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![NotDiscrete, Inconclusive],
        },
        GalleryEntry {
            name: "power-min g=3",
            description: "b_n = a_(n+1) = n^3, minimal form",
            case: GalleryCase::Discrete {
                model: power_ratio_min(3.0),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![DiscreteMin],
        },
        GalleryEntry {
            name: "power-min g=4",
            description: "b_n = a_(n+1) = n^4, minimal form",
            case: GalleryCase::Discrete {
                model: power_ratio_min(4.0),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![DiscreteMin],
        },
        GalleryEntry {
            name: "power-max g=1",
            description: "a_n = b_n = n, maximal form",
            case: GalleryCase::Discrete {
                model: power_ratio_max(1.0),
                mode: Mode::Max,
                n_max: 100_000,
            },
            expected: vec![NotDiscrete],
        },
        GalleryEntry {
            name: "power-max g=3",
            description: "a_n = b_n = n^3, maximal form",
            case: GalleryCase::Discrete {
                model: power_ratio_max(3.0),
                mode: Mode::Max,
                n_max: 100_000,
            },
            expected: vec![DiscreteMax],
        },
        GalleryEntry {
            name: "vanishing-killing",
            description: "a = b = 1, c_n = 1/(n+1) decreasing to 0",
            case: GalleryCase::Discrete {
                model: vanishing_killing_model(),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![NotDiscrete],
        },
        GalleryEntry {
            name: "linear-killing",
            description: "a = b = (n+1)/4, c = 9(n+1)/16",
            case: GalleryCase::Discrete {
                model: linear_killing_model(),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![DiscreteMin],
        },
        GalleryEntry {
            name: "quadratic-decay-killing",
            description: "a = b = (n+1)^2, c = 5 + 10/(5n-12)",
            case: GalleryCase::Discrete {
                model: quadratic_decay_model(),
                mode: Mode::Min,
                n_max: 100_000,
            },
            expected: vec![NotDiscrete],
        },
    ];
    entries.push(GalleryEntry {
        name: "power-potential a=2",
        description: "c = x^2/4 + 1/2 on (0, inf), harmonic from Picard",
        case: GalleryCase::Diffusion {
            model: power_potential_model(2.0),
            h: GalleryH::Picard {
                gamma: (1.0, 0.0),
                interval: (0.0, 10.0),
                opts: PicardOptions {
                    max_iter: 300,
                    n_cells: 500,
                    ..Default::default()
                },
            },
            mode: Mode::Min,
            x_max: 4.5,
        },
        expected: vec![Verdict::DiscreteMin],
    });
    entries.push(GalleryEntry {
        name: "power-potential a=1",
        description: "c = 1/4 on (0, inf), harmonic from Picard",
        case: GalleryCase::Diffusion {
            model: power_potential_model(1.0),
            h: GalleryH::Picard {
                gamma: (1.0, 0.0),
                interval: (0.0, 80.0),
                opts: PicardOptions {
                    max_iter: 400,
                    n_cells: 600,
                    ..Default::default()
                },
            },
            mode: Mode::Min,
            x_max: 35.0,
        },
        expected: vec![Verdict::NotDiscrete],
    });
    entries.push(GalleryEntry {
        name: "oscillator",
        description: "c = x^2 + 1 on the whole line (shifted oscillator)",
        case: GalleryCase::Diffusion {
            model: oscillator_shifted(),
            h: GalleryH::Picard {
                gamma: (1.0, 0.0),
                interval: (-7.0, 7.0),
                opts: PicardOptions {
                    max_iter: 400,
                    n_cells: 360,
                    ..Default::default()
                },
            },
            mode: Mode::Min,
            x_max: 6.0,
        },
        expected: vec![Verdict::DiscreteMin],
    });
    entries.push(GalleryEntry {
        name: "(1+x)^g gamma=3",
        description: "a = (1+x)^3 family with h = (1+x)^(3/10)",
        case: GalleryCase::Diffusion {
            model: gamma_family(3.0),
            h: GalleryH::Expr(Expr::parse("(1+x)^0.3").unwrap()),
            mode: Mode::Min,
            x_max: 100.0,
        },
        expected: vec![Verdict::DiscreteMin],
    });
    entries.push(GalleryEntry {
        name: "(1+x)^g gamma=1.5",
        description: "a = (1+x)^1.5 family with h = (1+x)^(3/20)",
        case: GalleryCase::Diffusion {
            model: gamma_family(1.5),
            h: GalleryH::Expr(Expr::parse("(1+x)^0.15").unwrap()),
            mode: Mode::Min,
            x_max: 100.0,
        },
        expected: vec![Verdict::NotDiscrete],
    });
    entries.push(GalleryEntry {
        name: "neg-drift a=2",
        description: "b = -x on (0, inf), maximal form, h = 1",
        case: GalleryCase::Diffusion {
            model: drift_family(2.0),
            h: GalleryH::One,
            mode: Mode::Max,
            x_max: 8.0,
        },
        expected: vec![Verdict::DiscreteMax],
    });
    entries.push(GalleryEntry {
        name: "neg-drift a=1",
        description: "b = -1 on (0, inf), maximal form, h = 1",
        case: GalleryCase::Diffusion {
            model: drift_family(1.0),
            h: GalleryH::One,
            mode: Mode::Max,
            x_max: 30.0,
        },
        expected: vec![Verdict::NotDiscrete],
    });
    entries
}

pub fn run_entry(entry: &GalleryEntry) -> Result<GalleryOutcome, GalleryError> {
    let (got, detail) = match &entry.case {
        GalleryCase::Discrete { model, mode, n_max } => {
            let rep = classify(model, *mode, *n_max, &FitOptions::default())?;
            let side = rep.min_side.as_ref().or(rep.max_side.as_ref());
            let detail = side
                .map(|s| s.note.clone())
                .unwrap_or_else(|| "no side report".into());
            (rep.verdict, detail)
        }
        GalleryCase::Diffusion {
            model,
            h,
            mode,
            x_max,
        } => {
            let opts = ContinuousOptions::default();
            let sol;
            let hf = match h {
                GalleryH::One => HarmonicFn::One,
                GalleryH::Expr(e) => HarmonicFn::Expr(e),
                GalleryH::Picard {
                    gamma,
                    interval,
                    opts: popts,
                } => {
                    sol = picard_solve(model, gamma.0, gamma.1, *interval, popts)?;
                    HarmonicFn::Picard(&sol)
                }
            };
            let rep = match model.domain {
                Domain::HalfLine => criteria_halfline(model, &hf, *mode, *x_max, &opts)?,
                Domain::WholeLine => criteria_wholeline(model, &hf, *mode, *x_max, &opts)?,
            };
            (rep.verdict, rep.note)
        }
    };
    Ok(GalleryOutcome {
        name: entry.name,
        description: entry.description,
        expected: entry.expected.clone(),
        got,
        pass: entry.expected.contains(&got),
        detail,
    })
}

pub fn run_all() -> Vec<Result<GalleryOutcome, GalleryError>> {
    gallery().iter().map(run_entry).collect()
}
