//! Command-line front end: plan hard instances, emit descriptors and
//! samples, run verification checks, compute bounds, and drive full
//! experiments with rate fits.
//!
//! Exit codes: 0 success, 2 a check failed, 3 parameter/planning error,
//! 4 numeric error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use marginlab_core::assouad::{assouad_bound, minimax_lower_bound};
use marginlab_core::classes::{plan_parameters, theoretical_rate, ClassSpec};
use marginlab_core::construction::{validate_construction, ThetaVector};
use marginlab_core::densities::HardInstance;
use marginlab_core::descriptor::{family_to_kv, plan_to_kv, KvDoc};
use marginlab_core::error::Error;
use marginlab_core::harness::{
    fit_rates_from_tables, parse_theta_policy, run, CheckKind, ExperimentConfig,
};
use marginlab_core::learners::LearnerSpec;
use marginlab_core::numerics::substream_seed;
use marginlab_core::verification::{
    check_barron_moment, check_holder_modulus, check_margin, check_normalization,
    check_pairwise_bounds,
};

#[derive(Parser)]
#[command(name = "marginlab", version, about = "Hard-instance laboratory for classification lower bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Function class of the boundary family.
    #[arg(long, value_parser = ["holder", "barron", "convex"])]
    class: String,
    /// Ambient dimension (>= 2).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Margin exponent.
    #[arg(long)]
    gamma: f64,
    /// Hölder exponent (Hölder class only).
    #[arg(long)]
    alpha: Option<f64>,
    /// Fourier-moment budget (Barron class only).
    #[arg(long, default_value_t = 1.0)]
    barron_c: f64,
    /// Sample budget the plan is tuned for.
    #[arg(long)]
    n: u64,
}

impl ProblemArgs {
    fn class_spec(&self) -> Result<ClassSpec, Error> {
        let spec = match self.class.as_str() {
            "holder" => ClassSpec::Hoelder { alpha: self.alpha.unwrap_or(1.0), gamma: self.gamma },
            "barron" => ClassSpec::Barron { capital_c: self.barron_c, gamma: self.gamma },
            "convex" => ClassSpec::ConvexLipschitz { gamma: self.gamma },
            other => return Err(Error::Parameter(format!("unknown class {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Derive the family parameters for (class, d, n) and print the plan.
    Plan {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit an instance descriptor (plan plus a hypercube vertex).
    Instance {
        #[command(flatten)]
        problem: ProblemArgs,
        /// One vertex: a bit string, `zeros`, `ones`, or `random`.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a labelled sample from an instance and write it as CSV.
    Sample {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        theta: Option<String>,
        /// Number of observations to draw (defaults to the plan's n).
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification checks against a planned instance.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        theta: Option<String>,
        /// Comma list: construction,normalization,margin,pairwise,holder,barron or `all`.
        #[arg(long, default_value = "all")]
        checks: String,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the report files (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the closed-form bound chain for a plan.
    Bound {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Run a full experiment (plan, validate, benchmark, summarize).
    Experiment {
        /// Flat key-value config file; flags below override nothing when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["holder", "barron", "convex"])]
        class: Option<String>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        barron_c: f64,
        /// Comma-separated list of sample sizes.
        #[arg(long)]
        n_list: Option<String>,
        /// Repeatable learner spec: histogram:<cells>, knn:<k>, oracle, zero.
        #[arg(long = "learner")]
        learners: Vec<String>,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: u64,
        #[arg(long, default_value_t = 100_000)]
        check_budget: u64,
        /// Comma list of checks to run per n (default none).
        #[arg(long, default_value = "")]
        checks: String,
        /// Vertex policy: auto[:subset], full, random:<count>, or bit strings.
        #[arg(long = "theta")]
        theta: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (required unless supplied by --config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit log-log rates to risk tables produced by `experiment`.
    Rates {
        /// Risk table files.
        #[arg(long = "table", required = true)]
        tables: Vec<PathBuf>,
        /// Theoretical exponent to report alongside the fit.
        #[arg(long, allow_negative_numbers = true)]
        exponent: Option<f64>,
        /// Optional SVG plot of points and fit lines.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn pick_theta(spec: Option<&str>, m: usize, seed: u64) -> Result<ThetaVector, Error> {
    match spec {
        None => Ok(ThetaVector::ones(m)),
        Some("zeros") => Ok(ThetaVector::zeros(m)),
        Some("ones") => Ok(ThetaVector::ones(m)),
        Some("random") => {
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, &[0x7468]));
            Ok(ThetaVector::random(m, &mut rng))
        }
        Some(bits) => {
            let t = ThetaVector::parse(bits)?;
            if t.len() != m {
                return Err(Error::Parameter(format!(
                    "theta has {} bits but the plan has {m} cells",
                    t.len()
                )));
            }
            Ok(t)
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(check_failed) => {
            if check_failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Plan { problem, out } => {
            let plan = plan_parameters(&problem.class_spec()?, problem.d, problem.n)?;
            emit(out.as_ref(), &plan_to_kv(&plan).render())?;
            Ok(false)
        }
        Command::Instance { problem, theta, seed, out } => {
            let plan = plan_parameters(&problem.class_spec()?, problem.d, problem.n)?;
            let m = plan.family.partition().cell_count();
            let theta = pick_theta(theta.as_deref(), m, seed)?;
            let family = Arc::new(plan.family);
            let instance = HardInstance::new(family.clone(), theta.clone())?;
            let mut doc = family_to_kv(&family, Some(&theta));
            doc.set("normalizer", instance.normalizer());
            doc.set("region_mass", instance.region_mass());
            doc.set("seed", seed);
            emit(out.as_ref(), &doc.render())?;
            Ok(false)
        }
        Command::Sample { problem, theta, samples, seed, out } => {
            let plan = plan_parameters(&problem.class_spec()?, problem.d, problem.n)?;
            let m = plan.family.partition().cell_count();
            let theta = pick_theta(theta.as_deref(), m, seed)?;
            let instance = HardInstance::new(Arc::new(plan.family), theta)?;
            let count = samples.unwrap_or(problem.n) as usize;
            let sample = instance.sample_labeled(count, seed)?;
            let mut buf = Vec::new();
            sample.write_csv(&mut buf)?;
            emit(out.as_ref(), std::str::from_utf8(&buf).expect("csv is utf8"))?;
            Ok(false)
        }
        Command::Verify { problem, theta, checks, mc_samples, seed, out } => {
            let class = problem.class_spec()?;
            let checks = CheckKind::parse_list(&checks)?;
            let plan = plan_parameters(&class, problem.d, problem.n)?;
            let family = Arc::new(plan.family.clone());
            let m = family.partition().cell_count();
            let theta = pick_theta(theta.as_deref(), m, seed)?;
            let instance = HardInstance::new(family.clone(), theta.clone())?;
            let mut any_failed = false;
            // one rendered report per check
            let mut reports: Vec<(&'static str, String)> = Vec::new();
            for check in checks {
                match check {
                    CheckKind::Construction => {
                        let r = validate_construction(&family, 2048, seed)?;
                        any_failed |= !r.all_pass();
                        reports.push((check.name(), r.render()));
                    }
                    CheckKind::Normalization => {
                        let r = check_normalization(&instance, mc_samples, seed)?;
                        any_failed |= !r.pass;
                        reports.push((check.name(), r.render()));
                    }
                    CheckKind::Margin => {
                        let amp = family.amplitude();
                        let epsilons: Vec<f64> =
                            (0..10).map(|i| amp / 10.0 * 10f64.powf(i as f64 / 9.0)).collect();
                        let r = check_margin(&instance, &epsilons, mc_samples, seed)?;
                        any_failed |= !r.pass;
                        reports.push((check.name(), r.render()));
                    }
                    CheckKind::Pairwise => {
                        let zero = ThetaVector::zeros(m);
                        let one = ThetaVector::unit(m, 0)?;
                        let mut body = String::new();
                        for r in check_pairwise_bounds(&family, &zero, &one, problem.n, 1e-8)? {
                            any_failed |= !r.pass;
                            body.push_str(&r.render());
                        }
                        reports.push((check.name(), body));
                    }
                    CheckKind::Holder => {
                        let boundary = family.horizon(&theta)?;
                        let foci: Vec<Vec<f64>> = (0..m.min(16))
                            .map(|j| family.partition().center(j))
                            .collect::<Result<_, Error>>()?;
                        let r = check_holder_modulus(
                            &boundary,
                            family.alpha(),
                            family.family_holder_constant(),
                            1024,
                            &foci,
                        )?;
                        any_failed |= !r.pass;
                        reports.push((check.name(), r.render()));
                    }
                    CheckKind::Barron => {
                        let ClassSpec::Barron { capital_c, .. } = class else { continue };
                        let radius = 200.0 * family.partition().subdivisions() as f64;
                        let r = check_barron_moment(
                            &family,
                            &ThetaVector::ones(m),
                            capital_c,
                            radius,
                            0.05,
                        )?;
                        any_failed |= !r.pass;
                        reports.push((check.name(), r.render()));
                    }
                }
            }
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    for (name, body) in &reports {
                        fs::write(dir.join(format!("verify_{name}.txt")), body)?;
                    }
                }
                None => {
                    for (_, body) in &reports {
                        print!("{body}");
                    }
                }
            }
            Ok(any_failed)
        }
        Command::Bound { problem } => {
            let class = problem.class_spec()?;
            let plan = plan_parameters(&class, problem.d, problem.n)?;
            let p = &plan.params;
            let lower = minimax_lower_bound(p)?;
            let rate = theoretical_rate(&class, problem.d)?;
            let testing = assouad_bound(p.cell_count, p.hellinger_budget)?;
            let mut doc = KvDoc::new();
            doc.set("subdivisions", p.subdivisions);
            doc.set("cell_count", p.cell_count);
            doc.set("amplitude", p.amplitude);
            doc.set("hellinger_budget", p.hellinger_budget);
            doc.set("testing_bound", testing);
            doc.set("minimax_lower_bound", lower);
            doc.set("rate_exponent", rate.exponent);
            doc.set("rate_constant", rate.constant);
            doc.set("rate_value_at_n", rate.value(problem.n));
            print!("{}", doc.render());
            Ok(false)
        }
        Command::Experiment {
            config,
            class,
            d,
            gamma,
            alpha,
            barron_c,
            n_list,
            learners,
            replicates,
            mc_samples,
            check_budget,
            checks,
            theta,
            seed,
            out,
        } => {
            let config = match config {
                Some(path) => {
                    let text = fs::read_to_string(path)?;
                    ExperimentConfig::from_kv(&KvDoc::parse(&text)?)?
                }
                None => {
                    let class_name = class
                        .ok_or_else(|| Error::Parameter("experiment: --class required".into()))?;
                    let gamma =
                        gamma.ok_or_else(|| Error::Parameter("experiment: --gamma required".into()))?;
                    let spec = match class_name.as_str() {
                        "holder" => ClassSpec::Hoelder { alpha: alpha.unwrap_or(1.0), gamma },
                        "barron" => ClassSpec::Barron { capital_c: barron_c, gamma },
                        "convex" => ClassSpec::ConvexLipschitz { gamma },
                        other => return Err(Error::Parameter(format!("unknown class {other:?}"))),
                    };
                    let n_list: Vec<u64> = n_list
                        .ok_or_else(|| Error::Parameter("experiment: --n-list required".into()))?
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|e| Error::Parse(format!("n_list: {e}"))))
                        .collect::<Result<_, Error>>()?;
                    let learners: Vec<LearnerSpec> = if learners.is_empty() {
                        vec![
                            LearnerSpec::HistogramPlugin { cells_per_axis: 8 },
                            LearnerSpec::KNearest { k: 3 },
                            LearnerSpec::TubeAwareOracle,
                            LearnerSpec::ConstantZero,
                        ]
                    } else {
                        learners
                            .iter()
                            .map(|s| LearnerSpec::parse(s))
                            .collect::<Result<_, Error>>()?
                    };
                    let theta_refs: Vec<&str> = theta.iter().map(String::as_str).collect();
                    let out_dir =
                        out.ok_or_else(|| Error::Parameter("experiment: --out required".into()))?;
                    ExperimentConfig {
                        class: spec,
                        d,
                        n_list,
                        learners,
                        replicates,
                        mc_samples,
                        check_budget,
                        checks: CheckKind::parse_list(&checks)?,
                        theta_policy: parse_theta_policy(&theta_refs)?,
                        master_seed: seed,
                        out_dir,
                    }
                }
            };
            let summary = run(&config)?;
            for (n, bound) in &summary.bounds {
                println!("n = {n}: planned lower bound {bound:.6e}");
            }
            for table in &summary.tables {
                println!(
                    "{} n = {}: max risk {:.6e} +- {:.6e} (theta {})",
                    table.learner, table.n, table.max_risk, table.max_se, table.max_index
                );
            }
            Ok(summary.any_check_failed)
        }
        Command::Rates { tables, exponent, svg } => {
            let fits = fit_rates_from_tables(&tables, exponent, svg.as_deref())?;
            for (learner, fit) in &fits {
                let target = fit
                    .theoretical_exponent
                    .map(|e| format!(" target {e:.4} (gap {:+.4})", fit.slope - e))
                    .unwrap_or_default();
                println!(
                    "{learner}: slope {:.4} intercept {:.4} residual {:.3e} points {}{}",
                    fit.slope, fit.intercept, fit.residual_norm, fit.points_used, target
                );
            }
            Ok(false)
        }
    }
}
