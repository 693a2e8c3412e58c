//! Experiment runner: plan, build, validate, verify, benchmark, and write
//! everything as delimited or key-value text files carrying their full
//! provenance (config plus master seed) in header comments. A fixed config
//! and seed produce byte-identical outputs regardless of the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assouad::minimax_lower_bound;
use crate::classes::{plan_parameters, ClassSpec, Plan};
use crate::construction::{validate_construction, ThetaVector};
use crate::densities::HardInstance;
use crate::descriptor::{class_from_kv, class_to_kv, plan_to_kv, KvDoc};
use crate::error::{Error, Result};
use crate::learners::{empirical_minimax, LearnerSpec, MinimaxTable, ThetaPolicy};
use crate::numerics::{ols, substream_seed};
use crate::verification::{
    check_barron_moment, check_holder_modulus, check_margin, check_normalization,
    check_pairwise_bounds, CheckReport,
};

/// Verification stages an experiment may run per sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Construction,
    Normalization,
    Margin,
    Pairwise,
    Holder,
    Barron,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Construction => "construction",
            CheckKind::Normalization => "normalization",
            CheckKind::Margin => "margin",
            CheckKind::Pairwise => "pairwise",
            CheckKind::Holder => "holder",
            CheckKind::Barron => "barron",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<CheckKind>> {
        if s.trim().is_empty() || s.trim() == "none" {
            return Ok(Vec::new());
        }
        if s.trim() == "all" {
            return Ok(vec![
                CheckKind::Construction,
                CheckKind::Normalization,
                CheckKind::Margin,
                CheckKind::Pairwise,
                CheckKind::Holder,
                CheckKind::Barron,
            ]);
        }
        s.split(',')
            .map(|item| match item.trim() {
                "construction" => Ok(CheckKind::Construction),
                "normalization" => Ok(CheckKind::Normalization),
                "margin" => Ok(CheckKind::Margin),
                "pairwise" => Ok(CheckKind::Pairwise),
                "holder" => Ok(CheckKind::Holder),
                "barron" => Ok(CheckKind::Barron),
                other => Err(Error::Parse(format!("unknown check {other:?}"))),
            })
            .collect()
    }
}

/// Full experiment description; serializable as a flat key-value document.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub class: ClassSpec,
    pub d: usize,
    pub n_list: Vec<u64>,
    pub learners: Vec<LearnerSpec>,
    pub replicates: usize,
    /// Monte Carlo draws per risk evaluation.
    pub mc_samples: u64,
    /// Monte Carlo budget for verification checks.
    pub check_budget: u64,
    pub checks: Vec<CheckKind>,
    pub theta_policy: ThetaPolicy,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.class.validate()?;
        if self.n_list.is_empty() {
            return Err(Error::Parameter("config: n_list must not be empty".into()));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter("config: n_list must be strictly increasing".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Parameter("config: need at least one learner".into()));
        }
        for l in &self.learners {
            l.validate()?;
        }
        if self.replicates == 0 || self.mc_samples == 0 || self.check_budget == 0 {
            return Err(Error::Parameter("config: budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        class_to_kv(&self.class, &mut doc);
        doc.set("d", self.d);
        doc.set(
            "n_list",
            self.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        );
        for l in &self.learners {
            let tag = match l {
                LearnerSpec::HistogramPlugin { cells_per_axis } => format!("histogram:{cells_per_axis}"),
                LearnerSpec::KNearest { k } => format!("knn:{k}"),
                LearnerSpec::TubeAwareOracle => "oracle".into(),
                LearnerSpec::ConstantZero => "zero".into(),
            };
            doc.set("learner", tag);
        }
        doc.set("replicates", self.replicates);
        doc.set("mc_samples", self.mc_samples);
        doc.set("check_budget", self.check_budget);
        doc.set(
            "checks",
            self.checks.iter().map(|c| c.name().to_string()).collect::<Vec<_>>().join(","),
        );
        match &self.theta_policy {
            ThetaPolicy::Auto { subset } => doc.set("theta", format!("auto:{subset}")),
            ThetaPolicy::FullEnumeration => doc.set("theta", "full"),
            ThetaPolicy::RandomSubset { count } => doc.set("theta", format!("random:{count}")),
            ThetaPolicy::Explicit(list) => {
                for t in list {
                    doc.set("theta", t.to_string_bits());
                }
            }
        }
        doc.set("seed", self.master_seed);
        doc.set("out", self.out_dir.display());
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let class = class_from_kv(doc)?;
        let n_list: Vec<u64> = doc
            .get("n_list")?
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| Error::Parse(format!("n_list: {e}"))))
            .collect::<Result<_>>()?;
        let learners: Vec<LearnerSpec> =
            doc.get_all("learner").iter().map(|s| LearnerSpec::parse(s)).collect::<Result<_>>()?;
        let theta_values = doc.get_all("theta");
        let theta_policy = parse_theta_policy(&theta_values)?;
        Ok(ExperimentConfig {
            class,
            d: doc.get_usize("d")?,
            n_list,
            learners,
            replicates: doc.get_usize("replicates")?,
            mc_samples: doc.get_u64("mc_samples")?,
            check_budget: doc.get_u64("check_budget")?,
            checks: CheckKind::parse_list(doc.get_opt("checks").unwrap_or(""))?,
            theta_policy,
            master_seed: doc.get_u64("seed")?,
            out_dir: PathBuf::from(doc.get("out")?),
        })
    }
}

/// Parse `--theta` values: `auto[:subset]`, `full`, `random:<count>`, or one
/// or more explicit bit strings.
pub fn parse_theta_policy(values: &[&str]) -> Result<ThetaPolicy> {
    if values.is_empty() {
        return Ok(ThetaPolicy::Auto { subset: 62 });
    }
    if values.len() == 1 {
        let v = values[0].trim();
        if v == "full" {
            return Ok(ThetaPolicy::FullEnumeration);
        }
        if v == "auto" {
            return Ok(ThetaPolicy::Auto { subset: 62 });
        }
        if let Some(rest) = v.strip_prefix("auto:") {
            let subset =
                rest.parse().map_err(|e| Error::Parse(format!("theta auto subset: {e}")))?;
            return Ok(ThetaPolicy::Auto { subset });
        }
        if let Some(rest) = v.strip_prefix("random:") {
            let count = rest.parse().map_err(|e| Error::Parse(format!("theta count: {e}")))?;
            return Ok(ThetaPolicy::RandomSubset { count });
        }
    }
    let list: Vec<ThetaVector> =
        values.iter().map(|v| ThetaVector::parse(v.trim())).collect::<Result<_>>()?;
    Ok(ThetaPolicy::Explicit(list))
}

/// Outcome of one experiment run.
#[derive(Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub tables: Vec<MinimaxTable>,
    /// (n, planned lower bound) per sample size.
    pub bounds: Vec<(u64, f64)>,
    pub any_check_failed: bool,
}

fn provenance_header(config: &ExperimentConfig) -> String {
    let mut out = String::from("# experiment output\n");
    for (k, v) in config.to_kv().entries() {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out
}

fn write_file(path: &Path, header: &str, body: &str) -> Result<()> {
    fs::write(path, format!("{header}{body}"))?;
    Ok(())
}

// substream tags for check inputs
const TAG_CHECK_THETA: u64 = 0x6354;
const TAG_CHECK_RUN: u64 = 0x6352;

fn run_checks(
    config: &ExperimentConfig,
    plan: &Plan,
    n: u64,
    header: &str,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let mut any_failed = false;
    let family = Arc::new(plan.family.clone());
    let m = family.partition().cell_count();
    let seed = substream_seed(config.master_seed, &[TAG_CHECK_RUN, n]);
    let mut theta_rng =
        ChaCha8Rng::seed_from_u64(substream_seed(config.master_seed, &[TAG_CHECK_THETA, n]));
    let theta = ThetaVector::random(m, &mut theta_rng);

    let mut emit = |name: &str, body: String, failed: bool| -> Result<()> {
        let path = config.out_dir.join(format!("verify_{name}_n{n}.txt"));
        write_file(&path, header, &body)?;
        files.push(path);
        if failed {
            any_failed = true;
        }
        Ok(())
    };

    for check in &config.checks {
        match check {
            CheckKind::Construction => {
                let report = validate_construction(&family, 2048, seed)?;
                emit("construction", report.render(), !report.all_pass())?;
            }
            CheckKind::Normalization => {
                let inst = HardInstance::new(family.clone(), theta.clone())?;
                let report = check_normalization(&inst, config.check_budget, seed)?;
                emit("normalization", report.render(), !report.pass)?;
            }
            CheckKind::Margin => {
                let inst = HardInstance::new(family.clone(), theta.clone())?;
                let amp = family.amplitude();
                let epsilons: Vec<f64> =
                    (0..10).map(|i| amp / 10.0 * 10f64.powf(i as f64 / 9.0)).collect();
                let report = check_margin(&inst, &epsilons, config.check_budget, seed)?;
                emit("margin", report.render(), !report.pass)?;
            }
            CheckKind::Pairwise => {
                let zero = ThetaVector::zeros(m);
                let one = ThetaVector::unit(m, 0)?;
                let reports = check_pairwise_bounds(&family, &zero, &one, n, 1e-8)?;
                let body: String = reports.iter().map(CheckReport::render).collect();
                emit("pairwise", body, reports.iter().any(|r| !r.pass))?;
            }
            CheckKind::Holder => {
                let boundary = family.horizon(&theta)?;
                let foci: Vec<Vec<f64>> = (0..m.min(16))
                    .map(|j| family.partition().center(j))
                    .collect::<Result<_>>()?;
                let report = check_holder_modulus(
                    &boundary,
                    family.alpha(),
                    family.family_holder_constant(),
                    1024,
                    &foci,
                )?;
                emit("holder", report.render(), !report.pass)?;
            }
            CheckKind::Barron => {
                let ClassSpec::Barron { capital_c, .. } = config.class else {
                    continue;
                };
                let radius = 200.0 * family.partition().subdivisions() as f64;
                let report =
                    check_barron_moment(&family, &ThetaVector::ones(m), capital_c, radius, 0.05)?;
                emit("barron", report.render(), !report.pass)?;
            }
        }
    }
    Ok(any_failed)
}

/// Run a full experiment: per sample size, plan the family, write its
/// descriptor, run the configured checks, benchmark every learner, and
/// write the worst-case risk tables plus a summary.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    let header = provenance_header(config);
    let mut files = Vec::new();
    let mut tables = Vec::new();
    let mut bounds = Vec::new();
    let mut any_check_failed = false;

    for &n in &config.n_list {
        let plan = plan_parameters(&config.class, config.d, n)?;
        let plan_path = config.out_dir.join(format!("plan_n{n}.txt"));
        write_file(&plan_path, &header, &plan_to_kv(&plan).render())?;
        files.push(plan_path);

        any_check_failed |= run_checks(config, &plan, n, &header, &mut files)?;

        let family = Arc::new(plan.family.clone());
        let lower_bound = minimax_lower_bound(&plan.params)?;
        bounds.push((n, lower_bound));

        for learner in &config.learners {
            let table = empirical_minimax(
                &family,
                learner,
                n,
                config.replicates,
                &config.theta_policy,
                config.mc_samples,
                config.master_seed,
            )?;
            let path = config.out_dir.join(format!("risk_{}_n{n}.csv", table.learner));
            let mut body = Vec::new();
            table.write_csv(&mut body)?;
            write_file(&path, &header, std::str::from_utf8(&body).expect("csv is utf8"))?;
            files.push(path);
            tables.push(table);
        }
    }

    // summary: worst-case risk per (learner, n) against the planned floor
    let mut body = String::from("learner,n,max_risk,max_se,lower_bound,consistent\n");
    for table in &tables {
        let lower = bounds.iter().find(|(n, _)| *n == table.n).map(|(_, b)| *b).unwrap_or(f64::NAN);
        let consistent = table.max_risk + 2.0 * table.max_se >= lower;
        body.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{}\n",
            table.learner, table.n, table.max_risk, table.max_se, lower, consistent
        ));
        if !consistent {
            any_check_failed = true;
        }
    }
    let summary_path = config.out_dir.join("summary.csv");
    write_file(&summary_path, &header, &body)?;
    files.push(summary_path);

    Ok(RunSummary { files, tables, bounds, any_check_failed })
}

// ---------------------------------------------------------------------------
// Rate fitting
// ---------------------------------------------------------------------------

/// Least-squares fit of log(risk) against log(n).
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    pub theoretical_exponent: Option<f64>,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// Fit a rate to (n, worst-case risk) points. Non-positive risks are
/// excluded (and counted); at least three usable points are required.
pub fn fit_rate(points: &[(u64, f64)], theoretical_exponent: Option<f64>) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|&(n, r)| ((n as f64).ln(), r.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::Parameter(format!(
            "fit_rate: need at least 3 positive-risk points, have {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|(x, _)| *x).collect();
    let ys: Vec<f64> = usable.iter().map(|(_, y)| *y).collect();
    let (intercept, slope, residual_norm) = ols(&xs, &ys)?;
    Ok(RateFit {
        slope,
        intercept,
        residual_norm,
        theoretical_exponent,
        points_used: usable.len(),
        points_excluded: excluded,
    })
}

/// Read a risk table written by `run` and return the worst row per n.
pub fn read_risk_table(path: &Path) -> Result<Vec<(String, u64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut best: std::collections::BTreeMap<(String, u64), (f64, f64)> = Default::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("learner,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!("risk table row has {} fields", fields.len())));
        }
        let learner = fields[0].to_string();
        let n: u64 = fields[2].parse().map_err(|e| Error::Parse(format!("n: {e}")))?;
        let risk: f64 =
            fields[4].parse().map_err(|e| Error::Parse(format!("mean_risk: {e}")))?;
        let se: f64 = fields[5].parse().map_err(|e| Error::Parse(format!("se: {e}")))?;
        let entry = best.entry((learner, n)).or_insert((f64::NEG_INFINITY, 0.0));
        if risk > entry.0 {
            *entry = (risk, se);
        }
    }
    Ok(best.into_iter().map(|((l, n), (r, s))| (l, n, r, s)).collect())
}

/// Fit rates for every learner found in the given tables; returns one line
/// per learner plus an optional SVG rendering of the log-log points.
pub fn fit_rates_from_tables(
    paths: &[PathBuf],
    theoretical_exponent: Option<f64>,
    svg_out: Option<&Path>,
) -> Result<Vec<(String, RateFit)>> {
    let mut per_learner: std::collections::BTreeMap<String, Vec<(u64, f64)>> = Default::default();
    for path in paths {
        for (learner, n, risk, _) in read_risk_table(path)? {
            per_learner.entry(learner).or_default().push((n, risk));
        }
    }
    let mut fits = Vec::new();
    for (learner, mut points) in per_learner {
        points.sort_by_key(|(n, _)| *n);
        let fit = fit_rate(&points, theoretical_exponent)?;
        fits.push((learner, fit));
    }
    if let Some(path) = svg_out {
        let mut per_learner: std::collections::BTreeMap<String, Vec<(u64, f64)>> = Default::default();
        for p in paths {
            for (learner, n, risk, _) in read_risk_table(p)? {
                per_learner.entry(learner).or_default().push((n, risk));
            }
        }
        fs::write(path, render_rate_svg(&per_learner, &fits))?;
    }
    Ok(fits)
}

/// Minimal SVG of log-log risk points with their fitted lines.
fn render_rate_svg(
    points: &std::collections::BTreeMap<String, Vec<(u64, f64)>>,
    fits: &[(String, RateFit)],
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    let all: Vec<(f64, f64)> = points
        .values()
        .flatten()
        .filter(|(_, r)| *r > 0.0)
        .map(|&(n, r)| ((n as f64).ln(), r.ln()))
        .collect();
    if all.is_empty() {
        return format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\"/>");
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let spanx = (x1 - x0).max(1e-9);
    let spany = (y1 - y0).max(1e-9);
    let sx = move |x: f64| PAD + (x - x0) / spanx * (W - 2.0 * PAD);
    let sy = move |y: f64| H - PAD - (y - y0) / spany * (H - 2.0 * PAD);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"13\">log n</text>\n\
         <text x=\"12\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 12 {})\">log max risk</text>\n",
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0
    );
    for (i, (learner, pts)) in points.iter().enumerate() {
        let color = colors[i % colors.len()];
        for &(n, r) in pts {
            if r > 0.0 {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{color}\"/>\n",
                    sx((n as f64).ln()),
                    sy(r.ln())
                ));
            }
        }
        if let Some((_, fit)) = fits.iter().find(|(l, _)| l == learner) {
            let ya = fit.intercept + fit.slope * x0;
            let yb = fit.intercept + fit.slope * x1;
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{color}\">{learner} slope {:.3}</text>\n",
                sx(x0),
                sy(ya),
                sx(x1),
                sy(yb),
                sx(x0) + 4.0,
                sy(ya) - 6.0,
                fit.slope
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
