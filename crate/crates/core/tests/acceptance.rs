//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! The criteria pin the planner's closed-form arithmetic, the analytic
//! guards of the density family (normalization, margin masses, pairwise
//! information bounds), the witness-region machinery, the hypercube testing
//! bound, the worst-case-risk consistency of every roster learner with the
//! planned minimax floor, the oracle's empirical rate, the Fourier-moment
//! budget of the Barron family, and byte-level determinism of experiment
//! outputs.

use std::sync::{Arc, OnceLock};

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use marginlab_core::assouad::{
    assouad_bound, build_e_regions, minimax_lower_bound, project_estimator,
};
use marginlab_core::classes::{plan_parameters, ClassSpec, Plan};
use marginlab_core::construction::ThetaVector;
use marginlab_core::densities::HardInstance;
use marginlab_core::geometry::Point;
use marginlab_core::harness::fit_rate;
use marginlab_core::learners::{empirical_minimax, LearnerSpec, MinimaxTable, ThetaPolicy};
use marginlab_core::verification::{
    check_barron_moment, check_margin, check_normalization, check_pairwise_bounds,
    hellinger_tensorize, mc_integrate_box,
};

fn announce(criterion: usize, name: &str, pass: bool) {
    println!(
        "ACCEPTANCE {criterion:>2} {name}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {criterion} ({name}) failed");
}

fn holder_unit_plan(n: u64) -> Plan {
    plan_parameters(&ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 }, 2, n).unwrap()
}

#[test]
fn criterion_01_planner_arithmetic() {
    let start = std::time::Instant::now();

    let plan = holder_unit_plan(4);
    let p = &plan.params;
    let holder_ok = p.subdivisions == 12
        && p.cell_count == 6
        && p.amplitude_exact == Some(Ratio::new(1, 48))
        && p.hellinger_budget_exact == Some(Ratio::new(2, 9))
        && p.hellinger_budget <= 0.25;

    let plan = plan_parameters(&ClassSpec::ConvexLipschitz { gamma: 1.0 }, 2, 8).unwrap();
    let p = &plan.params;
    let convex_ok = p.subdivisions == 8
        && p.amplitude_exact == Some(Ratio::new(1, 256))
        && (p.half_level_radius - 0.125).abs() < 1e-15;

    let fast = start.elapsed().as_secs_f64() < 1.0;
    announce(1, "planner arithmetic", holder_ok && convex_ok && fast);
}

#[test]
fn criterion_02_density_normalization() {
    // 50 random vertices spread over three classes at their planned M for
    // n in {4, 64}; quadrature normalization within 1e-6 and the normalizer
    // bracket every time.
    let classes = [
        ClassSpec::Hoelder { alpha: 0.5, gamma: 1.0 },
        ClassSpec::Barron { capital_c: 1.0, gamma: 1.0 },
        ClassSpec::ConvexLipschitz { gamma: 2.0 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut checked = 0usize;
    let mut all_ok = true;
    'outer: for class in &classes {
        for n in [4u64, 64] {
            let plan = plan_parameters(class, 2, n).unwrap();
            let fam = Arc::new(plan.family);
            let m = fam.partition().cell_count();
            let amp = fam.amplitude();
            let bracket = ((1.0 - 2.0 * amp) / (1.0 - 4.0 * amp), 1.0 / (1.0 - 4.0 * amp));
            for _ in 0..9 {
                let theta = ThetaVector::random(m, &mut rng);
                // the constructor enforces the bracket internally; re-check
                let inst = HardInstance::new(fam.clone(), theta).unwrap();
                let in_bracket =
                    inst.normalizer() >= bracket.0 - 1e-12 && inst.normalizer() <= bracket.1 + 1e-12;
                let report = check_normalization(&inst, 0, 0).unwrap();
                all_ok &= in_bracket && report.pass && report.computed <= 1e-6;
                checked += 1;
                if checked >= 50 {
                    break 'outer;
                }
            }
        }
    }
    // dual-route agreement: quadrature and Monte Carlo within 3 errors
    let plan = holder_unit_plan(4);
    let fam = Arc::new(plan.family);
    let inst = HardInstance::new(fam, ThetaVector::parse("110100").unwrap()).unwrap();
    let quad = check_normalization(&inst, 0, 0).unwrap();
    let mut mc_rng = ChaCha8Rng::seed_from_u64(5);
    let (mc_mass, mc_se) = mc_integrate_box(
        |x| inst.density(&Point::new(x).unwrap()),
        &[0.0, 0.0],
        &[1.0, 1.0],
        60_000,
        &mut mc_rng,
    )
    .unwrap();
    let quad_mass = quad.extras.iter().find(|(k, _)| k == "total_mass").unwrap().1;
    all_ok &= (mc_mass - quad_mass).abs() <= 3.0 * (mc_se + quad.error);

    announce(2, "density normalization", all_ok && checked >= 50);
}

#[test]
fn criterion_03_flat_normalizer_closed_form() {
    // gamma_tilde = 1: C_theta = (1 - 2 amp) / (1 - 4 amp) exactly.
    let plan = holder_unit_plan(4);
    let fam = Arc::new(plan.family);
    let amp = fam.amplitude();
    let expected = (1.0 - 2.0 * amp) / (1.0 - 4.0 * amp);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut ok = (expected - 23.0 / 22.0).abs() < 1e-15;
    for theta in [
        ThetaVector::zeros(6),
        ThetaVector::ones(6),
        ThetaVector::random(6, &mut rng),
    ] {
        let inst = HardInstance::new(fam.clone(), theta).unwrap();
        ok &= (inst.normalizer() - expected).abs() <= 1e-12;
    }
    announce(3, "flat-density normalizer closed form", ok);
}

#[test]
fn criterion_04_margin_condition() {
    let plan = holder_unit_plan(4);
    let amp = plan.family.amplitude();
    let fam = Arc::new(plan.family);
    let epsilons: Vec<f64> = (0..10).map(|i| amp / 10.0 * 10f64.powf(i as f64 / 9.0)).collect();
    let mut ok = true;
    for theta in [ThetaVector::zeros(6), ThetaVector::parse("110101").unwrap()] {
        let inst = HardInstance::new(fam.clone(), theta).unwrap();
        let report = check_margin(&inst, &epsilons, 100_000, 0xBEE).unwrap();
        let slope = report.extras.iter().find(|(k, _)| k == "loglog_slope").unwrap().1;
        ok &= report.pass && slope >= 1.0 - 0.1;
    }
    announce(4, "margin condition", ok);
}

#[test]
fn criterion_05_pairwise_bounds() {
    let plan = holder_unit_plan(4);
    let fam = Arc::new(plan.family);
    let zero = ThetaVector::zeros(6);
    let mut ok = true;
    for j in 0..6 {
        let neighbour = ThetaVector::unit(6, j).unwrap();
        let reports = check_pairwise_bounds(&fam, &zero, &neighbour, 4, 1e-8).unwrap();
        ok &= reports.iter().all(|r| r.pass);
        // the tensorization identity reproduces the reported n-draw distance
        let hel = &reports[2];
        let single = hel.extras.iter().find(|(k, _)| k == "rho2_single").unwrap().1;
        let tensored = hel.extras.iter().find(|(k, _)| k == "rho2_tensorized").unwrap().1;
        ok &= (hellinger_tensorize(single, 4) - tensored).abs() <= 1e-12;
    }
    announce(5, "pairwise information bounds", ok);
}

#[test]
fn criterion_06_witness_regions() {
    let mut ok = true;
    let plans = [holder_unit_plan(4), plan_parameters(&ClassSpec::ConvexLipschitz { gamma: 1.0 }, 2, 8).unwrap()];
    for plan in &plans {
        let fam = Arc::new(plan.family.clone());
        let regions = build_e_regions(&fam).unwrap();
        ok &= regions.iter().all(|r| r.measure >= r.measure_floor);

        let m = fam.partition().cell_count();
        let mut rng = ChaCha8Rng::seed_from_u64(0xE0);
        // constant labels over the regions
        for _ in 0..5 {
            let theta = ThetaVector::random(m, &mut rng);
            let boundary = fam.horizon(&theta).unwrap();
            for region in &regions {
                for probe in 0..1000 {
                    let t = probe as f64 / 999.0;
                    let z = region.center[0] + (2.0 * t - 1.0) * region.base_radius;
                    let phi = fam.local_bump(region.index, &[z]).unwrap();
                    let b0 = fam.baseline().evaluate(&[z]);
                    let h = b0 + fam.amplitude() * phi * (0.5 + 0.25 * t);
                    ok &= boundary.classify(&Point::new(&[z, h]).unwrap()).unwrap()
                        == 1 - theta.get(region.index);
                }
            }
        }
        // projection inverts exact members
        for _ in 0..20 {
            let theta = ThetaVector::random(m, &mut rng);
            let boundary = fam.horizon(&theta).unwrap();
            let predictor = move |x: &Point| boundary.classify(x).unwrap() as f64;
            ok &= project_estimator(&predictor, &fam, &regions, 2).unwrap() == theta;
        }
    }
    announce(6, "witness regions and projection", ok);
}

#[test]
fn criterion_07_testing_bound_arithmetic() {
    let mut ok = (assouad_bound(6, 0.0).unwrap() - 3.0).abs() < 1e-10;
    ok &= (assouad_bound(6, 0.25).unwrap() - 1.5476312451722186).abs() < 1e-10;

    // every planned configuration keeps budget <= 1/4 and hence the testing
    // bound clears 2^-(d+1) M^(d-1)
    for d in [2usize, 3] {
        for class in [
            ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 },
            ClassSpec::Hoelder { alpha: 0.5, gamma: 1.5 },
            ClassSpec::Barron { capital_c: 1.0, gamma: 1.0 },
            ClassSpec::ConvexLipschitz { gamma: 1.0 },
            ClassSpec::ConvexLipschitz { gamma: 2.0 },
        ] {
            for n in [4u64, 16, 64, 256, 1024] {
                let plan = plan_parameters(&class, d, n).unwrap();
                let p = &plan.params;
                ok &= p.hellinger_budget <= 0.25 + 1e-12;
                let bound = assouad_bound(p.cell_count, p.hellinger_budget).unwrap();
                let floor = 2f64.powi(-(d as i32) - 1)
                    * (p.subdivisions as f64).powi(d as i32 - 1);
                ok &= bound >= floor - 1e-9;
            }
        }
    }
    announce(7, "hypercube testing bound", ok);
}

// ---------------------------------------------------------------------------
// The learner sweep shared by criteria 8 and 9.
// ---------------------------------------------------------------------------

struct Sweep {
    /// (n, lower bound, tables per learner)
    per_n: Vec<(u64, f64, Vec<MinimaxTable>)>,
}

fn roster() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::HistogramPlugin { cells_per_axis: 8 },
        LearnerSpec::KNearest { k: 3 },
        LearnerSpec::TubeAwareOracle,
        LearnerSpec::ConstantZero,
    ]
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let policy = ThetaPolicy::Auto { subset: 62 };
        let mut per_n = Vec::new();
        for (n, draws) in [(16u64, 3000u64), (64, 12_000), (256, 40_000)] {
            let plan = holder_unit_plan(n);
            let lower = minimax_lower_bound(&plan.params).unwrap();
            let fam = Arc::new(plan.family);
            let tables: Vec<MinimaxTable> = roster()
                .iter()
                .map(|spec| {
                    empirical_minimax(&fam, spec, n, 20, &policy, draws, 0x5EED).unwrap()
                })
                .collect();
            per_n.push((n, lower, tables));
        }
        Sweep { per_n }
    })
}

#[test]
fn criterion_08_lower_bound_consistency() {
    let sweep = sweep();
    let mut ok = true;
    for (n, lower, tables) in &sweep.per_n {
        for table in tables {
            let consistent = table.max_risk + 2.0 * table.max_se >= *lower;
            println!(
                "  n = {n:>4} {:>6}: max risk {:.6e} +- {:.2e} vs floor {:.6e} -> {}",
                table.learner,
                table.max_risk,
                table.max_se,
                lower,
                if consistent { "ok" } else { "VIOLATED" }
            );
            ok &= consistent;
        }
    }
    announce(8, "worst-case risks respect the planned floor", ok);
}

#[test]
fn criterion_09_oracle_rate() {
    let sweep = sweep();
    let points: Vec<(u64, f64)> = sweep
        .per_n
        .iter()
        .map(|(n, _, tables)| {
            let oracle = tables.iter().find(|t| t.learner == "oracle").unwrap();
            (*n, oracle.max_risk)
        })
        .collect();
    let fit = fit_rate(&points, Some(-0.5)).unwrap();
    println!(
        "  oracle fitted slope {:.4} vs theoretical exponent {:.4}",
        fit.slope,
        fit.theoretical_exponent.unwrap()
    );
    announce(9, "construction-aware learner rate", fit.slope <= -0.35);
}

#[test]
fn criterion_10_barron_moment() {
    let spec = ClassSpec::Barron { capital_c: 1.0, gamma: 1.0 };
    let plan = plan_parameters(&spec, 2, 1024).unwrap();
    let fam = Arc::new(plan.family);
    let m = fam.partition().cell_count();
    assert!(m >= 2, "need at least two cells to distinguish the vertices");
    let radius = 200.0 * fam.partition().subdivisions() as f64;
    let mut ok = true;
    for theta in [ThetaVector::zeros(m), ThetaVector::unit(m, 0).unwrap(), ThetaVector::ones(m)] {
        let report = check_barron_moment(&fam, &theta, 1.0, radius, 0.05).unwrap();
        let tail = report.extras.iter().find(|(k, _)| k == "tail_allowance").unwrap().1;
        println!(
            "  theta = {}: moment {:.6e} (tail {:.2e}) vs budget 1",
            theta.to_string_bits(),
            report.computed,
            tail
        );
        ok &= report.pass && !report.inconclusive && tail < 0.1;
    }
    announce(10, "Barron Fourier-moment budget", ok);
}

#[test]
fn criterion_11_determinism() {
    use marginlab_core::harness::{run, CheckKind, ExperimentConfig};
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        class: ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 },
        d: 2,
        n_list: vec![8, 16],
        learners: vec![LearnerSpec::HistogramPlugin { cells_per_axis: 4 }, LearnerSpec::TubeAwareOracle],
        replicates: 3,
        mc_samples: 500,
        check_budget: 2000,
        checks: vec![CheckKind::Construction, CheckKind::Normalization],
        theta_policy: ThetaPolicy::RandomSubset { count: 4 },
        master_seed: 0xD00D,
        out_dir: dir.path().to_path_buf(),
    };
    let snapshot = |threads: usize| -> Vec<(std::path::PathBuf, Vec<u8>)> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let summary = pool.install(|| run(&config)).unwrap();
        let mut files: Vec<_> = summary
            .files
            .iter()
            .map(|p| (p.clone(), std::fs::read(p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let a = snapshot(1);
    let b = snapshot(2);
    let ok = a.len() == b.len()
        && a.iter().zip(&b).all(|((pa, ba), (pb, bb))| pa == pb && ba == bb);
    announce(11, "byte-identical reruns across worker counts", ok);
}
