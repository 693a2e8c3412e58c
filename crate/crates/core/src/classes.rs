//! Per-class parameter planning and closed-form rate targets.
//!
//! Given a function class, dimension and sample budget, the planner chooses
//! the grid refinement M (the smallest even integer that keeps the Hellinger
//! budget of the hypercube family at or below 1/4), the perturbation
//! amplitude, and the canonical profile and baseline. Where the arithmetic
//! is rational (alpha = 1 and integer gamma/alpha) the amplitude and budget
//! are additionally carried as exact ratios so the planner examples can be
//! checked without float slack.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::construction::{
    plateau_bump, Baseline, BumpProfile, ClassTag, GridPartition, PerturbedFamily,
};
use crate::error::{Error, Result};
use crate::numerics::integrate_piecewise;

/// A function class together with the margin exponent `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassSpec {
    Hoelder { alpha: f64, gamma: f64 },
    Barron { capital_c: f64, gamma: f64 },
    ConvexLipschitz { gamma: f64 },
}

impl ClassSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassSpec::Hoelder { alpha, gamma } => {
                if !(0.0 < alpha && alpha <= 1.0) {
                    return Err(Error::Parameter(format!("alpha must be in (0,1], got {alpha}")));
                }
                if gamma < alpha {
                    return Err(Error::Parameter(format!(
                        "margin exponent gamma = {gamma} must be >= alpha = {alpha}"
                    )));
                }
            }
            ClassSpec::Barron { capital_c, gamma } => {
                if capital_c <= 0.0 {
                    return Err(Error::Parameter("Barron constant must be positive".into()));
                }
                if gamma < 1.0 {
                    return Err(Error::Parameter("Barron families require gamma >= 1".into()));
                }
            }
            ClassSpec::ConvexLipschitz { gamma } => {
                if gamma < 1.0 {
                    return Err(Error::Parameter("convex-Lipschitz families require gamma >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            ClassSpec::Hoelder { alpha, .. } => alpha,
            _ => 1.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            ClassSpec::Hoelder { gamma, .. } => gamma,
            ClassSpec::Barron { gamma, .. } => gamma,
            ClassSpec::ConvexLipschitz { gamma } => gamma,
        }
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma() / self.alpha()
    }

    pub fn class_tag(&self) -> ClassTag {
        match self {
            ClassSpec::Hoelder { .. } => ClassTag::Hoelder,
            ClassSpec::Barron { .. } => ClassTag::Barron,
            ClassSpec::ConvexLipschitz { .. } => ClassTag::ConvexLipschitz,
        }
    }
}

/// Everything the planner derives from `(class, d, n)`.
#[derive(Debug, Clone)]
pub struct PlannedParameters {
    pub class: ClassSpec,
    pub d: usize,
    pub n: u64,
    /// Even grid refinement M.
    pub subdivisions: usize,
    /// Real threshold the refinement rounds up from.
    pub subdivisions_target: f64,
    /// Perturbation amplitude.
    pub amplitude: f64,
    pub amplitude_exact: Option<Ratio<i128>>,
    /// Number of hypercube coordinates m = (M/2)^(d-1).
    pub cell_count: usize,
    /// Radius where the profile stays >= 1/2.
    pub half_level_radius: f64,
    pub c_phi: f64,
    pub k_phi: f64,
    pub gamma_tilde: f64,
    /// Hellinger budget 2^(gamma_tilde + 4) * n * amplitude^gamma_tilde * M^-(d-1).
    pub hellinger_budget: f64,
    pub hellinger_budget_exact: Option<Ratio<i128>>,
    /// Closed-form minimax floor r^(d-1) / 8^(gamma_tilde + 2) * amplitude^gamma_tilde.
    pub theoretical_lower_bound: f64,
    /// Exponent of n in the asymptotic rate target for this class.
    pub rate_exponent: f64,
    /// Certified Schwartz decay constant of the profile (Barron plans).
    pub schwartz_constant: Option<f64>,
    /// Aggregated moment-budget constant derived from it (Barron plans).
    pub c_tilde: Option<f64>,
}

/// Planner output: the derived scalars plus a ready-to-use family.
#[derive(Debug, Clone)]
pub struct Plan {
    pub params: PlannedParameters,
    pub family: PerturbedFamily,
}

fn is_small_integer(x: f64) -> Option<u32> {
    if x.fract() == 0.0 && (1.0..=24.0).contains(&x) {
        Some(x as u32)
    } else {
        None
    }
}

fn checked_pow_i128(base: i128, exp: u32) -> Option<i128> {
    let mut acc: i128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Exact Hellinger-budget value `2^(gt+extra) * n * amp^gt * M^-(d-1)` for
/// rational amplitude `amp = 1/amp_den` and integer `gt`. `None` on overflow.
fn budget_exact(
    n: u64,
    gt: u32,
    amp_den: i128,
    subdivisions: i128,
    d: usize,
    extra_power: u32,
) -> Option<Ratio<i128>> {
    let power = checked_pow_i128(2, gt + extra_power)?;
    let numerator = power.checked_mul(n as i128)?;
    let den = checked_pow_i128(amp_den, gt)?
        .checked_mul(checked_pow_i128(subdivisions, (d - 1) as u32)?)?;
    Some(Ratio::new(numerator, den))
}

/// Amplitude for a given class and refinement, as float and (when available)
/// exact rational together with its denominator.
fn amplitude_for(class: &ClassSpec, d: usize, subdivisions: usize) -> Result<(f64, Option<i128>)> {
    let m = subdivisions as f64;
    match *class {
        ClassSpec::Hoelder { alpha, .. } => {
            let amp = m.powf(-alpha) / 4.0;
            let exact = if alpha == 1.0 { Some(4 * subdivisions as i128) } else { None };
            Ok((amp, exact))
        }
        ClassSpec::Barron { capital_c, .. } => {
            let c_tilde = barron_c_tilde(d)?;
            Ok((capital_c / (2.0 * c_tilde) * m.powf(-(d as f64 + 1.0) / 2.0), None))
        }
        ClassSpec::ConvexLipschitz { .. } => {
            let den = 4 * (subdivisions * subdivisions) as i128 * (d as i128 - 1);
            Ok((1.0 / den as f64, Some(den)))
        }
    }
}

/// Float Hellinger-budget value with the extra headroom power
/// (6 for the planning constraint, 4 for the reported budget).
fn budget_float(n: u64, gt: f64, amplitude: f64, subdivisions: usize, d: usize, extra: f64) -> f64 {
    2f64.powf(gt + extra)
        * n as f64
        * amplitude.powf(gt)
        * (subdivisions as f64).powi(-(d as i32 - 1))
}

/// Plan the hard-instance family for `(class, d, n)` with the canonical
/// baseline (constant 1/2 for Hölder and Barron, the paraboloid for the
/// convex class).
pub fn plan_parameters(class: &ClassSpec, d: usize, n: u64) -> Result<Plan> {
    plan_with_baseline(class, d, n, None)
}

/// As `plan_parameters` but with an explicit baseline from the repertoire.
pub fn plan_with_baseline(
    class: &ClassSpec,
    d: usize,
    n: u64,
    baseline: Option<Baseline>,
) -> Result<Plan> {
    class.validate()?;
    if d < 2 {
        return Err(Error::Parameter("plan: d must be >= 2".into()));
    }
    if n < 1 {
        return Err(Error::Parameter("plan: n must be >= 1".into()));
    }
    let q = d - 1;
    let gamma = class.gamma();
    let alpha = class.alpha();
    let gt = class.gamma_tilde();

    // Real-valued refinement target, used to seed the integer search.
    let target = match *class {
        ClassSpec::Hoelder { .. } => {
            2f64.powf((-gt + 6.0) / (gamma + q as f64)) * (n as f64).powf(1.0 / (gamma + q as f64))
        }
        ClassSpec::Barron { capital_c, .. } => {
            let c_tilde = barron_c_tilde(d)?;
            let scale = capital_c / (2.0 * c_tilde);
            let expo = 1.0 / ((d as f64 + 1.0) * gamma / 2.0 + q as f64);
            (2f64.powf(gamma + 6.0) * scale.powf(gamma) * n as f64).powf(expo)
        }
        ClassSpec::ConvexLipschitz { .. } => {
            (2f64.powf(-gamma + 6.0) * (d as f64 - 1.0).powf(-gamma) * n as f64)
                .powf(1.0 / (q as f64 + 2.0 * gamma))
        }
    };

    // Smallest even M whose budget constraint holds; the float target only
    // seeds the search, the acceptance test is re-evaluated per candidate
    // (exactly, when the arithmetic is rational).
    let gt_int = if alpha == 1.0 { is_small_integer(gt) } else { None };
    let satisfies = |m_even: usize| -> Result<bool> {
        let (amp, amp_den) = amplitude_for(class, d, m_even)?;
        if let (Some(gti), Some(den)) = (gt_int, amp_den) {
            if let Some(v) = budget_exact(n, gti, den, m_even as i128, d, 6) {
                return Ok(v <= Ratio::from_integer(1));
            }
        }
        Ok(budget_float(n, gt, amp, m_even, d, 6.0) <= 1.0 + 1e-12)
    };
    let mut subdivisions = (((target / 2.0).floor() as i64 - 2).max(1) as usize) * 2;
    loop {
        if satisfies(subdivisions)? {
            // roll back in case the float seed overshot
            while subdivisions > 2 && satisfies(subdivisions - 2)? {
                subdivisions -= 2;
            }
            break;
        }
        subdivisions += 2;
        if subdivisions > 100_000_000 {
            return Err(Error::Planning("refinement search exceeded 1e8".into()));
        }
    }
    let partition = GridPartition::build(d, subdivisions)?;
    let cell_count = partition.cell_count();

    let (amplitude, amp_den) = amplitude_for(class, d, subdivisions)?;
    let amplitude_exact = amp_den.map(|den| Ratio::new(1, den));
    let hellinger_budget_exact = match (gt_int, amp_den) {
        (Some(gti), Some(den)) => budget_exact(n, gti, den, subdivisions as i128, d, 4),
        _ => None,
    };
    let hellinger_budget = hellinger_budget_exact
        .as_ref()
        .and_then(|r| r.to_f64())
        .unwrap_or_else(|| budget_float(n, gt, amplitude, subdivisions, d, 4.0));

    let profile = match class {
        ClassSpec::Hoelder { .. } => BumpProfile::sup_norm_bump(q, alpha)?,
        ClassSpec::Barron { .. } => BumpProfile::plateau_product(q)?,
        ClassSpec::ConvexLipschitz { .. } => BumpProfile::quadratic_cap(q)?,
    };
    let baseline = match baseline {
        Some(b) => b,
        None => match class {
            ClassSpec::ConvexLipschitz { .. } => Baseline::Paraboloid,
            _ => Baseline::Constant { value: 0.5 },
        },
    };
    if let ClassSpec::Barron { capital_c, .. } = class {
        // The baseline must leave half of the moment budget for the bumps.
        let moment = baseline.fourier_moment().ok_or_else(|| {
            Error::Parameter("Barron planning needs a baseline with a known Fourier moment".into())
        })?;
        if moment > capital_c / 2.0 {
            return Err(Error::Planning(format!(
                "baseline Fourier moment {moment:.4} exceeds half the Barron budget {capital_c}"
            )));
        }
    }

    let half_level_radius = profile.half_level_radius();
    let theoretical_lower_bound =
        half_level_radius.powi(q as i32) / 8f64.powf(gt + 2.0) * amplitude.powf(gt);
    let rate_exponent = rate_exponent_for(class, d)?;
    let (schwartz_constant, c_tilde) = match class {
        ClassSpec::Barron { .. } => (
            Some(estimate_schwartz_constant(&profile, d)?),
            Some(barron_c_tilde(d)?),
        ),
        _ => (None, None),
    };

    let c_phi = profile.c_phi();
    let k_phi = profile.k_phi();
    let family = PerturbedFamily::new(
        partition,
        profile,
        baseline,
        amplitude,
        amplitude_exact,
        alpha,
        gamma,
        class.class_tag(),
    )?;

    let params = PlannedParameters {
        class: class.clone(),
        d,
        n,
        subdivisions,
        subdivisions_target: target,
        amplitude,
        amplitude_exact,
        cell_count,
        half_level_radius,
        c_phi,
        k_phi,
        gamma_tilde: gt,
        hellinger_budget,
        hellinger_budget_exact,
        theoretical_lower_bound,
        rate_exponent,
        schwartz_constant,
        c_tilde,
    };
    Ok(Plan { params, family })
}

/// Evaluate the canonical profile of a class at a base point.
pub fn profile_eval(class: &ClassSpec, z: &[f64]) -> Result<f64> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("profile_eval: non-finite input".into()));
    }
    let profile = match class {
        ClassSpec::Hoelder { alpha, .. } => BumpProfile::sup_norm_bump(z.len(), *alpha)?,
        ClassSpec::Barron { .. } => BumpProfile::plateau_product(z.len())?,
        ClassSpec::ConvexLipschitz { .. } => BumpProfile::quadratic_cap(z.len())?,
    };
    Ok(profile.evaluate(z))
}

// ---------------------------------------------------------------------------
// Fourier machinery for the Barron class
// ---------------------------------------------------------------------------

/// Fourier transform (2-pi convention) of the plateau bump at frequency `u`,
/// by adaptive quadrature split at the plateau edge. Real by symmetry.
pub fn plateau_fourier(u: f64) -> Result<f64> {
    let f = |x: f64| plateau_bump(x) * (2.0 * std::f64::consts::PI * x * u).cos();
    let (v, _) = integrate_piecewise(f, 0.0, 0.75, &[0.5], 1e-12)?;
    Ok(2.0 * v)
}

/// Safety factor applied on top of the grid maximum when certifying the
/// Schwartz decay constant; recorded in reports.
pub const SCHWARTZ_SAFETY_FACTOR: f64 = 1.1;
const SCHWARTZ_GRID_MAX: f64 = 200.0;
const SCHWARTZ_GRID_STEP: f64 = 0.05;

fn schwartz_cache() -> &'static Mutex<HashMap<usize, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Grid maximum of `prod_i |t(u_i)| * (1 + ||u||_2)^(d+1)` over the
/// non-negative frequency grid, given the tabulated 1-D transform moduli.
pub fn schwartz_grid_max(one_d: &[f64], d: usize, step: f64) -> Result<f64> {
    let decay = d as f64 + 1.0;
    match d - 1 {
        1 => {
            let mut sup: f64 = 0.0;
            for (i, t) in one_d.iter().enumerate() {
                let u = i as f64 * step;
                sup = sup.max(t * (1.0 + u).powf(decay));
            }
            Ok(sup)
        }
        2 => {
            let mut sup: f64 = 0.0;
            for (i, ti) in one_d.iter().enumerate() {
                let ui = i as f64 * step;
                // symmetric in the two axes: scan j >= i
                for (j, tj) in one_d.iter().enumerate().skip(i) {
                    let uj = j as f64 * step;
                    let norm = (ui * ui + uj * uj).sqrt();
                    sup = sup.max(ti * tj * (1.0 + norm).powf(decay));
                }
            }
            Ok(sup)
        }
        q => Err(Error::Parameter(format!(
            "Schwartz grid maximization supports base dimension 1 or 2, got {q}"
        ))),
    }
}

/// Upper bound on sup |F[phi](u)| * (1 + ||u||_2)^(d+1) for the plateau
/// product profile, by dense grid maximization of the product of 1-D
/// transforms, inflated by `SCHWARTZ_SAFETY_FACTOR`.
pub fn estimate_schwartz_constant(profile: &BumpProfile, d: usize) -> Result<f64> {
    if profile.kind() != crate::construction::ProfileKind::PlateauProduct {
        return Err(Error::Parameter(
            "Schwartz constant estimation applies to the smooth plateau product profile".into(),
        ));
    }
    if profile.dim() != d - 1 {
        return Err(Error::Parameter("estimate_schwartz_constant: dimension mismatch".into()));
    }
    if let Some(&v) = schwartz_cache().lock().unwrap().get(&d) {
        return Ok(v);
    }
    let steps = (SCHWARTZ_GRID_MAX / SCHWARTZ_GRID_STEP) as usize;
    let mut one_d = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        one_d.push(plateau_fourier(i as f64 * SCHWARTZ_GRID_STEP)?.abs());
    }
    let value = schwartz_grid_max(&one_d, d, SCHWARTZ_GRID_STEP)? * SCHWARTZ_SAFETY_FACTOR;
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::Numeric("Schwartz constant estimate degenerate".into()));
    }
    schwartz_cache().lock().unwrap().insert(d, value);
    Ok(value)
}

/// Aggregated constant 2^((d+5)/2) * pi * C_d * (d-1) * (1 + 3^(d-1)(d-1)pi^2/6)
/// that converts the Schwartz bound into a Fourier-moment budget.
pub fn barron_c_tilde(d: usize) -> Result<f64> {
    let profile = BumpProfile::plateau_product(d - 1)?;
    let c_d = estimate_schwartz_constant(&profile, d)?;
    let q = d as f64 - 1.0;
    let pi = std::f64::consts::PI;
    Ok(2f64.powf((d as f64 + 5.0) / 2.0) * pi * c_d * q * (1.0 + 3f64.powf(q) * q * pi * pi / 6.0))
}

// ---------------------------------------------------------------------------
// Rate targets
// ---------------------------------------------------------------------------

/// A lower-bound rate `constant * n^exponent`.
#[derive(Debug, Clone, Copy)]
pub struct RateBound {
    pub exponent: f64,
    pub constant: f64,
}

impl RateBound {
    pub fn value(&self, n: u64) -> f64 {
        self.constant * (n as f64).powf(self.exponent)
    }
}

/// Exponent of n in the asymptotic rate target; well-defined for every d >= 2.
pub fn rate_exponent_for(class: &ClassSpec, d: usize) -> Result<f64> {
    class.validate()?;
    if d < 2 {
        return Err(Error::Parameter("rate_exponent: d must be >= 2".into()));
    }
    let q = d as f64 - 1.0;
    let gamma = class.gamma();
    Ok(match class {
        ClassSpec::Hoelder { .. } => -gamma / (gamma + q),
        ClassSpec::Barron { .. } => -gamma / (gamma + 2.0 * q / (d as f64 + 1.0)),
        ClassSpec::ConvexLipschitz { .. } => -2.0 * gamma / (q + 2.0 * gamma),
    })
}

/// Closed-form rate target of each class.
pub fn theoretical_rate(class: &ClassSpec, d: usize) -> Result<RateBound> {
    class.validate()?;
    if d < 2 {
        return Err(Error::Parameter("theoretical_rate: d must be >= 2".into()));
    }
    let q = d as f64 - 1.0;
    let gamma = class.gamma();
    match *class {
        ClassSpec::Hoelder { alpha, .. } => {
            let gt = gamma / alpha;
            Ok(RateBound {
                exponent: rate_exponent_for(class, d)?,
                constant: 2f64.powf(-(5.0 * q / alpha + 13.0 * gt + 6.0)),
            })
        }
        ClassSpec::Barron { capital_c, .. } => {
            let c_tilde = barron_c_tilde(d)?;
            let a = capital_c / (2.0 * c_tilde);
            let half_dp1_gamma = (d as f64 + 1.0) * gamma / 2.0;
            let c_star = (capital_c / c_tilde).powf(-gamma / (half_dp1_gamma + q)) + 0.5;
            let exponent_frac = half_dp1_gamma / (half_dp1_gamma + q);
            let constant = 4f64.powf(-q) / 8f64.powf(gamma + 2.0)
                * a.powf(gamma)
                * (2.0 * c_star).powf(-half_dp1_gamma)
                * (2f64.powf(gamma + 6.0) * a.powf(gamma)).powf(-exponent_frac);
            Ok(RateBound { exponent: rate_exponent_for(class, d)?, constant })
        }
        ClassSpec::ConvexLipschitz { .. } => {
            let c_phi = 4.0 * q.sqrt();
            let r = (2.0 * c_phi).recip().min(1.0);
            let c_star = (2.0 * q).powf(gamma / (q + 2.0 * gamma)) + 0.5;
            let constant = r.powf(q) * q.powf(-gamma) / 2f64.powf(5.0 * gamma + 6.0)
                * (2.0 * c_star).powf(-2.0 * gamma)
                * (2f64.powf(-gamma + 6.0) * q.powf(-gamma)).powf(-2.0 * gamma / (q + 2.0 * gamma));
            Ok(RateBound { exponent: rate_exponent_for(class, d)?, constant })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_plan_hand_values() {
        let spec = ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 };
        let plan = plan_parameters(&spec, 2, 4).unwrap();
        let p = &plan.params;
        assert_eq!(p.subdivisions, 12);
        assert_eq!(p.cell_count, 6);
        assert_eq!(p.amplitude_exact.unwrap(), Ratio::new(1, 48));
        assert_eq!(p.hellinger_budget_exact.unwrap(), Ratio::new(2, 9));
        assert!((p.subdivisions_target - 2f64.powf(2.5) * 2.0).abs() < 1e-12);
        assert!(p.hellinger_budget <= 0.25);
    }

    #[test]
    fn convex_plan_hand_values() {
        let spec = ClassSpec::ConvexLipschitz { gamma: 1.0 };
        let plan = plan_parameters(&spec, 2, 8).unwrap();
        let p = &plan.params;
        assert_eq!(p.subdivisions, 8);
        assert_eq!(p.amplitude_exact.unwrap(), Ratio::new(1, 256));
        assert!((p.half_level_radius - 0.125).abs() < 1e-15);
        assert!((p.subdivisions_target - 256f64.powf(1.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn exemplar_baselines_plan_and_validate() {
        use crate::construction::validate_construction;
        // cusp baseline for a rough Hölder family
        let spec = ClassSpec::Hoelder { alpha: 0.4, gamma: 1.0 };
        let cusp = Baseline::PowerCusp { offset: 0.38, scale: 0.3, exponent: 0.4 };
        let plan = plan_with_baseline(&spec, 2, 64, Some(cusp)).unwrap();
        let report = validate_construction(&plan.family, 512, 2).unwrap();
        assert!(report.all_pass(), "{}", report.render());

        // oscillatory Barron baseline; its moment needs half the budget
        let moment = Baseline::Sinusoid.fourier_moment().unwrap();
        assert!((moment - 0.15 * std::f64::consts::PI * 20.6).abs() < 1e-12);
        let spec = ClassSpec::Barron { capital_c: 2.5 * moment, gamma: 1.0 };
        let plan = plan_with_baseline(&spec, 2, 16, Some(Baseline::Sinusoid)).unwrap();
        let report = validate_construction(&plan.family, 512, 2).unwrap();
        assert!(report.all_pass(), "{}", report.render());
        // an undersized budget is rejected at planning time
        let tight = ClassSpec::Barron { capital_c: 1.5 * moment, gamma: 1.0 };
        assert!(matches!(
            plan_with_baseline(&tight, 2, 16, Some(Baseline::Sinusoid)),
            Err(Error::Planning(_))
        ));
    }

    #[test]
    fn plan_rejects_gamma_below_alpha() {
        let spec = ClassSpec::Hoelder { alpha: 0.9, gamma: 0.5 };
        assert!(matches!(plan_parameters(&spec, 2, 16), Err(Error::Parameter(_))));
    }

    #[test]
    fn refinement_is_monotone_in_n() {
        let spec = ClassSpec::Hoelder { alpha: 0.5, gamma: 1.0 };
        let mut last = 0usize;
        for n in [1u64, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024] {
            let plan = plan_parameters(&spec, 2, n).unwrap();
            assert!(plan.params.subdivisions >= last);
            last = plan.params.subdivisions;
        }
    }

    #[test]
    fn budget_constraint_holds_with_headroom() {
        for spec in [
            ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 },
            ClassSpec::Hoelder { alpha: 0.5, gamma: 1.0 },
            ClassSpec::ConvexLipschitz { gamma: 2.0 },
        ] {
            for n in [4u64, 64, 1024] {
                let p = plan_parameters(&spec, 2, n).unwrap().params;
                assert!(
                    p.hellinger_budget <= 0.25 + 1e-12,
                    "budget {} for {spec:?} n={n}",
                    p.hellinger_budget
                );
            }
        }
    }

    #[test]
    fn profile_eval_examples() {
        let convex = ClassSpec::ConvexLipschitz { gamma: 1.0 };
        assert_eq!(profile_eval(&convex, &[0.0]).unwrap(), 1.0);
        assert_eq!(profile_eval(&convex, &[0.5]).unwrap(), 0.0);
        let holder = ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 };
        let v = profile_eval(&holder, &[0.25]).unwrap();
        assert!((v - (-1f64 / 3.0).exp()).abs() < 1e-12, "psi(0.5) = {v}");
    }

    #[test]
    fn holder_rate_hand_values() {
        let spec = ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 };
        let rate = theoretical_rate(&spec, 2).unwrap();
        assert!((rate.exponent + 0.5).abs() < 1e-15);
        assert!((rate.constant - 2f64.powi(-24)).abs() < 1e-30);
    }

    #[test]
    fn convex_rate_exponent() {
        let spec = ClassSpec::ConvexLipschitz { gamma: 1.0 };
        let rate = theoretical_rate(&spec, 2).unwrap();
        assert!((rate.exponent + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn barron_exponent_limits_to_gamma_over_gamma_plus_two() {
        let gamma = 1.5;
        let spec = ClassSpec::Barron { capital_c: 1.0, gamma };
        let e = rate_exponent_for(&spec, 1000).unwrap();
        assert!((e + gamma / (gamma + 2.0)).abs() < 1e-2, "exponent {e}");
        // the exponent climbs toward the limit as d grows
        assert!(rate_exponent_for(&spec, 2).unwrap() < e);
    }

    #[test]
    fn schwartz_grid_max_of_zero_transform_is_zero() {
        // an identically-zero 1-D transform certifies a zero decay constant
        let zeros = vec![0.0; 1000];
        assert_eq!(schwartz_grid_max(&zeros, 2, 0.05).unwrap(), 0.0);
        assert_eq!(schwartz_grid_max(&zeros, 3, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn schwartz_estimate_requires_smooth_profile() {
        // the quadratic cap is not smooth, so no certified decay bound
        let cap = BumpProfile::quadratic_cap(1).unwrap();
        assert!(matches!(estimate_schwartz_constant(&cap, 2), Err(Error::Parameter(_))));
    }

    #[test]
    fn schwartz_tail_spot_check() {
        // |F[phi](u)| (1 + |u|)^(d+1) at u = 100 stays below the certified bound
        let profile = BumpProfile::plateau_product(1).unwrap();
        let c_d = estimate_schwartz_constant(&profile, 2).unwrap();
        assert!(c_d > 0.0);
        let t = plateau_fourier(100.0).unwrap().abs();
        assert!(t * (1.0 + 100.0f64).powi(3) <= c_d, "tail {} vs {c_d}", t * 101f64.powi(3));
    }

    #[test]
    fn barron_plan_records_its_constants() {
        let spec = ClassSpec::Barron { capital_c: 1.0, gamma: 1.0 };
        let p = plan_parameters(&spec, 2, 16).unwrap().params;
        assert!(p.schwartz_constant.unwrap() > 0.0);
        assert!(p.c_tilde.unwrap() > p.schwartz_constant.unwrap());
        let h = plan_parameters(&ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 }, 2, 16).unwrap();
        assert!(h.params.schwartz_constant.is_none());
    }

    #[test]
    fn half_level_radius_certificate_on_probes() {
        // phi >= 1/2 on the sup-norm ball of the half-level radius
        for profile in [
            BumpProfile::sup_norm_bump(1, 1.0).unwrap(),
            BumpProfile::sup_norm_bump(2, 0.5).unwrap(),
            BumpProfile::plateau_product(1).unwrap(),
            BumpProfile::quadratic_cap(1).unwrap(),
            BumpProfile::quadratic_cap(2).unwrap(),
        ] {
            let r = profile.half_level_radius();
            assert!(r > 0.0 && r <= 1.0);
            for u01 in crate::numerics::kronecker_sequence(profile.dim(), 400) {
                let u: Vec<f64> = u01.iter().map(|&x| r * (2.0 * x - 1.0)).collect();
                let v = profile.evaluate(&u);
                assert!(v >= 0.5 - 1e-12, "phi({u:?}) = {v} below 1/2 inside radius {r}");
            }
        }
    }

    #[test]
    fn plan_lower_bound_dominates_rate_target() {
        // The per-plan closed form keeps all the slack the rate-target constants
        // give away, so it must dominate constant * n^exponent.
        for spec in [
            ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 },
            ClassSpec::Barron { capital_c: 1.0, gamma: 1.0 },
            ClassSpec::ConvexLipschitz { gamma: 1.0 },
        ] {
            for n in [4u64, 16, 64, 256, 1024] {
                let plan = plan_parameters(&spec, 2, n).unwrap();
                let rate = theoretical_rate(&spec, 2).unwrap();
                assert!(
                    plan.params.theoretical_lower_bound >= rate.value(n),
                    "{spec:?} n={n}: {} < {}",
                    plan.params.theoretical_lower_bound,
                    rate.value(n)
                );
            }
        }
    }
}
