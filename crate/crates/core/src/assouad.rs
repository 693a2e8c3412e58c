//! The hypercube reduction made executable: per-cell witness regions on
//! which every family member is constant with label `1 - theta_j`, the
//! projection of an arbitrary predictor onto the hypercube, and the
//! closed-form testing bound that turns per-coordinate Hellinger budgets
//! into a minimax floor.

use rayon::prelude::*;

use crate::classes::PlannedParameters;
use crate::construction::{PerturbedFamily, ThetaVector};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::numerics::integrate_box;

/// Witness region attached to cell `j`: base points within sup-norm radius
/// `r / M` of the cell centre, heights in the band
/// `[b_0 + amp * phi_j / 2, b_0 + 3 * amp * phi_j / 4]`.
#[derive(Debug, Clone)]
pub struct ERegion {
    pub index: usize,
    pub center: Vec<f64>,
    /// Base radius r / M in the sup-norm.
    pub base_radius: f64,
    /// Lebesgue measure of the region (quadrature value).
    pub measure: f64,
    /// Certified floor (1/8) (2r)^(d-1) * amplitude * M^-(d-1).
    pub measure_floor: f64,
}

/// Build the witness regions of a family. All regions share one measure by
/// translation symmetry; the quadrature value must clear the analytic floor
/// or the construction is broken.
pub fn build_e_regions(family: &PerturbedFamily) -> Result<Vec<ERegion>> {
    let q = family.dimension() - 1;
    let subdivisions = family.partition().subdivisions() as f64;
    let r = family.profile().half_level_radius();
    let amp = family.amplitude();

    // measure = (amp / 4) * M^-(d-1) * Int_{|u|_inf <= r} phi(u) du
    let profile = family.profile().clone();
    let lo = vec![-r; q];
    let hi = vec![r; q];
    let (bump_integral, quad_err) = integrate_box(&|u: &[f64]| profile.evaluate(u), &lo, &hi, 1e-12)?;
    let measure = amp / 4.0 * subdivisions.powi(-(q as i32)) * bump_integral;
    let floor = 0.125 * (2.0 * r).powi(q as i32) * amp * subdivisions.powi(-(q as i32));
    if measure < floor - quad_err - 1e-15 {
        return Err(Error::Internal(format!(
            "witness region measure {measure:.6e} undercuts its floor {floor:.6e}"
        )));
    }

    (0..family.partition().cell_count())
        .map(|j| {
            Ok(ERegion {
                index: j,
                center: family.partition().center(j)?,
                base_radius: r / subdivisions,
                measure,
                measure_floor: floor,
            })
        })
        .collect()
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL8_X: [f64; 8] = [
    -0.9602898564975362,
    -0.7966664774136267,
    -0.525532409916329,
    -0.1834346424956498,
    0.1834346424956498,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975362,
];
const GL8_W: [f64; 8] = [
    0.10122853629037626,
    0.22238103445337448,
    0.3137066458778873,
    0.362683783378362,
    0.362683783378362,
    0.3137066458778873,
    0.22238103445337448,
    0.10122853629037626,
];

/// L2 distances of a black-box predictor to the two constant labels over one
/// witness region, by product Gauss quadrature (the height band has
/// closed-form endpoints, the predictor is sampled pointwise).
fn label_distances<F>(
    predictor: &F,
    family: &PerturbedFamily,
    region: &ERegion,
    subdivisions_per_axis: usize,
) -> Result<(f64, f64)>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let q = family.dimension() - 1;
    let amp = family.amplitude();
    let splits = subdivisions_per_axis.max(1);

    // tensor nodes over the base window, sub-divided for resolution
    let mut base_nodes: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for axis in 0..q {
        let lo = region.center[axis] - region.base_radius;
        let hi = region.center[axis] + region.base_radius;
        let h = (hi - lo) / splits as f64;
        let mut next = Vec::with_capacity(base_nodes.len() * splits * GL8_X.len());
        for (prefix, weight) in &base_nodes {
            for s in 0..splits {
                let (a, b) = (lo + s as f64 * h, lo + (s + 1) as f64 * h);
                for (x, w) in GL8_X.iter().zip(GL8_W.iter()) {
                    let mut p = prefix.clone();
                    p.push(0.5 * (a + b) + 0.5 * (b - a) * x);
                    next.push((p, weight * w * 0.5 * (b - a)));
                }
            }
        }
        base_nodes = next;
    }

    let mut dist_to_one = 0.0;
    let mut dist_to_zero = 0.0;
    for (z, weight) in &base_nodes {
        let phi = family.local_bump(region.index, z)?;
        if phi <= 0.0 {
            continue;
        }
        let b0 = family.baseline().evaluate(z);
        let (lo_h, hi_h) = (b0 + amp * phi / 2.0, b0 + 3.0 * amp * phi / 4.0);
        for (x, w) in GL8_X.iter().zip(GL8_W.iter()) {
            let h = 0.5 * (lo_h + hi_h) + 0.5 * (hi_h - lo_h) * x;
            let v = predictor(&Point::from_parts(z, h));
            if !v.is_finite() {
                return Err(Error::Numeric("project_estimator: non-finite predictor value".into()));
            }
            let ww = weight * w * 0.5 * (hi_h - lo_h);
            dist_to_one += ww * (v - 1.0) * (v - 1.0);
            dist_to_zero += ww * v * v;
        }
    }
    Ok((dist_to_one, dist_to_zero))
}

/// Project a predictor onto the hypercube: coordinate `j` becomes 0 when the
/// predictor is at least as close (in L2 over the witness region) to the
/// label 1 as to the label 0, and 1 otherwise. Ties resolve to 0.
pub fn project_estimator<F>(
    predictor: &F,
    family: &PerturbedFamily,
    regions: &[ERegion],
    quadrature_splits: usize,
) -> Result<ThetaVector>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let bits: Result<Vec<u8>> = regions
        .par_iter()
        .map(|region| {
            let (d_one, d_zero) = label_distances(predictor, family, region, quadrature_splits)?;
            Ok(u8::from(d_one > d_zero))
        })
        .collect();
    ThetaVector::from_bits(&bits?)
}

/// Hypercube testing bound `(m/2) (1 - sqrt(budget (1 - budget/4)))` for a
/// per-coordinate squared Hellinger budget below 2.
pub fn assouad_bound(m: usize, budget: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&budget) {
        return Err(Error::Parameter(format!(
            "assouad_bound: budget must lie in [0, 2), got {budget}"
        )));
    }
    Ok(m as f64 / 2.0 * (1.0 - (budget * (1.0 - budget / 4.0)).sqrt()))
}

/// The planned minimax floor r^(d-1) / 8^(gamma_tilde + 2) * amp^gamma_tilde.
/// Requires the plan to satisfy its Hellinger-budget constraint.
pub fn minimax_lower_bound(plan: &PlannedParameters) -> Result<f64> {
    if plan.hellinger_budget > 0.25 + 1e-12 {
        return Err(Error::Parameter(format!(
            "minimax_lower_bound: plan budget {} exceeds 1/4",
            plan.hellinger_budget
        )));
    }
    let q = plan.d as i32 - 1;
    Ok(plan.half_level_radius.powi(q) / 8f64.powf(plan.gamma_tilde + 2.0)
        * plan.amplitude.powf(plan.gamma_tilde))
}
