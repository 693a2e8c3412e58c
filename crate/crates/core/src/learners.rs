//! Baseline learners and their risk against hard instances.
//!
//! Each learner is one algorithm mapping a labelled sample to a predictor on
//! the cube. The roster deliberately spans naive (constant), generic
//! (histogram plug-in, nearest neighbours) and construction-aware (the tube
//! oracle, which reads the family descriptor and estimates the hypercube
//! vertex directly). The empirical minimax table takes the worst case over
//! an enumerated or sampled set of vertices.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::construction::{PerturbedFamily, ThetaVector};
use crate::densities::{HardInstance, LabeledSample};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::numerics::{mean_se, substream_seed};

/// Learner roster entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LearnerSpec {
    /// Majority label per cell of a regular grid; empty cells predict 0.
    HistogramPlugin { cells_per_axis: usize },
    /// Majority label of the k nearest sample points; ties predict 0.
    KNearest { k: usize },
    /// Construction-aware: flags a coordinate when some sample point inside
    /// the bump support is labelled inconsistently with the baseline-only
    /// boundary. Exists to show near-attainment of the rate, not as a fair
    /// learner.
    TubeAwareOracle,
    /// Predicts 0 everywhere.
    ConstantZero,
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::HistogramPlugin { cells_per_axis: 0 } => {
                Err(Error::Parameter("histogram: cells_per_axis must be positive".into()))
            }
            LearnerSpec::KNearest { k: 0 } => {
                Err(Error::Parameter("knn: k must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Short name used in file names and table rows.
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::HistogramPlugin { cells_per_axis } => format!("hist{cells_per_axis}"),
            LearnerSpec::KNearest { k } => format!("knn{k}"),
            LearnerSpec::TubeAwareOracle => "oracle".into(),
            LearnerSpec::ConstantZero => "zero".into(),
        }
    }

    /// Parse a CLI spec: `histogram:<cells>`, `knn:<k>`, `oracle`, `zero`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let spec = match parts.as_slice() {
            ["histogram", c] => LearnerSpec::HistogramPlugin {
                cells_per_axis: c
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad histogram cell count {c:?}")))?,
            },
            ["knn", k] => LearnerSpec::KNearest {
                k: k.parse().map_err(|_| Error::Parse(format!("bad k {k:?}")))?,
            },
            ["oracle"] => LearnerSpec::TubeAwareOracle,
            ["zero"] => LearnerSpec::ConstantZero,
            _ => return Err(Error::Parse(format!("unknown learner spec {s:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A fitted predictor; callable from many threads.
pub struct Predictor {
    f: Box<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl Predictor {
    pub fn new<F: Fn(&Point) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Predictor { f: Box::new(f) }
    }

    #[inline]
    pub fn predict(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

/// Fit a learner to a sample. The family descriptor is available to
/// construction-aware learners only.
pub fn fit(spec: &LearnerSpec, sample: &LabeledSample, family: &Arc<PerturbedFamily>) -> Result<Predictor> {
    spec.validate()?;
    if sample.is_empty() && !matches!(spec, LearnerSpec::ConstantZero) {
        return Err(Error::Parameter("fit: empty sample".into()));
    }
    match *spec {
        LearnerSpec::ConstantZero => Ok(Predictor::new(|_| 0.0)),
        LearnerSpec::HistogramPlugin { cells_per_axis } => {
            let d = family.dimension();
            let total_cells = cells_per_axis
                .checked_pow(d as u32)
                .filter(|&c| c <= 1 << 26)
                .ok_or_else(|| Error::Parameter("histogram: too many cells".into()))?;
            let mut ones = vec![0u32; total_cells];
            let mut counts = vec![0u32; total_cells];
            let cell_of = move |x: &Point| -> usize {
                let mut idx = 0usize;
                for &c in x.coords() {
                    let k = ((c * cells_per_axis as f64) as usize).min(cells_per_axis - 1);
                    idx = idx * cells_per_axis + k;
                }
                idx
            };
            for (p, &y) in sample.points.iter().zip(&sample.labels) {
                let c = cell_of(p);
                counts[c] += 1;
                ones[c] += u32::from(y == 1);
            }
            // strict majority votes 1; empty cells and ties predict 0
            let labels: Vec<u8> =
                ones.iter().zip(&counts).map(|(&o, &c)| u8::from(2 * o > c)).collect();
            Ok(Predictor::new(move |x| labels[cell_of(x)] as f64))
        }
        LearnerSpec::KNearest { k } => {
            let pts: Vec<(SmallVec<[f64; 4]>, u8)> = sample
                .points
                .iter()
                .zip(&sample.labels)
                .map(|(p, &y)| (SmallVec::from_slice(p.coords()), y))
                .collect();
            let k_eff = k.min(pts.len());
            Ok(Predictor::new(move |x| {
                // running top-k by insertion; k is small
                let mut best: SmallVec<[(f64, u8); 16]> = SmallVec::new();
                for (q, y) in &pts {
                    let dist: f64 = q
                        .iter()
                        .zip(x.coords())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if best.len() < k_eff {
                        best.push((dist, *y));
                        best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    } else if dist < best[k_eff - 1].0 {
                        best[k_eff - 1] = (dist, *y);
                        best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    }
                }
                let votes: usize = best.iter().filter(|(_, y)| *y == 1).count();
                f64::from(2 * votes > k_eff)
            }))
        }
        LearnerSpec::TubeAwareOracle => {
            let m = family.partition().cell_count();
            let mut bits = vec![0u8; m];
            for (p, &y) in sample.points.iter().zip(&sample.labels) {
                let z = p.base();
                let j = family.partition().owner_cell(z);
                if !family.support_contains(j, z)? {
                    continue;
                }
                let baseline_label = u8::from(family.baseline().evaluate(z) <= p.height());
                if y != baseline_label {
                    bits[j] = 1;
                }
            }
            let theta_hat = ThetaVector::from_bits(&bits)?;
            let fam = family.clone();
            Ok(Predictor::new(move |x| {
                f64::from(fam.b_theta_unchecked(&theta_hat, x.base()) <= x.height())
            }))
        }
    }
}

/// Monte Carlo estimate of the squared L2(mu) distance between a predictor
/// and the instance boundary, on fresh draws.
pub fn risk(
    predictor: &Predictor,
    instance: &HardInstance,
    draws: u64,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if draws < 100 {
        return Err(Error::Parameter("risk: need at least 100 draws".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let x = instance.sample_point(rng)?;
        let e = predictor.predict(&x) - instance.classify(&x)? as f64;
        let v = e * e;
        if !v.is_finite() {
            return Err(Error::Numeric("risk: non-finite predictor value".into()));
        }
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// How the worst case over the hypercube is explored.
#[derive(Debug, Clone)]
pub enum ThetaPolicy {
    /// Full enumeration when 2^m fits the cap, otherwise the two extreme
    /// vertices plus a seeded random subset of the stated size.
    Auto { subset: usize },
    /// Force full enumeration (errors beyond the cap).
    FullEnumeration,
    /// The two extreme vertices plus a seeded random subset.
    RandomSubset { count: usize },
    /// Exactly these vertices.
    Explicit(Vec<ThetaVector>),
}

/// Full enumeration is allowed up to 2^m = 4096 vertices.
pub const FULL_ENUMERATION_CAP: usize = 4096;

fn theta_set(policy: &ThetaPolicy, m: usize, master_seed: u64) -> Result<Vec<ThetaVector>> {
    let enumerate_all = |m: usize| -> Vec<ThetaVector> {
        (0..1usize << m)
            .map(|i| {
                let bits: Vec<u8> = (0..m).map(|j| ((i >> j) & 1) as u8).collect();
                ThetaVector::from_bits(&bits).expect("bits are 0/1")
            })
            .collect()
    };
    let subset_with_extremes = |count: usize| -> Vec<ThetaVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(master_seed, &[0x7435]));
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(count + 2);
        for t in [ThetaVector::zeros(m), ThetaVector::ones(m)] {
            seen.insert(t.bits().to_vec());
            out.push(t);
        }
        let mut attempts = 0usize;
        while out.len() < count + 2 && attempts < 64 * (count + 2) {
            attempts += 1;
            let t = ThetaVector::random(m, &mut rng);
            if seen.insert(t.bits().to_vec()) {
                out.push(t);
            }
        }
        out
    };
    match policy {
        ThetaPolicy::Auto { subset } => {
            if m <= FULL_ENUMERATION_CAP.trailing_zeros() as usize {
                Ok(enumerate_all(m))
            } else {
                Ok(subset_with_extremes(*subset))
            }
        }
        ThetaPolicy::FullEnumeration => {
            if m > FULL_ENUMERATION_CAP.trailing_zeros() as usize {
                return Err(Error::Planning(format!(
                    "full enumeration of 2^{m} vertices exceeds the cap of {FULL_ENUMERATION_CAP}; \
                     plan a smaller m or use a random subset"
                )));
            }
            Ok(enumerate_all(m))
        }
        ThetaPolicy::RandomSubset { count } => Ok(subset_with_extremes(*count)),
        ThetaPolicy::Explicit(list) => {
            if list.is_empty() || list.iter().any(|t| t.len() != m) {
                return Err(Error::Parameter("theta policy: empty or wrong-length list".into()));
            }
            Ok(list.clone())
        }
    }
}

/// One row of the worst-case risk table.
#[derive(Debug, Clone)]
pub struct RiskRow {
    pub theta_index: usize,
    pub theta: ThetaVector,
    pub mean_risk: f64,
    pub se: f64,
    pub replicate_risks: Vec<f64>,
}

/// Per-vertex risks of one learner at one sample size, with the worst case.
#[derive(Debug, Clone)]
pub struct MinimaxTable {
    pub learner: String,
    pub n: u64,
    pub replicates: usize,
    pub rows: Vec<RiskRow>,
    pub max_risk: f64,
    pub max_se: f64,
    pub max_index: usize,
    pub seed: u64,
}

impl MinimaxTable {
    /// Delimited text: `learner,theta_index,n,replicates,mean_risk,se`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "learner,theta_index,n,replicates,mean_risk,se")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e}",
                self.learner, row.theta_index, self.n, self.replicates, row.mean_risk, row.se
            )?;
        }
        Ok(())
    }
}

// substream tags
const TAG_TRAIN: u64 = 0x5452;
const TAG_RISK: u64 = 0x524b;

/// Worst-case risk of a learner over the hypercube: for each explored
/// vertex, `replicates` independent fit/evaluate rounds, averaged; then the
/// maximum over vertices. Work is parallel over vertices with pre-assigned
/// seed substreams, so results do not depend on the worker count.
#[allow(clippy::too_many_arguments)]
pub fn empirical_minimax(
    family: &Arc<PerturbedFamily>,
    spec: &LearnerSpec,
    n: u64,
    replicates: usize,
    policy: &ThetaPolicy,
    risk_draws: u64,
    master_seed: u64,
) -> Result<MinimaxTable> {
    spec.validate()?;
    if replicates == 0 {
        return Err(Error::Parameter("empirical_minimax: replicates must be positive".into()));
    }
    let m = family.partition().cell_count();
    let thetas = theta_set(policy, m, master_seed)?;

    let rows: Result<Vec<RiskRow>> = thetas
        .into_par_iter()
        .enumerate()
        .map(|(theta_index, theta)| {
            let instance = HardInstance::new(family.clone(), theta.clone())?;
            let mut replicate_risks = Vec::with_capacity(replicates);
            for rep in 0..replicates {
                let train_seed =
                    substream_seed(master_seed, &[TAG_TRAIN, n, theta_index as u64, rep as u64]);
                let sample = instance.sample_labeled(n as usize, train_seed)?;
                let predictor = fit(spec, &sample, family)?;
                let mut risk_rng = ChaCha8Rng::seed_from_u64(substream_seed(
                    master_seed,
                    &[TAG_RISK, n, theta_index as u64, rep as u64],
                ));
                let (r, _) = risk(&predictor, &instance, risk_draws, &mut risk_rng)?;
                replicate_risks.push(r);
            }
            let (mean_risk, se) = mean_se(&replicate_risks);
            Ok(RiskRow { theta_index, theta, mean_risk, se, replicate_risks })
        })
        .collect();
    let rows = rows?;

    let mut max_risk = f64::NEG_INFINITY;
    let mut max_se = 0.0;
    let mut max_index = 0;
    for row in &rows {
        if row.mean_risk > max_risk {
            max_risk = row.mean_risk;
            max_se = row.se;
            max_index = row.theta_index;
        }
    }
    Ok(MinimaxTable {
        learner: spec.name(),
        n,
        replicates,
        rows,
        max_risk,
        max_se,
        max_index,
        seed: master_seed,
    })
}
