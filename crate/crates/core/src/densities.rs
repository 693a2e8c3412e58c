//! The hard-instance marginal: a tube of power-law mass around the perturbed
//! boundary, a flat shoulder above it, and a constant plateau outside, tuned
//! so that every member is a probability density satisfying the margin
//! condition.
//!
//! Sampling is exact and composite: the band around the boundary has closed
//! per-column masses, the outside is uniform over a region of constant
//! column length, and the tube offset follows an inverse-CDF power law.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::construction::{PerturbedFamily, ThetaVector};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::numerics::{integrate_box, pow_gamma_minus_one};

/// Which part of the domain a point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    /// Within vertical reach `amplitude + theta.bumps` of the perturbed boundary.
    Tube,
    /// The remaining band up to `b_0 + 3 * amplitude`.
    Shoulder,
    /// Everything else; the density is the constant normalizer there.
    Outside,
}

const REJECTION_CAP: u32 = 10_000;

/// One classifier/distribution pair `(h_theta, mu_theta)`; immutable, cheap
/// to clone, safe to sample from many workers with independent streams.
#[derive(Debug, Clone)]
pub struct HardInstance {
    family: Arc<PerturbedFamily>,
    theta: ThetaVector,
    eta: (f64, f64),
    normalizer: f64,
    region_mass: f64,
    outside_mass: f64,
    active_cells: Vec<usize>,
    inactive_cells: Vec<usize>,
    active_cell_mass: f64,
    inactive_cell_mass: f64,
    /// Envelope of the column mass over an active cell, for rejection.
    active_envelope: f64,
}

impl HardInstance {
    pub fn new(family: Arc<PerturbedFamily>, theta: ThetaVector) -> Result<Self> {
        Self::with_eta(family, theta, (0.5, 0.5))
    }

    /// `eta` weights the label side of the reference measure; it must be a
    /// strictly positive probability vector. Labels are deterministic given
    /// the input, so it never affects sampling.
    pub fn with_eta(
        family: Arc<PerturbedFamily>,
        theta: ThetaVector,
        eta: (f64, f64),
    ) -> Result<Self> {
        let m = family.partition().cell_count();
        if theta.len() != m {
            return Err(Error::Parameter(format!(
                "instance: theta has {} bits for {m} cells",
                theta.len()
            )));
        }
        if !(eta.0 > 0.0 && eta.1 > 0.0 && (eta.0 + eta.1 - 1.0).abs() < 1e-12) {
            return Err(Error::Parameter("instance: eta must be positive and sum to 1".into()));
        }
        let gt = family.gamma_tilde();
        let amp = family.amplitude();
        let d = family.dimension();
        let q = d - 1;
        let cell_volume = (2.0 / family.partition().subdivisions() as f64).powi(q as i32);

        // Column mass of the band at base point z is
        //   a(z)^gt / gt + (amp - bumps(z))^gt  with a(z) = amp + bumps(z);
        // on cells without an active bump this is amp^gt * (1/gt + 1).
        let inactive_cell_mass = amp.powf(gt) * (1.0 / gt + 1.0) * cell_volume;
        let active_cells: Vec<usize> = (0..m).filter(|&j| theta.get(j) == 1).collect();
        let inactive_cells: Vec<usize> = (0..m).filter(|&j| theta.get(j) == 0).collect();

        let active_cell_mass = if active_cells.is_empty() {
            0.0
        } else {
            // One quadrature serves every active cell by translation symmetry.
            let profile = family.profile().clone();
            let integrand = move |u: &[f64]| {
                let phi = profile.evaluate(u);
                (1.0 + phi).powf(gt) / gt + (1.0 - phi).powf(gt)
            };
            let lo = vec![-1.0; q];
            let hi = vec![1.0; q];
            let (unit, _) = integrate_box(&integrand, &lo, &hi, 1e-12)?;
            amp.powf(gt) * unit * cell_volume / 2f64.powi(q as i32)
        };

        let region_mass = active_cells.len() as f64 * active_cell_mass
            + inactive_cells.len() as f64 * inactive_cell_mass;
        let normalizer = (1.0 - region_mass) / (1.0 - 4.0 * amp);
        let lo_bracket = (1.0 - 2.0 * amp) / (1.0 - 4.0 * amp);
        let hi_bracket = 1.0 / (1.0 - 4.0 * amp);
        if !(lo_bracket - 1e-9..=hi_bracket + 1e-9).contains(&normalizer) {
            return Err(Error::Internal(format!(
                "normalizer {normalizer} outside bracket [{lo_bracket}, {hi_bracket}]"
            )));
        }

        // g(phi) = (1+phi)^gt/gt + (1-phi)^gt is convex on [0,1], so its
        // maximum over a cell sits at phi = 0 or phi = 1.
        let envelope_unit = (1.0 / gt + 1.0).max(2f64.powf(gt) / gt);
        let active_envelope = amp.powf(gt) * envelope_unit;

        Ok(HardInstance {
            family,
            theta,
            eta,
            normalizer,
            region_mass,
            outside_mass: 1.0 - region_mass,
            active_cells,
            inactive_cells,
            active_cell_mass,
            inactive_cell_mass,
            active_envelope,
        })
    }

    #[inline]
    pub fn family(&self) -> &Arc<PerturbedFamily> {
        &self.family
    }

    #[inline]
    pub fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    #[inline]
    pub fn eta(&self) -> (f64, f64) {
        self.eta
    }

    /// Normalizing constant of the outside plateau.
    #[inline]
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Probability mass of the band around the baseline.
    #[inline]
    pub fn region_mass(&self) -> f64 {
        self.region_mass
    }

    #[inline]
    pub fn outside_mass(&self) -> f64 {
        self.outside_mass
    }

    #[inline]
    pub fn gamma_tilde(&self) -> f64 {
        self.family.gamma_tilde()
    }

    /// Deterministic label of `x` under this instance's boundary.
    #[inline]
    pub fn classify(&self, x: &Point) -> Result<u8> {
        if x.dim() != self.family.dimension() {
            return Err(Error::Parameter("classify: dimension mismatch".into()));
        }
        Ok(u8::from(self.family.b_theta_unchecked(&self.theta, x.base()) <= x.height()))
    }

    /// Which region `x` falls in. The band boundaries are closed exactly as
    /// the density definition requires: the tube includes its upper edge,
    /// the shoulder is half-open below and closed at `b_0 + 3 * amplitude`.
    pub fn region_of(&self, x: &Point) -> RegionTag {
        let amp = self.family.amplitude();
        let z = x.base();
        let b0 = self.family.baseline().evaluate(z);
        let h = x.height();
        if h < b0 - amp || h > b0 + 3.0 * amp {
            return RegionTag::Outside;
        }
        let bumps = self.family.theta_dot_bumps(&self.theta, z);
        if h <= b0 + amp + 2.0 * bumps {
            RegionTag::Tube
        } else {
            RegionTag::Shoulder
        }
    }

    /// Density with respect to Lebesgue measure.
    pub fn density(&self, x: &Point) -> f64 {
        let gt = self.gamma_tilde();
        let amp = self.family.amplitude();
        let z = x.base();
        match self.region_of(x) {
            RegionTag::Tube => {
                let center = self.family.b_theta_unchecked(&self.theta, z);
                0.5 * pow_gamma_minus_one(x.height() - center, gt)
            }
            RegionTag::Shoulder => {
                let bumps = self.family.theta_dot_bumps(&self.theta, z);
                0.5 * pow_gamma_minus_one(amp - bumps, gt)
            }
            RegionTag::Outside => self.normalizer,
        }
    }

    /// Column mass of the band at base point `z` (used by samplers and by
    /// goodness-of-fit expectations; the normalization check integrates the
    /// pointwise density instead, keeping the two routes independent).
    pub fn column_mass(&self, z: &[f64]) -> f64 {
        let gt = self.gamma_tilde();
        let amp = self.family.amplitude();
        let bumps = self.family.theta_dot_bumps(&self.theta, z);
        let a = amp + bumps;
        a.powf(gt) / gt + (amp - bumps).powf(gt)
    }

    /// One exact draw from the instance marginal.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Result<Point> {
        let amp = self.family.amplitude();
        let q = self.family.dimension() - 1;
        let u: f64 = rng.random();
        if u < self.outside_mass {
            // Outside: the band has constant column length 4 * amplitude, so
            // the base marginal is uniform on the whole base cube.
            let z: smallvec::SmallVec<[f64; 4]> = (0..q).map(|_| rng.random::<f64>()).collect();
            let b0 = self.family.baseline().evaluate(&z);
            let lower_len = b0 - amp;
            let upper_len = 1.0 - (b0 + 3.0 * amp);
            if lower_len < -1e-12 || upper_len < -1e-12 {
                return Err(Error::Numeric(
                    "sample_point: baseline violates the band range condition".into(),
                ));
            }
            let v = rng.random::<f64>() * (lower_len + upper_len);
            let h = if v < lower_len { v } else { b0 + 3.0 * amp + (v - lower_len) };
            return Ok(Point::from_parts(&z, h.clamp(0.0, 1.0)));
        }

        // Band: pick a cell proportionally to its mass, then the base point
        // by in-cell rejection against the column-mass envelope.
        let total_active = self.active_cells.len() as f64 * self.active_cell_mass;
        let w = rng.random::<f64>() * self.region_mass;
        let use_active =
            !self.active_cells.is_empty() && (w < total_active || self.inactive_cells.is_empty());
        let (cell, needs_rejection) = if use_active {
            let idx = ((w / self.active_cell_mass) as usize).min(self.active_cells.len() - 1);
            (self.active_cells[idx], true)
        } else {
            let idx = (((w - total_active) / self.inactive_cell_mass) as usize)
                .min(self.inactive_cells.len() - 1);
            (self.inactive_cells[idx], false)
        };
        let (lo, hi) = self.family.partition().cell_bounds(cell)?;
        let mut z = smallvec::SmallVec::<[f64; 4]>::from_elem(0.0, q);
        if needs_rejection {
            let mut accepted = false;
            for _ in 0..REJECTION_CAP {
                for (zi, (l, h)) in z.iter_mut().zip(lo.iter().zip(&hi)) {
                    *zi = l + rng.random::<f64>() * (h - l);
                }
                if rng.random::<f64>() * self.active_envelope <= self.column_mass(&z) {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::Numeric(
                    "sample_point: in-cell rejection exceeded its cap; mass table is inconsistent"
                        .into(),
                ));
            }
        } else {
            for (zi, (l, h)) in z.iter_mut().zip(lo.iter().zip(&hi)) {
                *zi = l + rng.random::<f64>() * (h - l);
            }
        }

        let gt = self.gamma_tilde();
        let b0 = self.family.baseline().evaluate(&z);
        let bumps = self.family.theta_dot_bumps(&self.theta, &z);
        let a = amp + bumps;
        let tube_mass = a.powf(gt) / gt;
        let shoulder_mass = (amp - bumps).powf(gt);
        let h = if rng.random::<f64>() * (tube_mass + shoulder_mass) < tube_mass {
            // Tube offset: |h - b_theta| has CDF (w/a)^gt, symmetric sign.
            let center = b0 + bumps;
            let w = if gt == 1.0 {
                a * rng.random::<f64>()
            } else {
                a * rng.random::<f64>().powf(1.0 / gt)
            };
            if rng.random::<f64>() < 0.5 {
                center - w
            } else {
                center + w
            }
        } else {
            let shoulder_lo = b0 + amp + 2.0 * bumps;
            let shoulder_hi = b0 + 3.0 * amp;
            shoulder_lo + rng.random::<f64>() * (shoulder_hi - shoulder_lo)
        };
        Ok(Point::from_parts(&z, h.clamp(0.0, 1.0)))
    }

    /// `n` labelled draws, reproducible from the seed alone.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<LabeledSample> {
        if n == 0 {
            return Err(Error::Parameter("sample_labeled: n must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.sample_point(&mut rng)?;
            labels.push(self.classify(&x)?);
            points.push(x);
        }
        Ok(LabeledSample { points, labels, seed })
    }
}

/// A noiseless sample: labels are exactly the boundary labels of the points.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub points: Vec<Point>,
    pub labels: Vec<u8>,
    pub seed: u64,
}

impl LabeledSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Delimited text with header `x1,...,xd,y`; coordinates carry 17
    /// significant digits so the file round-trips bit-exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.points.first().map(|p| p.dim()).unwrap_or(0);
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        for (p, y) in self.points.iter().zip(&self.labels) {
            let row: Vec<String> = p.coords().iter().map(|c| format!("{c:.16e}")).collect();
            writeln!(w, "{},{y}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, seed: u64) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('x')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(Error::Parse(format!("sample line {i}: too few columns")));
            }
            let coords: Vec<f64> = fields[..fields.len() - 1]
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {i}: {e}"))))
                .collect::<Result<_>>()?;
            let y: u8 = fields[fields.len() - 1]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {i}: bad label: {e}")))?;
            points.push(Point::new(&coords)?);
            labels.push(y);
        }
        Ok(LabeledSample { points, labels, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{plan_parameters, ClassSpec};
    use crate::numerics::{ks_critical, mean_se};

    fn holder_instance(n: u64, theta_of: impl Fn(usize) -> ThetaVector) -> HardInstance {
        let spec = ClassSpec::Hoelder { alpha: 1.0, gamma: 1.0 };
        let plan = plan_parameters(&spec, 2, n).unwrap();
        let m = plan.family.partition().cell_count();
        HardInstance::new(Arc::new(plan.family), theta_of(m)).unwrap()
    }

    #[test]
    fn normalizer_closed_form_when_density_is_flat() {
        // gamma_tilde = 1: the band density is 1/2 everywhere, so the
        // normalizer collapses to (1 - 2 amp) / (1 - 4 amp) = 23/22 at 1/48.
        let inst = holder_instance(4, ThetaVector::ones);
        assert!((inst.family().amplitude() - 1.0 / 48.0).abs() < 1e-18);
        assert!((inst.normalizer() - 23.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn normalizer_zero_theta_matches_power_law_oracle() {
        // For theta = 0 the band mass is amp^gt (1 + 1/gt); cross-check the
        // quadrature against a direct 1-D integral of the density column.
        let spec = ClassSpec::Hoelder { alpha: 0.5, gamma: 1.0 };
        let plan = plan_parameters(&spec, 2, 16).unwrap();
        let amp = plan.family.amplitude();
        let gt = plan.family.gamma_tilde();
        let fam = Arc::new(plan.family);
        let inst = HardInstance::new(fam.clone(), ThetaVector::zeros(fam.partition().cell_count()))
            .unwrap();
        let b0 = 0.5;
        let oracle = crate::numerics::integrate_piecewise(
            |h| inst.density(&Point::new(&[0.3, h]).unwrap()),
            b0 - amp,
            b0 + 3.0 * amp,
            &[b0, b0 + amp],
            1e-10,
        )
        .unwrap()
        .0;
        let closed = amp.powf(gt) * (1.0 + 1.0 / gt);
        assert!((oracle - closed).abs() < 1e-9);
        let expected = (1.0 - closed) / (1.0 - 4.0 * amp);
        assert!((inst.normalizer() - expected).abs() < 1e-10);
    }

    #[test]
    fn normalizer_bracket_for_random_theta() {
        use rand::SeedableRng;
        let spec = ClassSpec::Hoelder { alpha: 0.5, gamma: 1.5 };
        let plan = plan_parameters(&spec, 2, 64).unwrap();
        let fam = Arc::new(plan.family);
        let amp = fam.amplitude();
        let (lo, hi) = ((1.0 - 2.0 * amp) / (1.0 - 4.0 * amp), 1.0 / (1.0 - 4.0 * amp));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let theta = ThetaVector::random(fam.partition().cell_count(), &mut rng);
            let inst = HardInstance::new(fam.clone(), theta).unwrap();
            assert!(inst.normalizer() >= lo - 1e-12 && inst.normalizer() <= hi + 1e-12);
        }
    }

    #[test]
    fn region_examples() {
        let inst = holder_instance(4, ThetaVector::ones);
        let fam = inst.family();
        let amp = fam.amplitude();
        // on the perturbed boundary -> tube
        let z = fam.partition().center(2).unwrap()[0];
        let b = fam.b_theta(inst.theta(), &[z]).unwrap();
        assert_eq!(inst.region_of(&Point::new(&[z, b]).unwrap()), RegionTag::Tube);
        // top edge of the band where the bump vanishes -> shoulder
        let zb = fam.partition().cell_bounds(0).unwrap().0[0];
        let top = fam.baseline().evaluate(&[zb]) + 3.0 * amp;
        assert_eq!(inst.region_of(&Point::new(&[zb, top]).unwrap()), RegionTag::Shoulder);
        // floor of the cube -> outside
        assert_eq!(inst.region_of(&Point::new(&[0.3, 0.0]).unwrap()), RegionTag::Outside);
    }

    #[test]
    fn density_examples() {
        // gamma_tilde = 1: density is 1/2 on the whole band, normalizer outside.
        let inst = holder_instance(4, ThetaVector::ones);
        let x = Point::new(&[0.26, 0.5]).unwrap();
        assert_eq!(inst.region_of(&x), RegionTag::Tube);
        assert_eq!(inst.density(&x), 0.5);
        assert_eq!(inst.density(&Point::new(&[0.26, 0.05]).unwrap()), inst.normalizer());

        // gamma_tilde = 2 at the tube offset amp/2: density amp/4.
        let spec = ClassSpec::Hoelder { alpha: 0.5, gamma: 1.0 };
        let plan = plan_parameters(&spec, 2, 16).unwrap();
        let amp = plan.family.amplitude();
        let fam = Arc::new(plan.family);
        let theta = ThetaVector::zeros(fam.partition().cell_count());
        let inst2 = HardInstance::new(fam, theta).unwrap();
        let x = Point::new(&[0.3, 0.5 + amp / 2.0]).unwrap();
        assert_eq!(inst2.region_of(&x), RegionTag::Tube);
        assert!((inst2.density(&x) - 0.5 * (amp / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn density_capped_on_band() {
        use rand::SeedableRng;
        let spec = ClassSpec::Hoelder { alpha: 0.5, gamma: 1.2 };
        let plan = plan_parameters(&spec, 2, 64).unwrap();
        let fam = Arc::new(plan.family);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = ThetaVector::random(fam.partition().cell_count(), &mut rng);
        let inst = HardInstance::new(fam, theta).unwrap();
        for _ in 0..20_000 {
            let x = inst.sample_point(&mut rng).unwrap();
            match inst.region_of(&x) {
                RegionTag::Outside => assert_eq!(inst.density(&x), inst.normalizer()),
                _ => assert!(inst.density(&x) <= 0.5 + 1e-12),
            }
        }
    }

    #[test]
    fn shoulder_matches_band_minus_tube_predicate() {
        use rand::SeedableRng;
        let inst = holder_instance(16, |m| {
            let mut bits = vec![0u8; m];
            for (j, b) in bits.iter_mut().enumerate() {
                *b = (j % 2) as u8;
            }
            ThetaVector::from_bits(&bits).unwrap()
        });
        let fam = inst.family();
        let amp = fam.amplitude();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50_000 {
            let x = Point::new(&[rng.random(), rng.random()]).unwrap();
            let z = x.base();
            let b0 = fam.baseline().evaluate(z);
            let bumps = fam.theta_dot_bumps(inst.theta(), z);
            let in_band = x.height() >= b0 - amp && x.height() <= b0 + 3.0 * amp;
            let in_tube = (x.height() - (b0 + bumps)).abs() <= amp + bumps;
            let expected = match (in_band, in_tube) {
                (true, true) => RegionTag::Tube,
                (true, false) => RegionTag::Shoulder,
                (false, _) => RegionTag::Outside,
            };
            assert_eq!(inst.region_of(&x), expected);
        }
    }

    #[test]
    fn sampler_outside_frequency_matches() {
        use rand::SeedableRng;
        let inst = holder_instance(4, ThetaVector::ones);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let mut outside = 0u32;
        for _ in 0..n {
            let x = inst.sample_point(&mut rng).unwrap();
            if inst.region_of(&x) == RegionTag::Outside {
                outside += 1;
            }
        }
        let p_hat = outside as f64 / n as f64;
        let p = inst.outside_mass();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() <= 3.0 * se, "p_hat {p_hat} vs {p} (se {se})");
    }

    #[test]
    fn sampler_band_height_uniform_for_flat_case() {
        use rand::SeedableRng;
        // theta = 0 with flat baseline and gamma_tilde = 1: heights in the
        // band are uniform on [1/2 - amp, 1/2 + 3 amp]; Kolmogorov-Smirnov.
        let inst = holder_instance(4, ThetaVector::zeros);
        let amp = inst.family().amplitude();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut heights: Vec<f64> = Vec::new();
        while heights.len() < 20_000 {
            let x = inst.sample_point(&mut rng).unwrap();
            if inst.region_of(&x) != RegionTag::Outside {
                heights.push(x.height());
            }
        }
        heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lo, hi) = (0.5 - amp, 0.5 + 3.0 * amp);
        let n = heights.len();
        let mut d_stat = 0.0f64;
        for (i, h) in heights.iter().enumerate() {
            let cdf = (h - lo) / (hi - lo);
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            d_stat = d_stat.max((cdf - emp_lo).abs()).max((cdf - emp_hi).abs());
        }
        assert!(d_stat < ks_critical(n, 1e-3), "KS statistic {d_stat}");
    }

    #[test]
    fn sampler_chi2_against_density_32x32() {
        use rand::SeedableRng;
        let inst = holder_instance(4, |m| {
            let mut bits = vec![0u8; m];
            bits[0] = 1;
            bits[3] = 1;
            ThetaVector::from_bits(&bits).unwrap()
        });
        let grid = 32usize;
        let n = 200_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = vec![0u32; grid * grid];
        for _ in 0..n {
            let x = inst.sample_point(&mut rng).unwrap();
            let i = ((x.base()[0] * grid as f64) as usize).min(grid - 1);
            let j = ((x.height() * grid as f64) as usize).min(grid - 1);
            counts[i * grid + j] += 1;
        }
        // expected box masses by adaptive quadrature of the density
        let mut stat = 0.0f64;
        let mut df = 0usize;
        let mut pooled_obs = 0.0f64;
        let mut pooled_exp = 0.0f64;
        for i in 0..grid {
            for j in 0..grid {
                let (xl, xh) = (i as f64 / grid as f64, (i + 1) as f64 / grid as f64);
                let (yl, yh) = (j as f64 / grid as f64, (j + 1) as f64 / grid as f64);
                let f = |p: &[f64]| inst.density(&Point::from_parts(&[p[0]], p[1]));
                let (mass, _) = integrate_box(&f, &[xl, yl], &[xh, yh], 1e-8).unwrap();
                let expected = mass * n as f64;
                let observed = counts[i * grid + j] as f64;
                if expected < 5.0 {
                    pooled_obs += observed;
                    pooled_exp += expected;
                } else {
                    stat += (observed - expected) * (observed - expected) / expected;
                    df += 1;
                }
            }
        }
        if pooled_exp > 0.0 {
            stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
            df += 1;
        }
        let threshold = crate::numerics::chi2_quantile(df as f64 - 1.0, 1.0 - 1e-3);
        assert!(stat < threshold, "chi2 {stat} >= {threshold} (df {df})");
    }

    #[test]
    fn sampler_with_curved_baseline() {
        use rand::SeedableRng;
        // paraboloid baseline: outside segments vary with the base point
        let spec = ClassSpec::ConvexLipschitz { gamma: 2.0 };
        let plan = plan_parameters(&spec, 2, 64).unwrap();
        let fam = Arc::new(plan.family);
        let m = fam.partition().cell_count();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let theta = ThetaVector::random(m, &mut rng);
        let inst = HardInstance::new(fam.clone(), theta).unwrap();

        let n = 80_000;
        let mut outside = 0u32;
        let mut below = 0u32;
        for _ in 0..n {
            let x = inst.sample_point(&mut rng).unwrap();
            match inst.region_of(&x) {
                RegionTag::Outside => {
                    outside += 1;
                    let b0 = fam.baseline().evaluate(x.base());
                    if x.height() < b0 - fam.amplitude() {
                        below += 1;
                    }
                }
                _ => {
                    assert!(inst.density(&x) <= 0.5 + 1e-12);
                }
            }
        }
        let p_hat = outside as f64 / n as f64;
        let p = inst.outside_mass();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() <= 4.0 * se, "outside {p_hat} vs {p}");
        // mass below the band: integral of (b_0 - amp) over the base, since
        // the plateau density is constant outside
        let amp = fam.amplitude();
        let (below_len, _) = crate::numerics::integrate(
            |z| fam.baseline().evaluate(&[z]) - amp,
            0.0,
            1.0,
            1e-10,
        )
        .unwrap();
        let p_below = inst.normalizer() * below_len;
        let q_hat = below as f64 / n as f64;
        let se_b = (p_below * (1.0 - p_below) / n as f64).sqrt();
        assert!((q_hat - p_below).abs() <= 4.0 * se_b, "below {q_hat} vs {p_below}");
    }

    #[test]
    fn labels_match_boundary_and_zero_n_rejected() {
        let inst = holder_instance(4, ThetaVector::ones);
        let sample = inst.sample_labeled(500, 21).unwrap();
        for (p, y) in sample.points.iter().zip(&sample.labels) {
            assert_eq!(*y, inst.classify(p).unwrap());
        }
        assert!(matches!(inst.sample_labeled(0, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn samples_reproducible_from_seed() {
        let inst = holder_instance(16, ThetaVector::ones);
        let a = inst.sample_labeled(64, 9).unwrap();
        let b = inst.sample_labeled(64, 9).unwrap();
        assert_eq!(a, b);
        let c = inst.sample_labeled(64, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let inst = holder_instance(4, ThetaVector::ones);
        let sample = inst.sample_labeled(50, 3).unwrap();
        let mut buf = Vec::new();
        sample.write_csv(&mut buf).unwrap();
        let back = LabeledSample::read_csv(std::io::BufReader::new(&buf[..]), 3).unwrap();
        assert_eq!(sample, back);
    }

    #[test]
    fn mean_se_sanity() {
        let (m, se) = mean_se(&[1.0, 1.0, 1.0]);
        assert_eq!((m, se), (1.0, 0.0));
    }
}
