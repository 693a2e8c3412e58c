//! The perturbation construction: an even grid over the base domain, one
//! localized bump per cell, and the finite family of boundaries
//! `b_theta = b_0 + amplitude * sum_j theta_j * bump_j` indexed by binary
//! vectors `theta`.
//!
//! Bumps live strictly inside their cells, so supports are pairwise disjoint
//! and at most one summand is active at any base point.

use std::sync::{Arc, OnceLock};

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::geometry::{empirical_holder_modulus, modulus_probe_pairs, HorizonFunction};
use crate::numerics::kronecker_sequence;

// ---------------------------------------------------------------------------
// One-dimensional bump building blocks
// ---------------------------------------------------------------------------

/// Classic smooth bump: exp(1 - 1/(1-x^2)) on (-1,1), zero outside.
#[inline]
pub fn standard_bump(x: f64) -> f64 {
    let x2 = x * x;
    if x2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x2)).exp()
    }
}

fn standard_bump_derivative_abs(x: f64) -> f64 {
    let x2 = x * x;
    if x2 >= 1.0 {
        0.0
    } else {
        let om = 1.0 - x2;
        2.0 * x.abs() / (om * om) * standard_bump(x)
    }
}

/// Smooth monotone step: 0 for t <= 0, 1 for t >= 1.
#[inline]
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = (-1.0 / t).exp();
        let h = (-1.0 / (1.0 - t)).exp();
        g / (g + h)
    }
}

/// Plateau bump: 1 on [-1/2, 1/2], smooth decay, zero for |x| >= 3/4.
#[inline]
pub fn plateau_bump(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 0.75 {
        0.0
    } else {
        smooth_step((0.75 - a) * 4.0)
    }
}

/// sup |psi'| of the standard bump, estimated once by dense 1-D maximization
/// of the analytic derivative and slightly inflated so the cached value is a
/// certified upper bound (the sup is about 2.1669).
pub fn standard_bump_derivative_sup() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let n = 2_000_000;
        let mut sup: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            sup = sup.max(standard_bump_derivative_abs(x));
        }
        sup * (1.0 + 1e-6)
    })
}

/// sup |psi'| of the plateau bump (central differences on the transition).
pub fn plateau_bump_derivative_sup() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let n = 1_000_000;
        let h = 1e-7;
        let mut sup: f64 = 0.0;
        for i in 0..=n {
            let x = 0.5 + 0.25 * i as f64 / n as f64;
            let d = (plateau_bump(x + h) - plateau_bump(x - h)).abs() / (2.0 * h);
            sup = sup.max(d);
        }
        sup * (1.0 + 1e-4)
    })
}

// ---------------------------------------------------------------------------
// Grid partition
// ---------------------------------------------------------------------------

/// Even partition of `[0,1]^(d-1)` into `(M/2)^(d-1)` closed cells of side
/// `2/M`, each centred on an odd multiple of `1/M`. Cell indices follow the
/// lexicographic order of the centre vectors, which fixes the meaning of
/// every `theta` coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPartition {
    d: usize,
    subdivisions: usize,
    cells_per_axis: usize,
    cell_count: usize,
    odd_vectors: Vec<Vec<usize>>,
}

impl GridPartition {
    pub fn build(d: usize, subdivisions: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter("build_partition: d must be >= 2".into()));
        }
        if subdivisions < 2 || !subdivisions.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "build_partition: M must be an even integer >= 2, got {subdivisions}"
            )));
        }
        let s = subdivisions / 2;
        let q = d - 1;
        let cell_count = s
            .checked_pow(q as u32)
            .ok_or_else(|| Error::Parameter("build_partition: cell count overflows".into()))?;
        if cell_count > 1 << 26 {
            return Err(Error::Parameter(format!(
                "build_partition: {cell_count} cells is beyond desk scale"
            )));
        }
        let mut odd_vectors = Vec::with_capacity(cell_count);
        let mut digits = vec![0usize; q];
        loop {
            odd_vectors.push(digits.iter().map(|&k| 2 * k + 1).collect());
            // lexicographic odometer, last axis fastest
            let mut axis = q;
            loop {
                if axis == 0 {
                    return Ok(GridPartition {
                        d,
                        subdivisions,
                        cells_per_axis: s,
                        cell_count,
                        odd_vectors,
                    });
                }
                axis -= 1;
                digits[axis] += 1;
                if digits[axis] < s {
                    break;
                }
                digits[axis] = 0;
            }
        }
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.d
    }

    /// The even integer M.
    #[inline]
    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    #[inline]
    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Number of cells m = (M/2)^(d-1).
    #[inline]
    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn odd_vector(&self, j: usize) -> Result<&[usize]> {
        self.odd_vectors
            .get(j)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Parameter(format!("cell index {j} out of range")))
    }

    /// Cell centre `v_j / M`.
    pub fn center(&self, j: usize) -> Result<Vec<f64>> {
        let v = self.odd_vector(j)?;
        let m = self.subdivisions as f64;
        Ok(v.iter().map(|&k| k as f64 / m).collect())
    }

    /// Closed cell bounds per axis.
    pub fn cell_bounds(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let v = self.odd_vector(j)?;
        let m = self.subdivisions as f64;
        let lo = v.iter().map(|&k| (k as f64 - 1.0) / m).collect();
        let hi = v.iter().map(|&k| (k as f64 + 1.0) / m).collect();
        Ok((lo, hi))
    }

    /// Membership in the closed cell: max |z - v_j/M| <= 1/M.
    pub fn cell_contains(&self, j: usize, z: &[f64]) -> Result<bool> {
        let v = self.odd_vector(j)?;
        let m = self.subdivisions as f64;
        Ok(z
            .iter()
            .zip(v)
            .all(|(zi, &k)| (zi - k as f64 / m).abs() <= 1.0 / m + 1e-15))
    }

    /// Index of the cell owning `z` (shared boundaries go to the upper cell;
    /// every bump vanishes there, so ownership never matters for values).
    #[inline]
    pub fn owner_cell(&self, z: &[f64]) -> usize {
        let s = self.cells_per_axis;
        let mut idx = 0usize;
        for &zi in z {
            let k = ((zi * s as f64) as usize).min(s - 1);
            idx = idx * s + k;
        }
        idx
    }
}

// ---------------------------------------------------------------------------
// Bump profiles
// ---------------------------------------------------------------------------

/// Canonical profile shapes. Names describe the formula, one per class of
/// boundary family shipped by the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// psi(2 * sup-norm), psi the standard bump.
    SupNormBump,
    /// Product of plateau bumps per coordinate.
    PlateauProduct,
    /// (1 - 4 * ||z||_2^2)_+.
    QuadraticCap,
}

impl ProfileKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ProfileKind::SupNormBump => "sup_norm_bump",
            ProfileKind::PlateauProduct => "plateau_product",
            ProfileKind::QuadraticCap => "quadratic_cap",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sup_norm_bump" => Ok(ProfileKind::SupNormBump),
            "plateau_product" => Ok(ProfileKind::PlateauProduct),
            "quadratic_cap" => Ok(ProfileKind::QuadraticCap),
            other => Err(Error::Parse(format!("unknown profile tag {other:?}"))),
        }
    }
}

/// A bump shape on `R^(d-1)`: peak 1 at the origin, values in [0,1], support
/// strictly inside the open unit sup-norm ball, with certified Hölder
/// constants (`k_phi` w.r.t. the Euclidean norm, `c_phi` w.r.t. the sup-norm
/// at the origin).
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    kind: ProfileKind,
    dim: usize,
    alpha: f64,
    k_phi: f64,
    c_phi: f64,
    support_radius: f64,
}

impl BumpProfile {
    /// Profile for Hölder-type families with exponent `alpha`.
    pub fn sup_norm_bump(dim: usize, alpha: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha <= 1.0) {
            return Err(Error::Parameter("profile: alpha must be in (0,1]".into()));
        }
        let k = (2.0 * standard_bump_derivative_sup()).max(1.0);
        Ok(BumpProfile { kind: ProfileKind::SupNormBump, dim, alpha, k_phi: k, c_phi: k, support_radius: 0.5 })
    }

    /// Smooth plateau product used by the Barron families.
    pub fn plateau_product(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("profile: dim must be >= 1".into()));
        }
        let k = (dim as f64).sqrt() * plateau_bump_derivative_sup();
        Ok(BumpProfile {
            kind: ProfileKind::PlateauProduct,
            dim,
            alpha: 1.0,
            k_phi: k,
            c_phi: 2.0,
            support_radius: 0.75,
        })
    }

    /// Quadratic cap used by the convex-Lipschitz families.
    pub fn quadratic_cap(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("profile: dim must be >= 1".into()));
        }
        Ok(BumpProfile {
            kind: ProfileKind::QuadraticCap,
            dim,
            alpha: 1.0,
            k_phi: 4.0,
            c_phi: 4.0 * (dim as f64).sqrt(),
            support_radius: 0.5,
        })
    }

    #[inline]
    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn k_phi(&self) -> f64 {
        self.k_phi
    }

    #[inline]
    pub fn c_phi(&self) -> f64 {
        self.c_phi
    }

    /// Sup-norm radius outside which the profile is identically zero.
    #[inline]
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        match self.kind {
            ProfileKind::SupNormBump => {
                let sup = u.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                standard_bump(2.0 * sup)
            }
            ProfileKind::PlateauProduct => u.iter().map(|&x| plateau_bump(x)).product(),
            ProfileKind::QuadraticCap => {
                let s: f64 = u.iter().map(|&x| x * x).sum();
                (1.0 - 4.0 * s).max(0.0)
            }
        }
    }

    /// Radius where the profile is still at least 1/2:
    /// min(1, (2 c_phi)^(-1/alpha)).
    pub fn half_level_radius(&self) -> f64 {
        (2.0 * self.c_phi).powf(-1.0 / self.alpha).min(1.0)
    }
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Baseline boundary repertoire. Each variant carries an analytic Hölder
/// constant; nothing is estimated silently.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Constant { value: f64 },
    /// offset + scale * |z - 1/2|^exponent on [0,1] (one base dimension).
    PowerCusp { offset: f64, scale: f64, exponent: f64 },
    /// 0.5 + 0.15 (0.6 sin 12 pi z + 0.3 cos 22 pi z + 0.2 sin 34 pi z).
    Sinusoid,
    /// 1/4 + ||z - 1/2||_2^2 / (d-1); convex with gradient bound 1/sqrt(d-1).
    Paraboloid,
}

impl Baseline {
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        match self {
            Baseline::Constant { value } => *value,
            Baseline::PowerCusp { offset, scale, exponent } => {
                offset + scale * (z[0] - 0.5).abs().powf(*exponent)
            }
            Baseline::Sinusoid => {
                let x = z[0];
                0.5 + 0.15
                    * (0.6 * (12.0 * std::f64::consts::PI * x).sin()
                        + 0.3 * (22.0 * std::f64::consts::PI * x).cos()
                        + 0.2 * (34.0 * std::f64::consts::PI * x).sin())
            }
            Baseline::Paraboloid => {
                let q = z.len() as f64;
                let s: f64 = z.iter().map(|&x| (x - 0.5) * (x - 0.5)).sum();
                0.25 + s / q
            }
        }
    }

    /// Analytic Hölder constant valid for the given exponent, or an error if
    /// the baseline is not `alpha`-regular.
    pub fn holder_constant(&self, alpha: f64, base_dim: usize) -> Result<f64> {
        match self {
            Baseline::Constant { .. } => Ok(0.0),
            Baseline::PowerCusp { scale, exponent, .. } => {
                if (alpha - exponent).abs() > 1e-12 {
                    return Err(Error::Parameter(format!(
                        "power-cusp baseline has exponent {exponent}, not alpha = {alpha}"
                    )));
                }
                Ok(scale.abs())
            }
            Baseline::Sinusoid => {
                if alpha != 1.0 {
                    return Err(Error::Parameter("sinusoid baseline requires alpha = 1".into()));
                }
                Ok(0.15 * std::f64::consts::PI * (0.6 * 12.0 + 0.3 * 22.0 + 0.2 * 34.0))
            }
            Baseline::Paraboloid => {
                if alpha != 1.0 {
                    return Err(Error::Parameter("paraboloid baseline requires alpha = 1".into()));
                }
                Ok(1.0 / (base_dim as f64).sqrt())
            }
        }
    }

    /// First-order Fourier moment of the baseline when known in closed form
    /// (used by the Barron membership check).
    pub fn fourier_moment(&self) -> Option<f64> {
        match self {
            Baseline::Constant { .. } => Some(0.0),
            Baseline::Sinusoid => {
                Some(0.15 * std::f64::consts::PI * (0.6 * 12.0 + 0.3 * 22.0 + 0.2 * 34.0))
            }
            _ => None,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Baseline::Constant { value } => format!("constant:{value}"),
            Baseline::PowerCusp { offset, scale, exponent } => {
                format!("power_cusp:{offset}:{scale}:{exponent}")
            }
            Baseline::Sinusoid => "sinusoid".into(),
            Baseline::Paraboloid => "paraboloid".into(),
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        let parts: Vec<&str> = tag.split(':').collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse(format!("bad number {s:?} in baseline tag")))
        };
        match parts.as_slice() {
            ["constant", v] => Ok(Baseline::Constant { value: parse(v)? }),
            ["power_cusp", a, b, c] => Ok(Baseline::PowerCusp {
                offset: parse(a)?,
                scale: parse(b)?,
                exponent: parse(c)?,
            }),
            ["sinusoid"] => Ok(Baseline::Sinusoid),
            ["paraboloid"] => Ok(Baseline::Paraboloid),
            _ => Err(Error::Parse(format!("unknown baseline tag {tag:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Theta vectors
// ---------------------------------------------------------------------------

/// A vertex of the hypercube `{0,1}^m` selecting which bumps are active.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThetaVector {
    bits: Vec<u8>,
}

impl ThetaVector {
    pub fn zeros(m: usize) -> Self {
        ThetaVector { bits: vec![0; m] }
    }

    pub fn ones(m: usize) -> Self {
        ThetaVector { bits: vec![1; m] }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Parameter("theta bits must be 0 or 1".into()));
        }
        Ok(ThetaVector { bits: bits.to_vec() })
    }

    /// Single active coordinate.
    pub fn unit(m: usize, j: usize) -> Result<Self> {
        if j >= m {
            return Err(Error::Parameter(format!("unit theta: index {j} out of range")));
        }
        let mut bits = vec![0u8; m];
        bits[j] = 1;
        Ok(ThetaVector { bits })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits: Result<Vec<u8>> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::Parse(format!("bad theta character {other:?}"))),
            })
            .collect();
        Ok(ThetaVector { bits: bits? })
    }

    pub fn random<R: rand::Rng>(m: usize, rng: &mut R) -> Self {
        let bits = (0..m).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        ThetaVector { bits }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> u8 {
        self.bits[j]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming(&self, other: &ThetaVector) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::Parameter("hamming: length mismatch".into()));
        }
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count())
    }

    /// Indices where the two vectors disagree.
    pub fn diff_indices(&self, other: &ThetaVector) -> Result<Vec<usize>> {
        if self.len() != other.len() {
            return Err(Error::Parameter("diff_indices: length mismatch".into()));
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .enumerate()
            .filter_map(|(j, (a, b))| (a != b).then_some(j))
            .collect())
    }

    pub fn to_string_bits(&self) -> String {
        self.bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }
}

// ---------------------------------------------------------------------------
// Perturbed family
// ---------------------------------------------------------------------------

/// Class label for a family; decides which planner produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassTag {
    Hoelder,
    Barron,
    ConvexLipschitz,
}

impl ClassTag {
    pub fn tag(&self) -> &'static str {
        match self {
            ClassTag::Hoelder => "holder",
            ClassTag::Barron => "barron",
            ClassTag::ConvexLipschitz => "convex",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "holder" => Ok(ClassTag::Hoelder),
            "barron" => Ok(ClassTag::Barron),
            "convex" => Ok(ClassTag::ConvexLipschitz),
            other => Err(Error::Parse(format!("unknown class tag {other:?}"))),
        }
    }
}

/// Baseline plus localized perturbations: everything needed to evaluate
/// `b_theta` for every hypercube vertex. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PerturbedFamily {
    partition: GridPartition,
    profile: BumpProfile,
    baseline: Baseline,
    baseline_holder: f64,
    amplitude: f64,
    amplitude_exact: Option<Ratio<i128>>,
    alpha: f64,
    gamma: f64,
    class: ClassTag,
}

impl PerturbedFamily {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        partition: GridPartition,
        profile: BumpProfile,
        baseline: Baseline,
        amplitude: f64,
        amplitude_exact: Option<Ratio<i128>>,
        alpha: f64,
        gamma: f64,
        class: ClassTag,
    ) -> Result<Self> {
        if profile.dim() != partition.dimension() - 1 {
            return Err(Error::Parameter("family: profile dimension mismatch".into()));
        }
        if amplitude <= 0.0 {
            return Err(Error::Parameter("family: amplitude must be positive".into()));
        }
        if !(0.0 < alpha && alpha <= 1.0) || gamma < alpha {
            return Err(Error::Parameter("family: need 0 < alpha <= 1 and gamma >= alpha".into()));
        }
        let baseline_holder = baseline.holder_constant(alpha, partition.dimension() - 1)?;
        Ok(PerturbedFamily {
            partition,
            profile,
            baseline,
            baseline_holder,
            amplitude,
            amplitude_exact,
            alpha,
            gamma,
            class,
        })
    }

    #[inline]
    pub fn partition(&self) -> &GridPartition {
        &self.partition
    }

    #[inline]
    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    #[inline]
    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    #[inline]
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    #[inline]
    pub fn amplitude_exact(&self) -> Option<Ratio<i128>> {
        self.amplitude_exact
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn gamma_tilde(&self) -> f64 {
        self.gamma / self.alpha
    }

    #[inline]
    pub fn class(&self) -> ClassTag {
        self.class
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.partition.dimension()
    }

    #[inline]
    pub fn baseline_holder_constant(&self) -> f64 {
        self.baseline_holder
    }

    /// Uniform Hölder constant for every member: K_b0 + K_phi / 2.
    #[inline]
    pub fn family_holder_constant(&self) -> f64 {
        self.baseline_holder + self.profile.k_phi() / 2.0
    }

    /// The bump attached to cell `j`, evaluated at base point `z`.
    pub fn local_bump(&self, j: usize, z: &[f64]) -> Result<f64> {
        let v = self.partition.odd_vector(j)?;
        Ok(self.bump_unchecked(v, z))
    }

    #[inline]
    fn bump_unchecked(&self, odd_vector: &[usize], z: &[f64]) -> f64 {
        let m = self.partition.subdivisions() as f64;
        let mut u = smallvec::SmallVec::<[f64; 4]>::with_capacity(z.len());
        for (zi, &vi) in z.iter().zip(odd_vector) {
            u.push(m * zi - vi as f64);
        }
        self.profile.evaluate(&u)
    }

    /// `theta . (amplitude * bumps)` at `z`; by disjoint supports only the
    /// owner cell can contribute.
    #[inline]
    pub fn theta_dot_bumps(&self, theta: &ThetaVector, z: &[f64]) -> f64 {
        let j = self.partition.owner_cell(z);
        if theta.get(j) == 0 {
            return 0.0;
        }
        let v = &self.partition.odd_vectors[j];
        self.amplitude * self.bump_unchecked(v, z)
    }

    /// Boundary value `b_theta(z) = b_0(z) + theta . bumps(z)`.
    pub fn b_theta(&self, theta: &ThetaVector, z: &[f64]) -> Result<f64> {
        if theta.len() != self.partition.cell_count() {
            return Err(Error::Parameter(format!(
                "b_theta: theta has {} bits, family has {} cells",
                theta.len(),
                self.partition.cell_count()
            )));
        }
        Ok(self.baseline.evaluate(z) + self.theta_dot_bumps(theta, z))
    }

    #[inline]
    pub(crate) fn b_theta_unchecked(&self, theta: &ThetaVector, z: &[f64]) -> f64 {
        self.baseline.evaluate(z) + self.theta_dot_bumps(theta, z)
    }

    /// Whether `z` lies in the (closed) support of bump `j`.
    pub fn support_contains(&self, j: usize, z: &[f64]) -> Result<bool> {
        let v = self.partition.odd_vector(j)?;
        let m = self.partition.subdivisions() as f64;
        let r = self.profile.support_radius();
        Ok(z.iter().zip(v).all(|(zi, &vi)| (m * zi - vi as f64).abs() <= r))
    }

    /// The boundary `b_theta` as a horizon function carrying the family-wide
    /// Hölder certificate.
    pub fn horizon(&self, theta: &ThetaVector) -> Result<HorizonFunction> {
        if theta.len() != self.partition.cell_count() {
            return Err(Error::Parameter("horizon: theta length mismatch".into()));
        }
        let family = Arc::new(self.clone());
        let theta = theta.clone();
        HorizonFunction::new(
            self.dimension(),
            self.alpha,
            self.family_holder_constant(),
            move |z| family.b_theta_unchecked(&theta, z),
        )
    }

    /// The baseline boundary as a horizon function.
    pub fn baseline_horizon(&self) -> Result<HorizonFunction> {
        let baseline = self.baseline.clone();
        HorizonFunction::new(self.dimension(), self.alpha, self.baseline_holder, move |z| {
            baseline.evaluate(z)
        })
    }
}

// ---------------------------------------------------------------------------
// Construction validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConstructionCheck {
    pub name: String,
    pub pass: bool,
    pub computed: f64,
    pub bound: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct ConstructionReport {
    pub checks: Vec<ConstructionCheck>,
    pub probe_budget: usize,
    pub seed: u64,
}

impl ConstructionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "construction report (probes = {}, seed = {})\n",
            self.probe_budget, self.seed
        ));
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {}: computed {:.6e} vs bound {:.6e} {}\n",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.computed,
                c.bound,
                c.note
            ));
        }
        out
    }
}

/// Probe-based validation of a family: amplitude cap, baseline range, support
/// disjointness, profile shape, and the uniform Hölder certificate on a few
/// randomly selected members.
pub fn validate_construction(
    family: &PerturbedFamily,
    probe_budget: usize,
    seed: u64,
) -> Result<ConstructionReport> {
    use rand::SeedableRng;
    if probe_budget == 0 {
        return Err(Error::Parameter("validate_construction: probe budget must be positive".into()));
    }
    let q = family.dimension() - 1;
    let m_sub = family.partition().subdivisions() as f64;
    let amp = family.amplitude();
    let mut checks = Vec::new();

    // Amplitude cap: amplitude <= M^(-alpha) / 4.
    let cap = m_sub.powf(-family.alpha()) / 4.0;
    checks.push(ConstructionCheck {
        name: "amplitude".into(),
        pass: amp <= cap * (1.0 + 1e-12),
        computed: amp,
        bound: cap,
        note: String::new(),
    });

    // Probe set: low-discrepancy points plus cell corners and centres.
    let mut probes = kronecker_sequence(q, probe_budget);
    for j in 0..family.partition().cell_count() {
        probes.push(family.partition().center(j)?);
        let (lo, hi) = family.partition().cell_bounds(j)?;
        probes.push(lo.clone());
        probes.push(hi.clone());
        // one mixed corner
        let mixed: Vec<f64> =
            lo.iter().zip(&hi).enumerate().map(|(a, (l, h))| if a % 2 == 0 { *l } else { *h }).collect();
        probes.push(mixed);
    }

    // Baseline range: b_0 in [amplitude, 1 - 3 * amplitude].
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for z in &probes {
        let v = family.baseline().evaluate(z);
        bmin = bmin.min(v);
        bmax = bmax.max(v);
    }
    let range_ok = bmin >= amp - 1e-12 && bmax <= 1.0 - 3.0 * amp + 1e-12;
    checks.push(ConstructionCheck {
        name: "baseline_range".into(),
        pass: range_ok,
        computed: bmin,
        bound: amp,
        note: format!("range [{bmin:.6}, {bmax:.6}] must sit in [{amp:.6}, {:.6}]", 1.0 - 3.0 * amp),
    });

    // Support disjointness: at most one active bump per probe, and zero on
    // every cell boundary probe.
    let mut max_active = 0usize;
    for z in &probes {
        let mut active = 0usize;
        for j in 0..family.partition().cell_count() {
            if family.local_bump(j, z)? > 0.0 {
                active += 1;
            }
        }
        max_active = max_active.max(active);
    }
    checks.push(ConstructionCheck {
        name: "support_disjoint".into(),
        pass: max_active <= 1,
        computed: max_active as f64,
        bound: 1.0,
        note: String::new(),
    });

    // Profile shape: peak 1 at 0, range [0,1], vanishing outside the unit
    // sup-norm ball, and the sup-norm Hölder certificate at the origin.
    let profile = family.profile();
    let origin = vec![0.0; q];
    let peak = profile.evaluate(&origin);
    let mut shape_ok = (peak - 1.0).abs() < 1e-12;
    let mut holder_at_zero_ok = true;
    let unit_probes = kronecker_sequence(q, probe_budget.min(2048));
    for u01 in &unit_probes {
        // map [0,1]^q probes to [-1.25, 1.25]^q to exercise the support edge
        let u: Vec<f64> = u01.iter().map(|&x| 2.5 * (x - 0.5)).collect();
        let v = profile.evaluate(&u);
        if !(0.0..=1.0).contains(&v) {
            shape_ok = false;
        }
        let sup = u.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if sup >= 1.0 && v != 0.0 {
            shape_ok = false;
        }
        if (v - 1.0).abs() > profile.c_phi() * sup.powf(profile.alpha()) * (1.0 + 1e-9) + 1e-12 {
            holder_at_zero_ok = false;
        }
    }
    checks.push(ConstructionCheck {
        name: "profile_shape".into(),
        pass: shape_ok,
        computed: peak,
        bound: 1.0,
        note: String::new(),
    });
    checks.push(ConstructionCheck {
        name: "profile_holder_at_zero".into(),
        pass: holder_at_zero_ok,
        computed: profile.c_phi(),
        bound: profile.c_phi(),
        note: "|phi(z) - 1| <= c_phi * sup-norm^alpha on probes".into(),
    });

    // Uniform Hölder certificate on randomly selected members.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k_family = family.family_holder_constant();
    let foci: Vec<Vec<f64>> =
        (0..family.partition().cell_count()).map(|j| family.partition().center(j)).collect::<Result<_>>()?;
    let pairs = modulus_probe_pairs(q, probe_budget.min(1024), &foci[..foci.len().min(16)]);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let theta = ThetaVector::random(family.partition().cell_count(), &mut rng);
        let modulus =
            empirical_holder_modulus(|z| family.b_theta_unchecked(&theta, z), family.alpha(), &pairs);
        worst = worst.max(modulus);
    }
    checks.push(ConstructionCheck {
        name: "family_holder_modulus".into(),
        pass: worst <= k_family * (1.0 + 1e-9) + 1e-12,
        computed: worst,
        bound: k_family,
        note: String::new(),
    });

    Ok(ConstructionReport { checks, probe_budget, seed })
}
