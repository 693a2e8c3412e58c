//! Horizon-function classifiers and distance-to-boundary machinery.
//!
//! A horizon function `b : [0,1]^(d-1) -> [0,1]` induces the classifier
//! `h_b(x) = 1{ b(x_base) <= x_height }`, whose decision boundary is the
//! graph of `b`. The vertical gap `|x_height - b(x_base)|` sandwiches the
//! true Euclidean distance to that boundary up to a constant depending on
//! the Hölder regularity of `b`; both the analytic sandwich and a grid-based
//! numeric distance are provided here.

use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A point of the unit cube `[0,1]^d`, split into the base coordinates
/// (all but the last) and the height (the last coordinate).
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: SmallVec<[f64; 4]>,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Parameter("Point: dimension must be >= 2".into()));
        }
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Parameter(format!(
                "Point: coordinates must lie in [0,1], got {coords:?}"
            )));
        }
        Ok(Point { coords: SmallVec::from_slice(coords) })
    }

    /// Internal fast path for coordinates already known to be in range.
    #[inline]
    pub(crate) fn from_parts(base: &[f64], height: f64) -> Self {
        let mut coords = SmallVec::with_capacity(base.len() + 1);
        coords.extend_from_slice(base);
        coords.push(height);
        Point { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// First `d-1` coordinates.
    #[inline]
    pub fn base(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    /// Last coordinate.
    #[inline]
    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn euclidean_distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A boundary function on `[0,1]^(d-1)` together with its declared Hölder
/// regularity `(alpha, holder_constant)`.
#[derive(Clone)]
pub struct HorizonFunction {
    d: usize,
    alpha: f64,
    holder_constant: f64,
    eval: EvalFn,
}

impl std::fmt::Debug for HorizonFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HorizonFunction")
            .field("d", &self.d)
            .field("alpha", &self.alpha)
            .field("holder_constant", &self.holder_constant)
            .finish()
    }
}

/// Numeric distance search parameters. The resolution is the final grid
/// spacing per axis used when refining around the running minimizer.
#[derive(Debug, Clone, Copy)]
pub struct DistanceGrid {
    pub resolution: f64,
}

impl DistanceGrid {
    /// Defaults keep distance queries sub-millisecond at desk scale.
    pub fn default_for_dimension(d: usize) -> Self {
        let resolution = if d <= 2 { 2f64.powi(-12) } else { 2f64.powi(-6) };
        DistanceGrid { resolution }
    }
}

impl HorizonFunction {
    pub fn new<F>(d: usize, alpha: f64, holder_constant: f64, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if d < 2 {
            return Err(Error::Parameter("HorizonFunction: d must be >= 2".into()));
        }
        if !(0.0 < alpha && alpha <= 1.0) {
            return Err(Error::Parameter("HorizonFunction: alpha must be in (0,1]".into()));
        }
        if holder_constant < 0.0 {
            return Err(Error::Parameter("HorizonFunction: negative Hölder constant".into()));
        }
        Ok(HorizonFunction { d, alpha, holder_constant, eval: Arc::new(eval) })
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    #[inline]
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        (self.eval)(z)
    }

    /// The label `1{ b(x_base) <= x_height }`. Boundary ties resolve to 1.
    pub fn classify(&self, x: &Point) -> Result<u8> {
        if x.dim() != self.d {
            return Err(Error::Parameter(format!(
                "classify: point dimension {} does not match boundary dimension {}",
                x.dim(),
                self.d
            )));
        }
        Ok(u8::from(self.evaluate(x.base()) <= x.height()))
    }

    /// Constant turning the vertical gap into a distance lower bound:
    /// sqrt(1 + K^2) for alpha = 1, max(2^alpha, 2K) for alpha < 1.
    pub fn distance_equivalence_constant(&self) -> f64 {
        if self.alpha == 1.0 {
            (1.0 + self.holder_constant * self.holder_constant).sqrt()
        } else {
            2f64.powf(self.alpha).max(2.0 * self.holder_constant)
        }
    }

    /// Analytic sandwich for the Euclidean distance from `x` to the decision
    /// boundary: `(gap / K~)^(1/alpha) <= dist <= gap` with the vertical gap
    /// `gap = |x_height - b(x_base)|`.
    pub fn boundary_distance_bounds(&self, x: &Point) -> Result<(f64, f64)> {
        if x.dim() != self.d {
            return Err(Error::Parameter("boundary_distance_bounds: dimension mismatch".into()));
        }
        let gap = (x.height() - self.evaluate(x.base())).abs();
        let k = self.distance_equivalence_constant();
        let lower = (gap / k).powf(1.0 / self.alpha);
        Ok((lower, gap))
    }

    /// Grid-search approximation of the distance to the boundary graph,
    /// guarded by the analytic sandwich. The search window is centred on the
    /// base coordinates of `x`; no boundary point closer than the vertical
    /// gap can lie outside it.
    pub fn numeric_boundary_distance(&self, x: &Point, grid: &DistanceGrid) -> Result<f64> {
        if x.dim() != self.d {
            return Err(Error::Parameter("numeric_boundary_distance: dimension mismatch".into()));
        }
        if grid.resolution <= 0.0 {
            return Err(Error::Parameter("numeric_boundary_distance: resolution must be > 0".into()));
        }
        let (lower, upper) = self.boundary_distance_bounds(x)?;
        if upper == 0.0 {
            return Ok(0.0);
        }

        let q = self.d - 1;
        let dist_to = |z: &[f64]| -> f64 {
            let bz = self.evaluate(z);
            let mut s = (x.height() - bz) * (x.height() - bz);
            for (zi, xi) in z.iter().zip(x.base()) {
                s += (zi - xi) * (zi - xi);
            }
            s.sqrt()
        };

        // The foot of the vertical segment is always a candidate, so the
        // result can never exceed the sandwich upper bound.
        let mut best = upper;
        let mut center: Vec<f64> = x.base().to_vec();
        let mut radius = upper.min(1.0);
        const NODES: usize = 17;
        loop {
            let step = 2.0 * radius / (NODES - 1) as f64;
            let mut index = vec![0usize; q];
            let mut argmin = center.clone();
            'grid: loop {
                let z: Vec<f64> = (0..q)
                    .map(|a| (center[a] - radius + index[a] as f64 * step).clamp(0.0, 1.0))
                    .collect();
                let dv = dist_to(&z);
                if dv < best {
                    best = dv;
                    argmin = z;
                }
                // odometer over the q-dimensional grid
                for digit in index.iter_mut() {
                    *digit += 1;
                    if *digit < NODES {
                        continue 'grid;
                    }
                    *digit = 0;
                }
                break;
            }
            center = argmin;
            if step <= grid.resolution {
                break;
            }
            radius = (2.0 * step).min(radius * 0.5);
        }

        if best < lower - 1e-9 || best > upper + 1e-12 {
            return Err(Error::Internal(format!(
                "numeric boundary distance {best:.6e} escaped the sandwich [{lower:.6e}, {upper:.6e}]"
            )));
        }
        Ok(best)
    }
}

/// Empirical Hölder modulus sup |f(z)-f(w)| / ||z-w||_2^alpha over the given
/// probe pairs. Shared by construction validation and regularity checks.
pub fn empirical_holder_modulus<F>(f: F, alpha: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut sup: f64 = 0.0;
    for (z, w) in pairs {
        let dist: f64 = z
            .iter()
            .zip(w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist == 0.0 {
            continue;
        }
        let ratio = (f(z) - f(w)).abs() / dist.powf(alpha);
        sup = sup.max(ratio);
    }
    sup
}

/// Deterministic probe pairs for modulus estimation: low-discrepancy pairs
/// spanning the whole domain plus short-range pairs clustered around the
/// given focus points (bump peaks are the worst offenders).
pub fn modulus_probe_pairs(
    dim: usize,
    budget: usize,
    focus: &[Vec<f64>],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut pairs = Vec::with_capacity(budget);
    let seq = crate::numerics::kronecker_sequence(dim, budget);
    for w in seq.windows(2) {
        pairs.push((w[0].clone(), w[1].clone()));
    }
    if !focus.is_empty() {
        let scales = [1e-1, 1e-2, 1e-3, 1e-4];
        let dirs = crate::numerics::kronecker_sequence(dim, 8);
        for center in focus {
            for &s in &scales {
                for dir in &dirs {
                    let a: Vec<f64> = center
                        .iter()
                        .zip(dir)
                        .map(|(c, u)| (c + s * (u - 0.5)).clamp(0.0, 1.0))
                        .collect();
                    let b: Vec<f64> = center
                        .iter()
                        .zip(dir)
                        .map(|(c, u)| (c - s * (u - 0.5)).clamp(0.0, 1.0))
                        .collect();
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs
}
