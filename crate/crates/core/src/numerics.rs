//! Low-level numeric utilities: adaptive quadrature, deterministic seed
//! derivation, low-discrepancy probe sequences and small statistics helpers.
//!
//! Everything here is deterministic for fixed inputs; randomness only enters
//! through explicitly passed seeds.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod quadrature
// ---------------------------------------------------------------------------

// 15-point Kronrod abscissae on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.9914553711208126,
    0.9491079123427585,
    0.8648644233597691,
    0.7415311855993945,
    0.5860872354676911,
    0.4058451513773972,
    0.20778495500789848,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224,
    0.06309209262997856,
    0.10479001032225019,
    0.14065325971552592,
    0.1690047266392679,
    0.19035057806478542,
    0.20443294007529889,
    0.20948214108472782,
];
// Embedded 7-point Gauss weights (aligned with XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.1294849661688697,
    0.27970539148927664,
    0.3818300505051189,
    0.4179591836734694,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (fl, fr) = if x == 0.0 {
            let v = f(c);
            (v, 0.0)
        } else {
            (f(c - h * x), f(c + h * x))
        };
        let s = fl + fr;
        kronrod += wk * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Adaptive quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
/// Globally adaptive: the segment with the worst error estimate is split
/// first, so isolated kinks and jumps cost only logarithmically many splits.
/// Returns the estimate together with an error bound.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite()) || tol <= 0.0 {
        return Err(Error::Parameter("integrate: bad interval or tolerance".into()));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }

    struct Segment {
        lo: f64,
        hi: f64,
        est: f64,
        err: f64,
    }
    impl PartialEq for Segment {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err
        }
    }
    impl Eq for Segment {}
    impl PartialOrd for Segment {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Segment {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err.partial_cmp(&other.err).unwrap_or(std::cmp::Ordering::Equal)
        }
    }

    let seg = |lo: f64, hi: f64| -> Result<Segment> {
        let (est, err) = gk15(&f, lo, hi);
        if !est.is_finite() || !err.is_finite() {
            return Err(Error::Numeric("integrate: non-finite integrand".into()));
        }
        Ok(Segment { lo, hi, est, err })
    };

    const MAX_SEGMENTS: usize = 100_000;
    let mut heap = std::collections::BinaryHeap::new();
    let mut done: Vec<Segment> = Vec::new();
    let mut done_err = 0.0f64;
    heap.push(seg(a, b)?);
    let mut live_err: f64 = heap.peek().unwrap().err;
    while live_err + done_err > tol && heap.len() + done.len() < MAX_SEGMENTS {
        let Some(worst) = heap.pop() else { break };
        live_err -= worst.err;
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval exhausted at machine precision
            done_err += worst.err;
            done.push(worst);
            continue;
        }
        let left = seg(worst.lo, mid)?;
        let right = seg(mid, worst.hi)?;
        live_err += left.err + right.err;
        heap.push(left);
        heap.push(right);
    }
    let total_err = live_err + done_err;
    if total_err > tol * 16.0 {
        return Err(Error::Numeric(format!(
            "integrate: failed to converge on [{a}, {b}] (err {total_err:.3e} > tol {tol:.3e})"
        )));
    }
    let total: f64 =
        heap.iter().map(|s| s.est).sum::<f64>() + done.iter().map(|s| s.est).sum::<f64>();
    Ok((total, total_err.max(0.0)))
}

/// Adaptive quadrature over `[a, b]` split at the given interior breakpoints.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);
    let per = tol / (edges.len() - 1) as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for w in edges.windows(2) {
        let (v, e) = integrate(&f, w[0], w[1], per)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

/// Tensorized adaptive quadrature of `f` over a box, recursing over axes.
/// Intended for low dimension (cost grows geometrically with `lo.len()`).
pub fn integrate_box<F>(f: &F, lo: &[f64], hi: &[f64], tol: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    integrate_box_dyn(&|p| f(p), lo, hi, tol)
}

fn integrate_box_dyn(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::Parameter("integrate_box: dimension mismatch".into()));
    }
    if lo.len() == 1 {
        return integrate(|x| f(&[x]), lo[0], hi[0], tol);
    }
    let inner_tol = tol * 0.25;
    let g = |x0: f64| {
        let inner = move |rest: &[f64]| {
            let mut p = Vec::with_capacity(lo.len());
            p.push(x0);
            p.extend_from_slice(rest);
            f(&p)
        };
        match integrate_box_dyn(&inner, &lo[1..], &hi[1..], inner_tol) {
            Ok((v, _)) => v,
            Err(_) => f64::NAN,
        }
    };
    integrate(g, lo[0], hi[0], tol)
}

// ---------------------------------------------------------------------------
// Deterministic seed substreams
// ---------------------------------------------------------------------------

/// SplitMix64 step; the standard finalizer keeps streams well separated.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a substream seed from a master seed and a path of tags.
/// The mixing is associative-free: the same path always yields the same
/// seed, and distinct paths are scrambled apart.
pub fn substream_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master ^ 0xA076_1D64_78BD_642F;
    let mut out = splitmix64(&mut state);
    for &tag in path {
        state ^= tag.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out ^= splitmix64(&mut state);
    }
    out
}

// ---------------------------------------------------------------------------
// Deterministic probe sequences
// ---------------------------------------------------------------------------

/// Kronecker (additive) low-discrepancy sequence in `[0,1]^dim`.
/// Uses powers of the generalized golden ratio per axis.
pub fn kronecker_sequence(dim: usize, count: usize) -> Vec<Vec<f64>> {
    // x^(dim+1) = x + 1 root by Newton iteration.
    let mut g = 1.5f64;
    for _ in 0..64 {
        let p = g.powi(dim as i32 + 1) - g - 1.0;
        let dp = (dim as f64 + 1.0) * g.powi(dim as i32) - 1.0;
        g -= p / dp;
    }
    let alphas: Vec<f64> = (1..=dim).map(|i| (1.0 / g.powi(i as i32)).fract()).collect();
    let mut out = Vec::with_capacity(count);
    let mut x = vec![0.5f64; dim];
    for _ in 0..count {
        for (xi, ai) in x.iter_mut().zip(&alphas) {
            *xi = (*xi + ai).fract();
        }
        out.push(x.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ordinary least squares fit y = intercept + slope * x.
/// Returns (intercept, slope, residual 2-norm).
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Parameter("ols: need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("ols: degenerate abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - intercept - slope * u;
            e * e
        })
        .sum::<f64>()
        .sqrt();
    Ok((intercept, slope, res))
}

/// Standard normal quantile (Beasley–Springer–Moro approximation).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 4] = [2.50662823884, -18.61500062529, 41.39119773534, -25.44106049637];
    const B: [f64; 4] = [-8.47351093090, 23.08336743743, -21.06224101826, 3.13082909833];
    const C: [f64; 9] = [
        0.3374754822726147,
        0.9761690190917186,
        0.1607979714918209,
        0.0276438810333863,
        0.0038405729373609,
        0.0003951896511919,
        0.0000321767881768,
        0.0000002888167364,
        0.0000003960315187,
    ];
    let y = p - 0.5;
    if y.abs() < 0.42 {
        let r = y * y;
        let num = y * (((A[3] * r + A[2]) * r + A[1]) * r + A[0]);
        let den = (((B[3] * r + B[2]) * r + B[1]) * r + B[0]) * r + 1.0;
        return num / den;
    }
    let r = if y > 0.0 { 1.0 - p } else { p };
    let s = (-(r.ln())).ln();
    let mut t = C[0];
    let mut sp = 1.0;
    for c in C.iter().skip(1) {
        sp *= s;
        t += c * sp;
    }
    if y > 0.0 {
        t
    } else {
        -t
    }
}

/// Chi-squared upper quantile via the Wilson–Hilferty cube approximation.
/// Adequate for the large degrees of freedom used in goodness-of-fit tests.
pub fn chi2_quantile(df: f64, p: f64) -> f64 {
    let z = normal_quantile(p);
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Two-sided Kolmogorov–Smirnov critical value at significance `alpha`
/// for sample size `n` (asymptotic form).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// |w|^(p-1) with the 0^0 := 1 convention applied when p == 1.
#[inline]
pub fn pow_gamma_minus_one(w: f64, gamma_tilde: f64) -> f64 {
    if gamma_tilde == 1.0 {
        1.0
    } else {
        w.abs().powf(gamma_tilde - 1.0)
    }
}
