//! Numerics behind the consensus threshold.
//!
//! The central object is the majority map `f(x) = P(Bin(d-1, x) >= (d-1)/2)`
//! for an odd polling degree `d >= 5`: the probability that a vertex whose
//! `d-1` polled children are independently red with probability `x` sees a
//! red majority among them when its parent is assumed red. Its unique fixed
//! point `α*` in `(0, 1/2)` is the critical initial bias; below it iterating
//! `f` drives the red probability to zero doubly exponentially, which the
//! envelope `f_envelope` and the schedule `τ*` quantify.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Bracket for the fixed-point bisection.
pub const ALPHA_STAR_BRACKET: (f64, f64) = (1e-6, 0.5 - 1e-6);
/// Width at which the bisection stops; the returned midpoint is within half
/// of this of the true root.
pub const ALPHA_STAR_TOL: f64 = 1e-9;

/// `n` up to which tails are summed from exact binomial coefficients.
const DIRECT_MAX_N: u64 = 64;

/// `P(Bin(n, p) >= j)`.
///
/// For `n <= 64` each term is an exact binomial coefficient times powers of
/// `p` and `1-p`; above that every term is evaluated in log space with
/// Loader's saddle-point expansion and exponentiated once. When `j` is at
/// or below the mean the lower tail is summed and subtracted from 1. Terms are
/// accumulated with Neumaier compensation, so the result keeps relative
/// accuracy even deep in the tail.
pub fn binom_tail(n: u64, j: u64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability {p} outside [0, 1]")));
    }
    if j == 0 {
        return Ok(1.0);
    }
    if j > n {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let q = 1.0 - p;
    // Sum whichever side of the mean is smaller, so tails close to 1 come
    // out as 1 minus a small, accurately summed quantity.
    if (j as f64) <= n as f64 * p {
        Ok((1.0 - pmf_sum(n, 0, j - 1, p, q)).clamp(0.0, 1.0))
    } else {
        Ok(pmf_sum(n, j, n, p, q).min(1.0))
    }
}

/// `Σ P(Bin(n, p) = k)` for `k` in `lo..=hi`.
fn pmf_sum(n: u64, lo: u64, hi: u64, p: f64, q: f64) -> f64 {
    let mut sum = CompensatedSum::default();
    if n <= DIRECT_MAX_N {
        let mut coeff = binomial_u128(n, lo);
        for k in lo..=hi {
            sum.add(coeff as f64 * p.powi(k as i32) * q.powi((n - k) as i32));
            // C(n, k+1) = C(n, k) (n-k) / (k+1), exact in u128 for n <= 64
            coeff = coeff * (n - k) as u128 / (k + 1) as u128;
        }
    } else {
        for k in lo..=hi {
            sum.add(ln_binom_pmf(k, n, p, q).exp());
        }
    }
    sum.total()
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `ln P(Bin(n, p) = k)` via Loader's decomposition
/// `stirlerr(n) - stirlerr(k) - stirlerr(n-k) - bd0(k, np) - bd0(n-k, nq)`.
fn ln_binom_pmf(k: u64, n: u64, p: f64, q: f64) -> f64 {
    let nf = n as f64;
    if k == 0 {
        return nf * if p < 0.5 { (-p).ln_1p() } else { q.ln() };
    }
    if k == n {
        return nf * if q < 0.5 { (-q).ln_1p() } else { p.ln() };
    }
    let (kf, rest) = (k as f64, (n - k) as f64);
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(rest, nf * q);
    lc - LN_SQRT_2PI - 0.5 * (kf * rest / nf).ln()
}

/// `ln(n!) - ln(sqrt(2πn) (n/e)^n)`.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nf = n as f64;
    if n <= 15 {
        // n! is exact in f64 up to 22!
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        return fact.ln() - (nf + 0.5) * nf.ln() + nf - LN_SQRT_2PI;
    }
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance term `x ln(x/np) + np - x`, summed as a series near `x = np`
/// to avoid cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// The majority map `x -> P(Bin(d-1, x) >= (d-1)/2)` for an odd `d >= 5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorityMap {
    d: u32,
}

impl MajorityMap {
    pub fn new(d: u32) -> Result<Self> {
        if d < 5 || d.is_multiple_of(2) {
            return Err(Error::param(format!("polling degree must be odd and at least 5, got {d}")));
        }
        Ok(MajorityMap { d })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn apply(&self, x: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        let n = u64::from(self.d - 1);
        binom_tail(n, n / 2, x.clamp(0.0, 1.0)).expect("argument clamped to [0, 1]")
    }

    /// `g(x) = f(x) - x`.
    pub fn excess(&self, x: f64) -> f64 {
        self.apply(x) - x
    }

    /// The root of `g` in `(0, 1/2)`, found by bisection on
    /// [`ALPHA_STAR_BRACKET`]. `g(0) = 0` with `g'(0) = -1` and `g(1/2) > 0`
    /// force exactly one sign change there.
    pub fn fixed_point(&self) -> f64 {
        let (mut lo, mut hi) = ALPHA_STAR_BRACKET;
        debug_assert!(self.excess(lo) < 0.0 && self.excess(hi) > 0.0);
        while hi - lo > ALPHA_STAR_TOL {
            let mid = 0.5 * (lo + hi);
            if self.excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `p_h` with `p_0 = p` and `p_{τ+1} = f(p_τ)`.
    pub fn iterate(&self, p: f64, h: u32) -> f64 {
        (0..h).fold(p, |x, _| self.apply(x))
    }
}

/// Critical bias `α*` for polling degree `d`.
pub fn alpha_star(d: u32) -> Result<f64> {
    Ok(MajorityMap::new(d)?.fixed_point())
}

/// Effective polling degree: `m ∧ k` for odd `m`, `(m-1) ∧ k` for even `m`.
pub fn effective_d(m: u32, k: u32) -> Result<u32> {
    if k.is_multiple_of(2) {
        return Err(Error::param(format!("k must be odd, got {k}")));
    }
    if m == 0 {
        return Err(Error::param("m must be at least 1"));
    }
    let odd_m = if m % 2 == 1 { m } else { m - 1 };
    Ok(odd_m.min(k))
}

/// `[(1 + 1/sqrt(n-1)) 2]^(2/(n-3)) 4p(1-p)`.
pub fn f_envelope(n: u32, p: f64) -> Result<f64> {
    if n <= 3 || n.is_multiple_of(2) {
        return Err(Error::param(format!("envelope needs odd n >= 5, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability {p} outside [0, 1]")));
    }
    let nf = f64::from(n);
    let base = 2.0 * (1.0 + 1.0 / (nf - 1.0).sqrt());
    Ok(base.powf(2.0 / (nf - 3.0)) * 4.0 * p * (1.0 - p))
}

/// `(1/4) f_envelope(d, p)^(((d-1)/2)^h)`.
///
/// Always returned, even when the envelope is at least 1 and the value says
/// nothing; see [`TreeBound::applies`].
pub fn tree_root_red_bound(d: u32, p: f64, h: u32) -> Result<f64> {
    let f = f_envelope(d, p)?;
    if f == 0.0 {
        return Ok(0.0);
    }
    let exponent = (f64::from(d - 1) / 2.0).powi(h as i32);
    Ok(0.25 * (exponent * f.ln()).exp())
}

/// Exact red probability of a depth-`h` tree root under the child-only
/// majority recursion.
pub fn tree_recursion_exact(d: u32, p: f64, h: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability {p} outside [0, 1]")));
    }
    Ok(MajorityMap::new(d)?.iterate(p, h))
}

/// Envelope bound together with its inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeBound {
    pub d: u32,
    pub p: f64,
    pub h: u32,
    pub f_env: f64,
    pub bound: f64,
}

impl TreeBound {
    pub fn new(d: u32, p: f64, h: u32) -> Result<Self> {
        Ok(TreeBound {
            d,
            p,
            h,
            f_env: f_envelope(d, p)?,
            bound: tree_root_red_bound(d, p, h)?,
        })
    }

    /// The bound is informative only while the envelope is below 1.
    pub fn applies(&self) -> bool {
        self.f_env < 1.0
    }
}

/// `P(Bin(2N, p) >= N) >= P(Bin(2N+2, p) >= N+1)` for `p < 1/2`.
pub fn binprop_check(big_n: u64, p: f64) -> Result<bool> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::param(format!("p must lie in (0, 1/2), got {p}")));
    }
    if big_n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    Ok(binom_tail(2 * big_n, big_n, p)? >= binom_tail(2 * big_n + 2, big_n + 1, p)?)
}

/// The time after which the theory predicts an all-blue graph:
/// `τ* = B log_d log_d t` with `B = (1+ε) / log_d((d-1)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSchedule {
    pub d: u32,
    pub epsilon: f64,
    pub t: f64,
    pub b: f64,
    pub tau_star: f64,
}

impl ConvergenceSchedule {
    pub fn new(d: u32, epsilon: f64, t: f64) -> Result<Self> {
        MajorityMap::new(d)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        let df = f64::from(d);
        let log_d = |x: f64| x.ln() / df.ln();
        if t.is_nan() || t < df {
            return Err(Error::param(format!(
                "t = {t} is below d = {d}, so log_d log_d t is negative"
            )));
        }
        let b = (1.0 + epsilon) / log_d((df - 1.0) / 2.0);
        let double_log = log_d(log_d(t)).max(0.0);
        Ok(ConvergenceSchedule {
            d,
            epsilon,
            t,
            b,
            tau_star: b * double_log,
        })
    }

    /// `⌈τ*⌉ + 2`, the step from which the whole graph is predicted blue.
    pub fn consensus_bound(&self) -> usize {
        self.tau_star.ceil() as usize + 2
    }
}

pub fn tau_star(d: u32, epsilon: f64, t: f64) -> Result<f64> {
    Ok(ConvergenceSchedule::new(d, epsilon, t)?.tau_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_small_cases() {
        assert!((binom_tail(4, 2, 0.5).unwrap() - 11.0 / 16.0).abs() < 1e-16);
        for n in [0, 3, 70, 500] {
            for p in [0.0, 0.3, 1.0] {
                assert_eq!(binom_tail(n, 0, p).unwrap(), 1.0);
            }
            assert_eq!(binom_tail(n, n + 1, 0.7).unwrap(), 0.0);
        }
        assert!(binom_tail(4, 2, -0.1).is_err());
        assert!(binom_tail(4, 2, 1.5).is_err());
        assert!(binom_tail(4, 2, f64::NAN).is_err());
    }

    #[test]
    fn tail_at_published_fixed_point() {
        let v = binom_tail(4, 2, 0.232).unwrap();
        assert!((v - 0.2317).abs() < 5e-4, "{v}");
    }

    #[test]
    fn stirlerr_matches_known_values() {
        // ln(1!) - ln(sqrt(2π)/e)
        assert!((stirlerr(1) - 0.081_061_466_795_327_26).abs() < 1e-15);
        // both branches agree with the defining expression at the seam
        let direct = |n: u64| {
            let lf: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
            let nf = n as f64;
            lf - (nf + 0.5) * nf.ln() + nf - LN_SQRT_2PI
        };
        for n in [16u64, 20, 40, 90, 600] {
            assert!((stirlerr(n) - direct(n)).abs() < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn log_path_agrees_with_direct_path() {
        // n = 64 is summed directly; the same pmf via Loader must agree
        for &(k, p) in &[(10u64, 0.2f64), (32, 0.5), (50, 0.7), (1, 0.01)] {
            let direct = binomial_u128(64, k) as f64 * p.powi(k as i32) * (1.0 - p).powi(64 - k as i32);
            let loader = ln_binom_pmf(k, 64, p, 1.0 - p).exp();
            assert!((direct - loader).abs() <= 1e-14 * direct, "k={k} p={p}");
        }
    }

    #[test]
    fn majority_map_shape() {
        let f = MajorityMap::new(5).unwrap();
        assert_eq!(f.apply(0.0), 0.0);
        assert_eq!(f.apply(1.0), 1.0);
        let mut prev = 0.0;
        for i in 1..100 {
            let y = f.apply(i as f64 / 100.0);
            assert!(y > prev);
            prev = y;
        }
        assert!(MajorityMap::new(3).is_err());
        assert!(MajorityMap::new(6).is_err());
    }

    #[test]
    fn alpha_star_published_values() {
        for (d, expect) in [(5, 0.232), (7, 0.347), (9, 0.396), (11, 0.421)] {
            let a = alpha_star(d).unwrap();
            assert!((a - expect).abs() < 5e-4, "d={d}: {a}");
        }
        let a = alpha_star(101).unwrap();
        assert!(a > 0.45 && a < 0.5);
        assert!(alpha_star(4).is_err());
        assert!(alpha_star(3).is_err());
    }

    #[test]
    fn effective_d_rule() {
        assert_eq!(effective_d(5, 5).unwrap(), 5);
        assert_eq!(effective_d(6, 7).unwrap(), 5);
        assert_eq!(effective_d(9, 5).unwrap(), 5);
        assert_eq!(effective_d(2, 5).unwrap(), 1);
        assert!(effective_d(5, 4).is_err());
    }

    #[test]
    fn envelope_values() {
        assert_eq!(f_envelope(7, 0.0).unwrap(), 0.0);
        assert!((f_envelope(5, 0.1).unwrap() - 1.08).abs() < 1e-12);
        assert!((f_envelope(5, 0.01).unwrap() - 0.1188).abs() < 1e-12);
        assert!(f_envelope(3, 0.1).is_err());
        assert!(f_envelope(6, 0.1).is_err());
    }

    #[test]
    fn tree_bound_values() {
        let b1 = tree_root_red_bound(5, 0.01, 1).unwrap();
        assert!((b1 - 0.25 * 0.1188f64.powi(2)).abs() < 1e-15);
        let b3 = tree_root_red_bound(5, 0.01, 3).unwrap();
        assert!((b3 - 0.25 * 0.1188f64.powi(8)).abs() < 1e-20);
        assert!((b3 - 9.92e-9).abs() < 0.01e-9);
        for d in [5, 7, 11] {
            let b0 = tree_root_red_bound(d, 0.2, 0).unwrap();
            assert!((b0 - f_envelope(d, 0.2).unwrap() / 4.0).abs() < 1e-15);
        }
        let tb = TreeBound::new(5, 0.1, 2).unwrap();
        assert!(!tb.applies());
    }

    #[test]
    fn recursion_behaviour() {
        for h in 0..5 {
            assert_eq!(tree_recursion_exact(7, 0.0, h).unwrap(), 0.0);
        }
        let a = alpha_star(5).unwrap();
        for h in 0..6 {
            assert!((tree_recursion_exact(5, a, h).unwrap() - a).abs() < 1e-6);
        }
        let p1 = tree_recursion_exact(5, 0.15, 1).unwrap();
        let p4 = tree_recursion_exact(5, 0.15, 4).unwrap();
        assert!(p4 < p1 && p1 < 0.15);
    }

    #[test]
    fn binprop_examples() {
        assert!(binprop_check(2, 0.3).unwrap());
        assert!((binom_tail(4, 2, 0.3).unwrap() - 0.3483).abs() < 1e-12);
        assert!((binom_tail(6, 3, 0.3).unwrap() - 0.25569).abs() < 1e-12);
        assert!(binprop_check(1, 0.49).unwrap());
        assert!(binprop_check(1, 0.5).is_err());
        assert!(binprop_check(1, 0.0).is_err());
        assert!(binprop_check(0, 0.2).is_err());
    }

    #[test]
    fn schedule_values() {
        let s = ConvergenceSchedule::new(5, 0.1, 1e5).unwrap();
        assert!((s.b - 1.1 / (2f64.ln() / 5f64.ln())).abs() < 1e-12);
        assert!((s.tau_star - 3.12).abs() < 0.01, "{}", s.tau_star);
        assert_eq!(s.consensus_bound(), 6);
        // log_d log_d d = 0 and log_d log_d d^d = 1
        assert_eq!(tau_star(5, 0.1, 5.0).unwrap(), 0.0);
        assert!((tau_star(5, 0.1, 3125.0).unwrap() - s.b).abs() < 1e-12);
        assert!(tau_star(5, 0.1, 1e10).unwrap() > s.tau_star);
        assert!(tau_star(7, 0.1, 1e5).unwrap() < s.tau_star);
        assert!(tau_star(5, 0.1, 4.0).is_err());
        assert!(tau_star(5, 0.0, 1e5).is_err());
    }
}
