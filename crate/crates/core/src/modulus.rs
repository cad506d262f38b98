//! Generalized moduli of continuity and discrete Hölder seminorms.
//!
//! `omega_theta(r) = r^theta |ln r|` on `(0, r_theta]`, constant beyond the breakpoint
//! `r_theta = e^{-1/theta}` and zero at the origin. `omega_1` is the modulus of the
//! limiting regularity class between all `C^{0,alpha}`, `alpha < 1`, and `C^{0,1}`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Anything usable as a modulus of continuity `omega: [0, ∞) → [0, ∞)`.
pub trait ContinuityModulus {
    /// Evaluates the modulus; `r` is assumed finite and nonnegative.
    fn value(&self, r: f64) -> f64;
}

/// The concave modulus `omega_theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    theta: f64,
    r_theta: f64,
}

impl Modulus {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Domain(format!("theta must lie in (0, 1], got {theta}")));
        }
        Ok(Self {
            theta,
            r_theta: (-1.0 / theta).exp(),
        })
    }

    /// `omega_1`, the modulus of the main regularity statement.
    pub fn omega1() -> Self {
        Self::new(1.0).expect("theta = 1 is admissible")
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r_theta(&self) -> f64 {
        self.r_theta
    }

    /// Value on the constant branch, `r_theta^theta |ln r_theta| = 1 / (e theta)`.
    pub fn plateau(&self) -> f64 {
        self.r_theta.powf(self.theta) * self.r_theta.ln().abs()
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(format!("modulus argument must be finite and >= 0, got {r}")));
        }
        Ok(self.value(r))
    }
}

impl ContinuityModulus for Modulus {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else if r <= self.r_theta {
            r.powf(self.theta) * r.ln().abs()
        } else {
            self.plateau()
        }
    }
}

/// `omega(r) = r^alpha`; `alpha = 1` is the Lipschitz modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModulus {
    pub alpha: f64,
}

impl ContinuityModulus for PowerModulus {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        if self.alpha == 1.0 {
            r
        } else {
            r.powf(self.alpha)
        }
    }
}

/// Grid certificate for the growth condition `sup omega(a t) / (a omega(t)) < ∞`
/// over `a >= 1`, `t > 0`. Returns the largest ratio found.
pub fn om_condition_ratio(m: &impl ContinuityModulus, a_grid: &[f64], t_grid: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &a in a_grid {
        for &t in t_grid {
            let den = a * m.value(t);
            if den > 0.0 {
                worst = worst.max(m.value(a * t) / den);
            }
        }
    }
    worst
}

/// Finite samples of a real function on a planar point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    points: Vec<Vec2>,
    values: Vec<f64>,
    pub label: String,
}

impl SampledFunction {
    pub fn new(points: Vec<Vec2>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("point {i} is not finite")));
        }
        Ok(Self {
            points,
            values,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormStatus {
    /// Every pair was evaluated.
    Exact,
    /// A subsample of pairs was evaluated; the value is a lower bound.
    LowerBound,
    /// Two coincident points carry different values.
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub value: f64,
    pub argmax_pair: (usize, usize),
    pub pair_count: usize,
    pub status: SeminormStatus,
}

impl SeminormEstimate {
    pub fn is_lower_bound(&self) -> bool {
        self.status == SeminormStatus::LowerBound
    }
}

/// Options for pair subsampling on large point sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormOptions {
    /// Evaluate every pair when their count does not exceed this.
    pub max_pairs: usize,
    /// Nearest neighbours per point included in a subsample.
    pub knn: usize,
    /// Seeded uniform pairs added to a subsample.
    pub uniform_pairs: usize,
    pub seed: u64,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        Self {
            max_pairs: 200_000,
            knn: 8,
            uniform_pairs: 100_000,
            seed: 0,
        }
    }
}

/// Discrete `omega`-Hölder seminorm `max |f(p) - f(q)| / omega(|p - q|)`.
///
/// All pairs are evaluated when there are at most `max_pairs` of them; otherwise the
/// k-nearest-neighbour pairs plus a seeded uniform sample are used (see
/// [`seminorm_estimate_with`]).
pub fn seminorm_estimate(
    f: &SampledFunction,
    m: &impl ContinuityModulus,
    max_pairs: usize,
) -> Result<SeminormEstimate> {
    let opts = SeminormOptions {
        max_pairs,
        ..SeminormOptions::default()
    };
    seminorm_estimate_with(f, m, &opts)
}

pub fn seminorm_estimate_with(
    f: &SampledFunction,
    m: &impl ContinuityModulus,
    opts: &SeminormOptions,
) -> Result<SeminormEstimate> {
    let n = f.len();
    if n < 2 {
        return Err(Error::Domain("seminorm needs at least two points".into()));
    }
    if opts.max_pairs < 1 {
        return Err(Error::Domain("max_pairs must be >= 1".into()));
    }
    let total = n * (n - 1) / 2;
    let mut acc = PairMax::default();
    if total <= opts.max_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                acc.push(f, m, i, j);
            }
        }
        return Ok(acc.finish(SeminormStatus::Exact));
    }

    let mut pairs = knn_pairs(f.points(), opts.knn);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.uniform_pairs {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        pairs.push((i.min(j), i.max(j)));
    }
    for (i, j) in pairs {
        acc.push(f, m, i, j);
    }
    Ok(acc.finish(SeminormStatus::LowerBound))
}

#[derive(Default)]
struct PairMax {
    seen: bool,
    best: f64,
    arg: (usize, usize),
    count: usize,
    overflow: Option<(usize, usize)>,
}

impl PairMax {
    #[inline]
    fn push(&mut self, f: &SampledFunction, m: &impl ContinuityModulus, i: usize, j: usize) {
        self.count += 1;
        let d = (f.points[i] - f.points[j]).norm();
        let df = (f.values[i] - f.values[j]).abs();
        if d == 0.0 {
            if df > 0.0 {
                let cand = (i, j);
                if self.overflow.is_none_or(|o| cand < o) {
                    self.overflow = Some(cand);
                }
            }
            return;
        }
        let q = df / m.value(d);
        if !self.seen || q > self.best || (q == self.best && (i, j) < self.arg) {
            self.seen = true;
            self.best = q;
            self.arg = (i, j);
        }
    }

    fn finish(self, status: SeminormStatus) -> SeminormEstimate {
        match self.overflow {
            Some(arg) => SeminormEstimate {
                value: f64::INFINITY,
                argmax_pair: arg,
                pair_count: self.count,
                status: SeminormStatus::Overflow,
            },
            None => SeminormEstimate {
                value: self.best,
                argmax_pair: self.arg,
                pair_count: self.count,
                status,
            },
        }
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// All unordered pairs `(i, j)`, `i < j`, such that `j` is among the `k` nearest
/// neighbours of `i` or vice versa. Sorted and deduplicated.
pub fn knn_pairs(points: &[Vec2], k: usize) -> Vec<(usize, usize)> {
    let n = points.len();
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut pairs = Vec::with_capacity(n * k);
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
    for i in 0..n {
        heap.clear();
        let p = points[i];
        let r = rank[i];
        let consider = |j: usize, heap: &mut BinaryHeap<HeapItem>| {
            let d2 = (points[j] - p).norm_sq();
            if heap.len() < k {
                heap.push(HeapItem(d2, j));
            } else if let Some(top) = heap.peek() {
                if HeapItem(d2, j) < *top {
                    heap.pop();
                    heap.push(HeapItem(d2, j));
                }
            }
        };
        let (mut lo, mut hi) = (r, r + 1);
        loop {
            let bound = if heap.len() == k {
                heap.peek().map(|t| t.0).unwrap_or(f64::INFINITY)
            } else {
                f64::INFINITY
            };
            let left = (lo > 0).then(|| {
                let dx = points[order[lo - 1]].x - p.x;
                dx * dx
            });
            let right = (hi < n).then(|| {
                let dx = points[order[hi]].x - p.x;
                dx * dx
            });
            match (left, right) {
                (None, None) => break,
                (l, rr) => {
                    let go_left = match (l, rr) {
                        (Some(a), Some(b)) => a <= b,
                        (Some(_), None) => true,
                        _ => false,
                    };
                    let dx2 = if go_left { l.unwrap() } else { rr.unwrap() };
                    if dx2 > bound {
                        break;
                    }
                    if go_left {
                        lo -= 1;
                        consider(order[lo], &mut heap);
                    } else {
                        consider(order[hi], &mut heap);
                        hi += 1;
                    }
                }
            }
        }
        for HeapItem(_, j) in heap.drain() {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Slack in the sub-Hölder inequality `|omega_1(t2) - omega_1(t1)| <= omega_1(|t2 - t1|)`.
pub fn check_subholder(t1: f64, t2: f64) -> Result<f64> {
    let w = Modulus::omega1();
    let a = w.eval(t1)?;
    let b = w.eval(t2)?;
    Ok(w.value((t2 - t1).abs()) - (b - a).abs())
}

/// Slack in the large-separation bound
/// `sup_{|p-q| >= a} |f(p)-f(q)| / omega(|p-q|) <= (2 / omega(a)) sup |f|`,
/// evaluated over all pairs of the sample.
pub fn check_large_separation_bound(f: &SampledFunction, m: &impl ContinuityModulus, a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("separation must be positive, got {a}")));
    }
    let pts = f.points();
    let vals = f.values();
    let mut lhs = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = (pts[i] - pts[j]).norm();
            if d >= a {
                lhs = lhs.max((vals[i] - vals[j]).abs() / m.value(d));
            }
        }
    }
    Ok(2.0 / m.value(a) * f.sup_abs() - lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn eval_modulus_examples() {
        let w = Modulus::omega1();
        assert_eq!(w.eval(0.0).unwrap(), 0.0);
        assert!((w.eval(1.0 / E).unwrap() - 1.0 / E).abs() < 1e-15);
        // 0.1 ln 10, computed to 20 digits: 0.23025850929940456840
        assert!((w.eval(0.1).unwrap() - 0.230_258_509_299_404_57).abs() < 1e-15);
        assert!((w.eval(5.0).unwrap() - 1.0 / E).abs() < 1e-15);
    }

    #[test]
    fn eval_modulus_rejects_bad_arguments() {
        let w = Modulus::omega1();
        assert!(matches!(w.eval(-1e-3), Err(Error::Domain(_))));
        assert!(matches!(w.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(w.eval(f64::INFINITY), Err(Error::Domain(_))));
        assert!(Modulus::new(0.0).is_err());
        assert!(Modulus::new(1.5).is_err());
    }

    #[test]
    fn plateau_matches_breakpoint_value() {
        for theta in [0.1, 0.25, 0.5, 0.9, 1.0] {
            let m = Modulus::new(theta).unwrap();
            let rt = m.r_theta();
            let left = rt.powf(theta) * rt.ln().abs();
            assert!((left - m.plateau()).abs() < 1e-15);
            assert!((m.plateau() - 1.0 / (E * theta)).abs() < 1e-13);
            // continuity at the breakpoint
            assert!((m.value(rt * (1.0 - 1e-12)) - m.plateau()).abs() < 1e-10);
        }
    }

    #[test]
    fn om_condition_holds_on_log_grid() {
        let a: Vec<f64> = (0..40).map(|i| 10f64.powf(i as f64 * 0.15)).collect();
        let t: Vec<f64> = (0..80).map(|i| 10f64.powf(-10.0 + i as f64 * 0.15)).collect();
        for theta in [0.3, 1.0] {
            let r = om_condition_ratio(&Modulus::new(theta).unwrap(), &a, &t);
            assert!(r.is_finite() && r <= 1.0 + 1e-12, "{r}");
        }
    }

    #[test]
    fn subholder_examples() {
        assert_eq!(check_subholder(0.0, 1.0 / E).unwrap(), 0.0);
        assert!((check_subholder(1.0, 2.0).unwrap() - 1.0 / E).abs() < 1e-15);
        let m = check_subholder(0.05, 0.10).unwrap();
        // omega_1(0.05) - (omega_1(0.1) - omega_1(0.05)) = 0.1 ln 20 - 0.1 ln 10 = 0.1 ln 2
        assert!(m >= 0.0);
        assert!((m - 0.1 * 2f64.ln()).abs() < 1e-15, "{m}");
        assert!(check_subholder(-1.0, 0.0).is_err());
    }

    #[test]
    fn constant_function_has_zero_seminorm() {
        let pts: Vec<Vec2> = (0..100).map(|i| Vec2::new(i as f64 * 0.01, (i as f64).sin())).collect();
        let f = SampledFunction::new(pts, vec![3.0; 100], "const").unwrap();
        let est = seminorm_estimate(&f, &Modulus::omega1(), 10_000).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.status, SeminormStatus::Exact);
        assert_eq!(est.pair_count, 4950);
    }

    #[test]
    fn coincident_points_overflow() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0)];
        let f = SampledFunction::new(pts.clone(), vec![1.0, 2.0, 5.0], "bad").unwrap();
        let est = seminorm_estimate(&f, &Modulus::omega1(), 100).unwrap();
        assert_eq!(est.status, SeminormStatus::Overflow);
        assert!(est.value.is_infinite());
        assert_eq!(est.argmax_pair, (0, 2));
        // equal values on coincident points are harmless
        let g = SampledFunction::new(pts, vec![1.0, 2.0, 1.0], "ok").unwrap();
        assert!(seminorm_estimate(&g, &Modulus::omega1(), 100).unwrap().value.is_finite());
    }

    #[test]
    fn seminorm_errors() {
        let f = SampledFunction::new(vec![Vec2::ZERO], vec![0.0], "one").unwrap();
        assert!(seminorm_estimate(&f, &Modulus::omega1(), 10).is_err());
        assert!(SampledFunction::new(vec![Vec2::ZERO], vec![], "x").is_err());
        assert!(SampledFunction::new(vec![Vec2::new(f64::NAN, 0.0)], vec![1.0], "x").is_err());
    }

    #[test]
    fn subsample_is_flagged_lower_bound_and_deterministic() {
        let pts: Vec<Vec2> = (0..800)
            .map(|i| {
                let s = i as f64 * 0.0079;
                Vec2::new(s.cos() * (1.0 + 0.1 * s), s.sin())
            })
            .collect();
        let vals: Vec<f64> = pts.iter().map(|p| p.x * p.y).collect();
        let f = SampledFunction::new(pts, vals, "xy").unwrap();
        let w = Modulus::omega1();
        let exact = seminorm_estimate(&f, &w, 1_000_000).unwrap();
        let opts = SeminormOptions {
            max_pairs: 1000,
            uniform_pairs: 5000,
            ..SeminormOptions::default()
        };
        let a = seminorm_estimate_with(&f, &w, &opts).unwrap();
        let b = seminorm_estimate_with(&f, &w, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.is_lower_bound());
        assert!(a.value <= exact.value);
        assert!(a.value > 0.5 * exact.value);
    }

    #[test]
    fn knn_pairs_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec2> = (0..300).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
        let k = 5;
        let mut brute = Vec::new();
        for i in 0..pts.len() {
            let mut d: Vec<(f64, usize)> = (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| ((pts[i] - pts[j]).norm_sq(), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in d.iter().take(k) {
                brute.push((i.min(j), i.max(j)));
            }
        }
        brute.sort_unstable();
        brute.dedup();
        assert_eq!(knn_pairs(&pts, k), brute);
    }

    #[test]
    fn large_separation_bound_holds() {
        let pts: Vec<Vec2> = (0..200).map(|i| Vec2::new(i as f64 * 0.01, 0.0)).collect();
        let vals: Vec<f64> = pts.iter().map(|p| (7.0 * p.x).sin()).collect();
        let f = SampledFunction::new(pts, vals, "sin").unwrap();
        for a in [0.01, 0.1, 0.5, 1.5] {
            let m = check_large_separation_bound(&f, &Modulus::omega1(), a).unwrap();
            assert!(m >= -1e-12, "a = {a}: {m}");
        }
        assert!(check_large_separation_bound(&f, &Modulus::omega1(), 0.0).is_err());
    }
}
