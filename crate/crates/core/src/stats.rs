//! Small statistical helpers shared by the experiments.

/// Hill estimate of the tail index from the `k` largest observations.
///
/// Returns `k / Σ ln(x_(i) / x_(k+1))` over the top `k` order statistics,
/// the exponent of the survival function `P(X > x) ~ x^-α`. `None` if there
/// are not enough positive observations or the top values are all equal.
pub fn hill_tail_index(values: &[f64], k: usize) -> Option<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0).collect();
    if k == 0 || k >= sorted.len() {
        return None;
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let log_excess: f64 = sorted[..k].iter().map(|x| (x / threshold).ln()).sum();
    (log_excess > 0.0).then(|| k as f64 / log_excess)
}

/// Power-law exponent of the degree distribution `P(D = x) ~ x^-(1+α)`,
/// Hill-estimated on the top `fraction` of the degrees.
pub fn degree_tail_exponent(degrees: &[u64], fraction: f64) -> Option<f64> {
    let values: Vec<f64> = degrees.iter().map(|&d| d as f64).collect();
    let k = ((values.len() as f64) * fraction).round() as usize;
    hill_tail_index(&values, k).map(|alpha| 1.0 + alpha)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
/// Ties are handled exactly, so discrete samples are fine.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS statistic needs two non-empty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}
