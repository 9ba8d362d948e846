//! Sample summaries and fixed-width histograms.

/// Location and spread of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean; zero for fewer than two samples.
    pub std_err: f64,
    pub min: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Summarizes a non-empty sample; `None` when empty.
pub fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary {
        n,
        mean,
        std_err,
        min: sorted[0],
        p50: quantile_sorted(&sorted, 0.5),
        p95: quantile_sorted(&sorted, 0.95),
        max: sorted[n - 1],
    })
}

/// Counts over `bins` equal-width bins spanning the sample range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Builds a histogram; a constant sample yields one bin holding everything.
pub fn histogram(xs: &[f64], bins: usize) -> Histogram {
    if xs.is_empty() || bins == 0 {
        return Histogram { bin_edges: Vec::new(), counts: Vec::new() };
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Histogram { bin_edges: vec![lo, hi], counts: vec![xs.len() as u64] };
    }
    let width = (hi - lo) / bins as f64;
    let bin_edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { bin_edges, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_small_sample() {
        let s = summarize(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.n, s.min, s.max), (4, 1.0, 4.0));
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.p50, 2.0);
        assert_eq!(s.p95, 4.0);
        assert!((s.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn single_value_is_degenerate() {
        let s = summarize(&[0.7]).unwrap();
        assert_eq!((s.mean, s.p50, s.p95, s.max, s.std_err), (0.7, 0.7, 0.7, 0.7, 0.0));
        let h = histogram(&[0.7], 10);
        assert_eq!(h.counts, vec![1]);
        assert_eq!(h.bin_edges, vec![0.7, 0.7]);
    }

    #[test]
    fn histogram_counts_everything() {
        let xs: Vec<f64> = (0..100).map(f64::from).collect();
        let h = histogram(&xs, 7);
        assert_eq!(h.bin_edges.len(), 8);
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
        assert_eq!(h.bin_edges[0], 0.0);
        assert_eq!(*h.bin_edges.last().unwrap(), 99.0);
    }
}
