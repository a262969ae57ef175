//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's enumeration or ratio code.

#![allow(dead_code)]

/// Mixture as plain `(center, weight)` pairs with a common scale.
#[derive(Debug, Clone)]
pub struct Mix {
    pub scale: f64,
    pub parts: Vec<(f64, f64)>,
}

impl Mix {
    pub fn log_density(&self, a: f64) -> f64 {
        let terms: Vec<f64> = self
            .parts
            .iter()
            .map(|&(c, w)| w.ln() - (a - c).abs() / self.scale)
            .collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln() - (2.0 * self.scale).ln()
    }

    fn log_tail(&self, sign: f64) -> f64 {
        let terms: Vec<f64> = self
            .parts
            .iter()
            .map(|&(c, w)| w.ln() + sign * c / self.scale)
            .collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    pub fn min_center(&self) -> f64 {
        self.parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min)
    }

    pub fn max_center(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sup ln(a/b)` by brute force: a uniform grid of at least `points` points
/// over `[min c − 40s, max c + 40s]`, plus the two analytic tail limits.
/// When `lattice` is set the spacing is `1/q` for an integer `q`, so integer
/// centers fall on grid points (endpoints must then be integers).
pub fn grid_sup_log_ratio(a: &Mix, b: &Mix, points: usize, lattice: bool) -> f64 {
    let s = a.scale;
    let lo = a.min_center().min(b.min_center()) - 40.0 * s;
    let hi = a.max_center().max(b.max_center()) + 40.0 * s;
    let (n, h) = if lattice {
        let range = (hi - lo).round() as usize;
        let q = points.div_ceil(range);
        (range * q + 1, 1.0 / q as f64)
    } else {
        (points, (hi - lo) / (points - 1) as f64)
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let x = lo + i as f64 * h;
        best = best.max(a.log_density(x) - b.log_density(x));
    }
    let lower = a.log_tail(-1.0) - b.log_tail(-1.0);
    let upper = a.log_tail(1.0) - b.log_tail(1.0);
    best.max(lower).max(upper)
}

pub fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact count-query output law of SWoR with randomized rounding on one
/// stratum of `size` records, by enumerating every subset bitmask.
pub fn rr_swor_count_law(rate: f64, size: u32, eps: f64) -> Mix {
    let target = rate * size as f64;
    let lo = target.floor();
    let p_up = target - lo;
    let p_up = if p_up < 1e-12 { 0.0 } else { p_up };
    let law = [(lo as u32, 1.0 - p_up), (lo as u32 + 1, p_up)];
    let mut weights = std::collections::BTreeMap::<u32, f64>::new();
    for (n, pn) in law {
        if pn <= 0.0 || n > size {
            continue;
        }
        let per_subset = pn / binomial(size as u64, n as u64);
        for mask in 0u32..(1 << size) {
            if mask.count_ones() == n {
                *weights.entry(mask.count_ones()).or_default() += per_subset;
            }
        }
    }
    Mix {
        scale: 1.0 / eps,
        parts: weights.into_iter().map(|(c, w)| (c as f64, w)).collect(),
    }
}
