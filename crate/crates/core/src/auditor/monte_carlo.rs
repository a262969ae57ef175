//! Sampled lower bounds on effective epsilon, for pipelines too large to
//! enumerate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::beta_reg;

use super::{Method, PrivacyReport, Witness};
use crate::error::{Error, Result};
use crate::mechanisms::{laplace_noise, MechanismSpec};
use crate::population::{NeighborPair, Population};
use crate::samplers::{PreparedDesign, SamplingDesign};
use crate::Real;

const MIN_SAMPLES: usize = 1000;
const MAX_THRESHOLDS: usize = 256;

/// One-sided Clopper-Pearson bounds for `k` successes in `n` trials: the
/// returned `(lower, upper)` each hold with probability at least `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(k <= n && n > 0, "need 0 <= k <= n, n > 0");
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else {
        solve_increasing(|p| beta_reg(kf, nf - kf + 1.0, p), alpha)
    };
    let upper = if k == n {
        1.0
    } else {
        solve_increasing(|p| beta_reg(kf + 1.0, nf - kf, p), 1.0 - alpha)
    };
    (lower, upper)
}

/// Root of `f(p) = target` on [0, 1] for increasing `f`.
fn solve_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sample_outputs<T: Real>(
    design: &SamplingDesign<T>,
    mechanism: &MechanismSpec<T>,
    population: &Population<T>,
    n: usize,
    rng: &mut ChaCha8Rng,
    centers: &mut Vec<T>,
) -> Result<Vec<T>> {
    let prepared = PreparedDesign::new(design, population)?;
    let records = population.records();
    let scale = mechanism.scale();
    let mut members = Vec::new();
    let mut outputs = Vec::with_capacity(n);
    for _ in 0..n {
        prepared.draw_into(rng, &mut members)?;
        let center = mechanism
            .query
            .evaluate(members.iter().map(|&i| &records[i]));
        if centers.len() < 4 * MAX_THRESHOLDS && !centers.contains(&center) {
            centers.push(center);
        }
        outputs.push(center + laplace_noise(scale, rng));
    }
    outputs.sort_by(|a, b| a.partial_cmp(b).expect("outputs are finite"));
    Ok(outputs)
}

/// High-confidence lower bound on effective epsilon from `n_samples` pipeline
/// runs on each side of `pair`.
///
/// Candidate events are `{a <= t}` and `{a > t}` for thresholds `t` at the
/// observed query values. For each event and direction the ratio of a
/// Clopper-Pearson lower bound on one probability to an upper bound on the
/// other is formed; the per-bound failure rate is Bonferroni-split so the
/// reported maximum holds at `confidence` overall.
pub fn mc_effective_epsilon_lower<T: Real>(
    design: &SamplingDesign<T>,
    mechanism: &MechanismSpec<T>,
    pair: &NeighborPair<T>,
    n_samples: usize,
    confidence: T,
    seed: u64,
) -> Result<PrivacyReport<T>> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let confidence = confidence.as_f64();
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence {confidence} not in (0, 1)"
        )));
    }
    let mut centers = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let base = sample_outputs(
        design,
        mechanism,
        &pair.base,
        n_samples,
        &mut rng,
        &mut centers,
    )?;
    rng.set_stream(1);
    rng.set_word_pos(0);
    let ext = sample_outputs(
        design,
        mechanism,
        &pair.extended,
        n_samples,
        &mut rng,
        &mut centers,
    )?;

    centers.sort_by(|a, b| a.partial_cmp(b).expect("centers are finite"));
    if centers.len() > MAX_THRESHOLDS {
        let step = centers.len() as f64 / MAX_THRESHOLDS as f64;
        centers = (0..MAX_THRESHOLDS)
            .map(|i| centers[(i as f64 * step) as usize])
            .collect();
    }

    // two events per threshold, two directions per event, two bounds per ratio
    let alpha = (1.0 - confidence) / (centers.len() as f64 * 8.0);
    let n = n_samples as u64;
    let ratio_lower = |num: u64, den: u64| -> Option<f64> {
        if num == 0 {
            return None;
        }
        let (lo, _) = clopper_pearson(num, n, alpha);
        let (_, hi) = clopper_pearson(den, n, alpha);
        Some((lo / hi).ln())
    };

    let mut add = (f64::NEG_INFINITY, Witness::PosInfinity);
    let mut remove = (f64::NEG_INFINITY, Witness::PosInfinity);
    for &t in &centers {
        let below_base = base.partition_point(|&a| a <= t) as u64;
        let below_ext = ext.partition_point(|&a| a <= t) as u64;
        for (k_base, k_ext) in [(below_base, below_ext), (n - below_base, n - below_ext)] {
            if let Some(v) = ratio_lower(k_ext, k_base) {
                if v > add.0 {
                    add = (v, Witness::At(t));
                }
            }
            if let Some(v) = ratio_lower(k_base, k_ext) {
                if v > remove.0 {
                    remove = (v, Witness::At(t));
                }
            }
        }
    }
    let lift = |(v, w): (f64, Witness<T>)| (T::lit(v.max(-1e300)), w);
    Ok(PrivacyReport::from_directions(
        lift(add),
        lift(remove),
        Method::MonteCarlo,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Record;

    #[test]
    fn clopper_pearson_known_values() {
        // k = 0: upper bound solves (1-p)^n = alpha
        let (lo, hi) = clopper_pearson(0, 100, 0.05);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.05f64.powf(0.01))).abs() < 1e-9);
        // k = n: lower bound solves p^n = alpha
        let (lo, hi) = clopper_pearson(50, 50, 0.025);
        assert!((lo - 0.025f64.powf(1.0 / 50.0)).abs() < 1e-9);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(30, 100, 0.05);
        assert!(lo < 0.3 && 0.3 < hi);
    }

    #[test]
    fn deterministic_and_below_exact() {
        let d = SamplingDesign::Poisson { rates: vec![0.5] };
        let mech = MechanismSpec::count(1.0).unwrap();
        let pair = Population::empty(1, 1).add_record(Record::new(1, 1, 0.0));
        let a = mc_effective_epsilon_lower(&d, &mech, &pair, 20_000, 0.95, 5).unwrap();
        let b = mc_effective_epsilon_lower(&d, &mech, &pair, 20_000, 0.95, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.eps_effective <= 0.620_114_6);
        assert!(a.eps_effective > 0.3);
        assert_eq!(a.method, Method::MonteCarlo);
    }

    #[test]
    fn identical_populations_give_no_evidence() {
        let d = SamplingDesign::Poisson { rates: vec![0.5] };
        let mech = MechanismSpec::count(1.0).unwrap();
        let p = Population::new(vec![Record::new(1, 1, 0.0); 3], 1, 1).unwrap();
        let pair = NeighborPair {
            base: p.clone(),
            extended: p,
            added: Record::new(1, 1, 0.0),
            grew_bounds: false,
        };
        let r = mc_effective_epsilon_lower(&d, &mech, &pair, 20_000, 0.95, 1).unwrap();
        assert!(r.eps_add <= 0.0 && r.eps_remove <= 0.0, "{r:?}");
    }

    #[test]
    fn rejects_tiny_sample_counts() {
        let d = SamplingDesign::Poisson { rates: vec![0.5] };
        let mech = MechanismSpec::count(1.0).unwrap();
        let pair = Population::empty(1, 1).add_record(Record::new(1, 1, 0.0));
        assert!(mc_effective_epsilon_lower(&d, &mech, &pair, 999, 0.95, 0).is_err());
    }
}
