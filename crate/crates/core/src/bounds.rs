//! Closed-form privacy parameters for sampled Laplace pipelines.
//!
//! Every formula is evaluated through `ln_1p`/`exp_m1` so small parameters
//! keep full relative precision.

use serde::{Deserialize, Serialize};

use crate::Real;

/// Per-stratum privacy parameters `(ε_1, …, ε_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedEpsilon<T> {
    pub per_stratum: Vec<T>,
}

impl<T: Real> StratifiedEpsilon<T> {
    /// The largest component, i.e. the plain DP parameter.
    pub fn max(&self) -> T {
        self.per_stratum.iter().copied().fold(T::zero(), T::max)
    }
}

/// `ln(1 + r(e^ε − 1))`: an ε-DP mechanism on a Poisson sample with rate `r`.
pub fn poisson_amplified_eps<T: Real>(eps: T, rate: T) -> T {
    (rate * eps.exp_m1()).ln_1p()
}

/// Componentwise [`poisson_amplified_eps`] over per-stratum rates.
pub fn stratified_poisson_eps<T: Real>(eps: T, rates: &[T]) -> StratifiedEpsilon<T> {
    StratifiedEpsilon {
        per_stratum: rates
            .iter()
            .map(|&r| poisson_amplified_eps(eps, r))
            .collect(),
    }
}

/// Cost of changing a record's value (and stratum) from `s` to `s2`: both
/// strata are paid for. Strata are 1-based.
pub fn value_change_eps<T: Real>(se: &StratifiedEpsilon<T>, s: usize, s2: usize) -> T {
    se.per_stratum[s - 1] + se.per_stratum[s2 - 1]
}

/// `gs · ε`: upper bound for SWoR with a data-dependent allocation of global
/// sensitivity `gs`.
pub fn degradation_eps<T: Real>(eps: T, gs: u64) -> T {
    T::from_count(gs) * eps
}

/// `ln((1 + e^{−εb}) / (e^{−ε} + e^{−εb}))`: one of two clusters chosen, one
/// empty and one of size `b`, with a record added to the empty one.
pub fn cluster_worst_eps<T: Real>(eps: T, b: u64) -> T {
    let b = T::from_count(b);
    // = ln(1 + e^{−εb}) + ε − ln(1 + e^{−ε(b−1)})
    (-eps * b).exp().ln_1p() + eps - (-eps * (b - T::one())).exp().ln_1p()
}

/// `ln((1 + e^ε) / 2)`: one of two clusters with identical output laws.
pub fn homogeneous_cluster_eps<T: Real>(eps: T) -> T {
    (eps.exp_m1() / T::lit(2.0)).ln_1p()
}

/// `ln((e^ε + e^{−ε√n/4}) / (1 + e^{−ε√n/4}))`: two i.i.d. uniform {0,1}
/// clusters of size `n` under a sum query, at the typical gap `√n/4`.
pub fn random_dp_cluster_eps<T: Real>(eps: T, n: u64) -> T {
    let gap = eps * T::from_count(n).sqrt() / T::lit(4.0);
    eps + (-gap - eps).exp().ln_1p() - (-gap).exp().ln_1p()
}

/// `r · ε`, the small-ε approximation of [`poisson_amplified_eps`].
pub fn small_eps_approx<T: Real>(eps: T, rate: T) -> T {
    rate * eps
}
