//! Queries, the Laplace mechanism, and exact output laws as Laplace mixtures.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, Record};
use crate::samplers::OutcomeDistribution;
use crate::scalar::{log_sum_exp, Real};

/// Mixture weights below this are dropped after merging.
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Query<T> {
    /// Number of records.
    Count,
    /// Sum of record values clamped to `[lo, hi]`.
    ClampedSum { lo: T, hi: T },
}

impl<T: Real> Query<T> {
    pub fn clamped_sum(lo: T, hi: T) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "clamped_sum needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Query::ClampedSum { lo, hi })
    }

    pub fn evaluate<'a>(&self, records: impl IntoIterator<Item = &'a Record<T>>) -> T {
        match *self {
            Query::Count => T::from_count(records.into_iter().count() as u64),
            Query::ClampedSum { lo, hi } => {
                records.into_iter().map(|r| r.value.max(lo).min(hi)).sum()
            }
        }
    }

    /// The query evaluated on a whole population.
    pub fn value(&self, dataset: &Population<T>) -> T {
        self.evaluate(dataset.records())
    }

    /// Add/remove global sensitivity.
    pub fn sensitivity(&self) -> T {
        match *self {
            Query::Count => T::one(),
            Query::ClampedSum { lo, hi } => lo.abs().max(hi.abs()),
        }
    }

    /// Whether `value` lies inside the declared clamping bounds.
    pub fn admits(&self, value: T) -> bool {
        match *self {
            Query::Count => true,
            Query::ClampedSum { lo, hi } => lo <= value && value <= hi,
        }
    }

    /// Smallest and largest value a single record can contribute.
    pub fn extremes(&self) -> Option<(T, T)> {
        match *self {
            Query::Count => None,
            Query::ClampedSum { lo, hi } => Some((lo, hi)),
        }
    }
}

/// An `epsilon`-DP Laplace mechanism releasing `query + Lap(Δ/ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec<T> {
    pub query: Query<T>,
    pub epsilon: T,
}

impl<T: Real> MechanismSpec<T> {
    pub fn new(query: Query<T>, epsilon: T) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self { query, epsilon })
    }

    pub fn count(epsilon: T) -> Result<Self> {
        Self::new(Query::Count, epsilon)
    }

    /// Laplace noise scale `Δ/ε`.
    pub fn scale(&self) -> T {
        self.query.sensitivity() / self.epsilon
    }

    pub fn sample_output<R: Rng + ?Sized>(&self, dataset: &Population<T>, rng: &mut R) -> T {
        self.query.value(dataset) + laplace_noise(self.scale(), rng)
    }
}

/// One draw from `Lap(0, scale)` by inverse CDF.
pub fn laplace_noise<T: Real, R: Rng + ?Sized>(scale: T, rng: &mut R) -> T {
    // u uniform on (-1/2, 1/2]; 1 - 2|u| stays in [0, 1) and ln(0) is never hit
    // because random::<f64>() lies in [0, 1).
    let u: f64 = rng.random::<f64>() - 0.5;
    let mag = -(1.0 - 2.0 * u.abs()).ln();
    let draw = if u < 0.0 { -mag } else { mag };
    scale * T::lit(draw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component<T> {
    pub center: T,
    pub weight: T,
}

/// A finite mixture of Laplace densities sharing one scale. Centers are
/// strictly increasing and weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceMixture<T> {
    scale: T,
    components: Vec<Component<T>>,
}

impl<T: Real> LaplaceMixture<T> {
    /// A single Laplace density.
    pub fn point(center: T, scale: T) -> Result<Self> {
        Self::from_weighted(scale, [(center, T::one())])
    }

    /// Builds a mixture from unnormalized `(center, weight)` pairs, merging
    /// coincident centers and dropping negligible weights.
    pub fn from_weighted(scale: T, parts: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        Self::from_weighted_with_threshold(scale, parts, T::lit(DEFAULT_DROP_THRESHOLD))
    }

    pub fn from_weighted_with_threshold(
        scale: T,
        parts: impl IntoIterator<Item = (T, T)>,
        drop_threshold: T,
    ) -> Result<Self> {
        if !scale.is_finite() || scale <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "mixture scale must be positive, got {scale}"
            )));
        }
        let mut parts: Vec<(T, T)> = parts.into_iter().collect();
        if parts
            .iter()
            .any(|&(c, w)| !c.is_finite() || !w.is_finite() || w < T::zero())
        {
            return Err(Error::InvalidParameter(
                "mixture centers and weights must be finite, weights non-negative".into(),
            ));
        }
        parts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

        let tol = T::epsilon() * T::lit(16.0);
        let mut merged: Vec<Component<T>> = Vec::with_capacity(parts.len());
        for (center, weight) in parts {
            match merged.last_mut() {
                Some(last) if (center - last.center).abs() <= tol * T::one().max(center.abs()) => {
                    last.weight = last.weight + weight;
                }
                _ => merged.push(Component { center, weight }),
            }
        }
        let total: T = merged.iter().map(|c| c.weight).sum();
        if total.is_nan() || total <= T::zero() {
            return Err(Error::InvalidParameter("mixture has no mass".into()));
        }
        merged.retain(|c| c.weight / total >= drop_threshold);
        let total: T = merged.iter().map(|c| c.weight).sum();
        for c in &mut merged {
            c.weight = c.weight / total;
        }
        Ok(Self {
            scale,
            components: merged,
        })
    }

    /// The output law of `mechanism` applied to a sample drawn with law
    /// `outcomes`: one component per distinct query value.
    pub fn from_outcomes(
        outcomes: &OutcomeDistribution<T>,
        mechanism: &MechanismSpec<T>,
    ) -> Result<Self> {
        Self::from_outcomes_with_threshold(outcomes, mechanism, T::lit(DEFAULT_DROP_THRESHOLD))
    }

    pub fn from_outcomes_with_threshold(
        outcomes: &OutcomeDistribution<T>,
        mechanism: &MechanismSpec<T>,
        drop_threshold: T,
    ) -> Result<Self> {
        let records = outcomes.source().records();
        let parts = outcomes.entries().iter().map(|o| {
            let value = mechanism
                .query
                .evaluate(o.members.iter().map(|&i| &records[i]));
            (value, o.probability)
        });
        Self::from_weighted_with_threshold(mechanism.scale(), parts, drop_threshold)
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn centers(&self) -> impl Iterator<Item = T> + '_ {
        self.components.iter().map(|c| c.center)
    }

    pub fn min_center(&self) -> T {
        self.components[0].center
    }

    pub fn max_center(&self) -> T {
        self.components[self.components.len() - 1].center
    }

    pub fn density(&self, a: T) -> T {
        let two = T::lit(2.0);
        self.components
            .iter()
            .map(|c| c.weight * (-(a - c.center).abs() / self.scale).exp())
            .sum::<T>()
            / (two * self.scale)
    }

    /// `ln density(a)`, accurate far into the tails.
    pub fn log_density(&self, a: T) -> T {
        log_sum_exp(
            self.components
                .iter()
                .map(|c| c.weight.ln() - (a - c.center).abs() / self.scale),
        ) - (T::lit(2.0) * self.scale).ln()
    }

    /// `ln Σ w_i e^{-c_i/s}`: the density is `e^{a/s}` times this (over `2s`)
    /// for every `a` below all centers.
    pub fn log_lower_tail(&self) -> T {
        log_sum_exp(
            self.components
                .iter()
                .map(|c| c.weight.ln() - c.center / self.scale),
        )
    }

    /// `ln Σ w_i e^{c_i/s}`: the density is `e^{-a/s}` times this (over `2s`)
    /// for every `a` above all centers.
    pub fn log_upper_tail(&self) -> T {
        log_sum_exp(
            self.components
                .iter()
                .map(|c| c.weight.ln() + c.center / self.scale),
        )
    }

    /// The same mixture translated by `delta`.
    pub fn shifted(&self, delta: T) -> Self {
        Self {
            scale: self.scale,
            components: self
                .components
                .iter()
                .map(|c| Component {
                    center: c.center + delta,
                    weight: c.weight,
                })
                .collect(),
        }
    }

    pub fn cdf(&self, a: T) -> T {
        let half = T::lit(0.5);
        self.components
            .iter()
            .map(|c| {
                let z = (a - c.center) / self.scale;
                let f = if z < T::zero() {
                    half * z.exp()
                } else {
                    T::one() - half * (-z).exp()
                };
                c.weight * f
            })
            .sum()
    }
}

/// Free-function form of [`LaplaceMixture::from_outcomes`].
pub fn mixture_from_outcomes<T: Real>(
    outcomes: &OutcomeDistribution<T>,
    mechanism: &MechanismSpec<T>,
) -> Result<LaplaceMixture<T>> {
    LaplaceMixture::from_outcomes(outcomes, mechanism)
}
