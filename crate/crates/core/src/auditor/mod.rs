//! Effective privacy loss of sampling-then-Laplace pipelines.
//!
//! The exact auditor enumerates the sampler's outcome law on both sides of a
//! neighbor pair, turns each into a [`LaplaceMixture`], and takes the supremum
//! of the log density ratio in both directions.

mod harness;
mod monte_carlo;
mod ratio;

pub use harness::{
    conjecture_harness, random_dp_harness, ConjectureGrid, ConjectureRow, RandomDpRow,
    RandomDpTable,
};
pub use monte_carlo::{clopper_pearson, mc_effective_epsilon_lower};
pub use ratio::{log_ratio_at, sup_log_ratio, tail_limits, Witness};

use serde::Serialize;

use crate::bounds::StratifiedEpsilon;
use crate::error::{check_budget, Error, Result};
use crate::mechanisms::{LaplaceMixture, MechanismSpec, DEFAULT_DROP_THRESHOLD};
use crate::population::{
    enumerate_populations, multiset_count, NeighborPair, Population, Record, Universe,
};
use crate::samplers::{enumerate_outcomes_with, Infeasible, SamplingDesign};
use crate::{Real, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
    ClosedForm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte_carlo",
            Method::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport<T: Real> {
    /// `sup ln p_ext / p_base`.
    pub eps_add: T,
    /// `sup ln p_base / p_ext`.
    pub eps_remove: T,
    pub eps_effective: T,
    /// Output attaining `eps_effective`.
    pub witness_output: Witness<T>,
    pub method: Method,
    pub per_stratum: Option<StratifiedEpsilon<T>>,
    /// Record whose addition attains `eps_effective`, for audits that search
    /// over added records.
    pub added: Option<Record<T>>,
    /// An allocation exceeded a stratum and was truncated.
    pub truncated: bool,
}

impl<T: Real> PrivacyReport<T> {
    pub fn closed_form(eps: T) -> Self {
        Self {
            eps_add: eps,
            eps_remove: eps,
            eps_effective: eps,
            witness_output: Witness::PosInfinity,
            method: Method::ClosedForm,
            per_stratum: None,
            added: None,
            truncated: false,
        }
    }

    fn from_directions(add: (T, Witness<T>), remove: (T, Witness<T>), method: Method) -> Self {
        let (eps_effective, witness_output) = if add.0 >= remove.0 { add } else { remove };
        Self {
            eps_add: add.0,
            eps_remove: remove.0,
            eps_effective: eps_effective.max(T::zero()),
            witness_output,
            method,
            per_stratum: None,
            added: None,
            truncated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions<T> {
    /// Cap on enumerated outcomes per law and on scanned pairs.
    pub budget: u64,
    pub infeasible: Infeasible,
    /// Mixture weights below this are dropped.
    pub drop_threshold: T,
}

impl<T: Real> Default for AuditOptions<T> {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            infeasible: Infeasible::Truncate,
            drop_threshold: T::lit(DEFAULT_DROP_THRESHOLD),
        }
    }
}

/// Exact output law of `mechanism ∘ design` on `population`, and whether an
/// allocation was truncated.
pub fn output_law<T: Real>(
    design: &SamplingDesign<T>,
    mechanism: &MechanismSpec<T>,
    population: &Population<T>,
    options: &AuditOptions<T>,
) -> Result<(LaplaceMixture<T>, bool)> {
    if let Some(r) = population
        .records()
        .iter()
        .find(|r| !mechanism.query.admits(r.value))
    {
        return Err(Error::InvalidParameter(format!(
            "record value {} outside the query's clamping bounds",
            r.value
        )));
    }
    let law = enumerate_outcomes_with(design, population, options.budget, options.infeasible)?;
    let mixture =
        LaplaceMixture::from_outcomes_with_threshold(&law, mechanism, options.drop_threshold)?;
    Ok((mixture, law.truncated()))
}

/// Exact add and remove effective epsilon for one neighbor pair.
pub fn exact_effective_epsilon<T: Real>(
    design: &SamplingDesign<T>,
    mechanism: &MechanismSpec<T>,
    pair: &NeighborPair<T>,
    options: &AuditOptions<T>,
) -> Result<PrivacyReport<T>> {
    let (base, t_base) = output_law(design, mechanism, &pair.base, options)?;
    let (ext, t_ext) = output_law(design, mechanism, &pair.extended, options)?;
    let mut report = PrivacyReport::from_directions(
        sup_log_ratio(&ext, &base)?,
        sup_log_ratio(&base, &ext)?,
        Method::Exact,
    );
    report.added = Some(pair.added);
    report.truncated = t_base || t_ext;
    Ok(report)
}

/// Per-stratum audit of a fixed base population: component `s` is the worst
/// exact epsilon over adding any `(s, cluster, value)` with `value` from
/// `values` and any declared cluster.
pub fn stratified_audit<T: Real>(
    design: &SamplingDesign<T>,
    mechanism: &MechanismSpec<T>,
    population: &Population<T>,
    values: &[T],
    options: &AuditOptions<T>,
) -> Result<PrivacyReport<T>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(
            "stratified audit needs at least one value".into(),
        ));
    }
    let clusters = population.clusters().max(1);
    let mut per_stratum = Vec::with_capacity(population.strata() as usize);
    let mut best: Option<PrivacyReport<T>> = None;
    let mut any_truncated = false;
    for s in 1..=population.strata() {
        let mut worst = T::zero();
        for c in 1..=clusters {
            for &v in values {
                let pair = population.add_record(Record::new(s, c, v));
                let report = exact_effective_epsilon(design, mechanism, &pair, options)?;
                any_truncated |= report.truncated;
                worst = worst.max(report.eps_effective);
                if best
                    .as_ref()
                    .is_none_or(|b| report.eps_effective > b.eps_effective)
                {
                    best = Some(report);
                }
            }
        }
        per_stratum.push(worst);
    }
    let mut report = best.unwrap_or_else(|| {
        PrivacyReport::from_directions(
            (T::zero(), Witness::PosInfinity),
            (T::zero(), Witness::PosInfinity),
            Method::Exact,
        )
    });
    report.per_stratum = Some(StratifiedEpsilon { per_stratum });
    report.truncated = any_truncated;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport<T: Real> {
    pub report: PrivacyReport<T>,
    pub witness: Option<NeighborPair<T>>,
    pub pairs_scanned: u64,
    /// Pairs where the design is undefined on either side (infeasible
    /// allocation under [`Infeasible::Error`], or an allocation rule error).
    pub pairs_skipped: u64,
}

/// Maximum exact epsilon over every population of size `<= max_size` drawn
/// from `universe`, and every single addition of a universe record.
pub fn worst_case_scan<T: Real>(
    design: &SamplingDesign<T>,
    mechanism: &MechanismSpec<T>,
    universe: &Universe<T>,
    max_size: usize,
    options: &AuditOptions<T>,
) -> Result<ScanReport<T>> {
    let additions = universe.records();
    let pairs = multiset_count(additions.len() as u64, max_size as u64)
        .saturating_mul(additions.len() as u128);
    check_budget(pairs, options.budget)?;

    let mut out = ScanReport {
        report: PrivacyReport::from_directions(
            (T::zero(), Witness::PosInfinity),
            (T::zero(), Witness::PosInfinity),
            Method::Exact,
        ),
        witness: None,
        pairs_scanned: 0,
        pairs_skipped: 0,
    };
    for base in enumerate_populations(universe, max_size, options.budget)? {
        for &record in &additions {
            let pair = base.add_record(record);
            match exact_effective_epsilon(design, mechanism, &pair, options) {
                Ok(report) => {
                    out.pairs_scanned += 1;
                    if out.witness.is_none() || report.eps_effective > out.report.eps_effective {
                        out.report = report;
                        out.witness = Some(pair);
                    }
                }
                Err(Error::InfeasibleAllocation { .. } | Error::Allocation(_)) => {
                    out.pairs_skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
