//! Sampling designs: random draws and exact outcome laws for small populations.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{allocate, AllocationOutcome, AllocationRule};
use crate::error::{check_budget, Error, Result};
use crate::population::Population;
use crate::Real;

/// What happens inside the selected clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Within<T> {
    Census,
    Poisson { rate: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum SamplingDesign<T> {
    /// Every record of stratum `i` is kept independently with `rates[i - 1]`.
    Poisson { rates: Vec<T> },
    /// Per-stratum simple random sampling without replacement of counts given
    /// by an allocation rule applied to the strata sizes.
    Swor { alloc: AllocationRule<T> },
    /// `choose` of the declared clusters uniformly at random, then `within`.
    Cluster { choose: u32, within: Within<T> },
}

impl<T: Real> SamplingDesign<T> {
    pub fn validate(&self, population: &Population<T>) -> Result<()> {
        let unit = |r: T| r >= T::zero() && r <= T::one();
        match self {
            SamplingDesign::Poisson { rates } => {
                if let Some(r) = rates.iter().find(|&&r| !unit(r)) {
                    return Err(Error::InvalidParameter(format!("rate {r} not in [0, 1]")));
                }
                if rates.len() < population.strata() as usize {
                    return Err(Error::InvalidParameter(format!(
                        "{} Poisson rates for {} strata",
                        rates.len(),
                        population.strata()
                    )));
                }
            }
            SamplingDesign::Swor { .. } => {}
            SamplingDesign::Cluster { choose, within } => {
                if *choose == 0 || *choose > population.clusters() {
                    return Err(Error::InvalidParameter(format!(
                        "cannot choose {choose} of {} clusters",
                        population.clusters()
                    )));
                }
                if let Within::Poisson { rate } = within {
                    if !unit(*rate) {
                        return Err(Error::InvalidParameter(format!(
                            "rate {rate} not in [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let join = |xs: &[T]| {
            xs.iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        match self {
            SamplingDesign::Poisson { rates } => format!("poisson({})", join(rates)),
            SamplingDesign::Swor { alloc } => format!("swor[{alloc}]"),
            SamplingDesign::Cluster { choose, within } => match within {
                Within::Census => format!("cluster({choose},census)"),
                Within::Poisson { rate } => format!("cluster({choose},poisson({rate}))"),
            },
        }
    }
}

/// One sampled sub-multiset, as indices into the source population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub members: Vec<usize>,
    pub probability: T,
}

/// The exact law of a design on a fixed population.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution<T> {
    source: Population<T>,
    entries: Vec<Outcome<T>>,
    /// Set when an infeasible allocation was truncated to the stratum size.
    truncated: bool,
}

impl<T: Real> OutcomeDistribution<T> {
    pub fn source(&self) -> &Population<T> {
        &self.source
    }

    pub fn entries(&self) -> &[Outcome<T>] {
        &self.entries
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn total_probability(&self) -> T {
        self.entries.iter().map(|o| o.probability).sum()
    }

    pub fn subset(&self, entry: usize) -> Population<T> {
        self.source.subset(&self.entries[entry].members)
    }
}

/// How an allocation larger than its stratum is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Infeasible {
    /// Sample the whole stratum and flag the outcome law as truncated.
    #[default]
    Truncate,
    /// Return [`Error::InfeasibleAllocation`].
    Error,
}

/// The exact outcome law, truncating infeasible allocations.
pub fn enumerate_outcomes<T: Real>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    budget: u64,
) -> Result<OutcomeDistribution<T>> {
    enumerate_outcomes_with(design, population, budget, Infeasible::Truncate)
}

pub fn enumerate_outcomes_with<T: Real>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    budget: u64,
    infeasible: Infeasible,
) -> Result<OutcomeDistribution<T>> {
    design.validate(population)?;
    let mut truncated = false;
    let entries = match design {
        SamplingDesign::Poisson { rates } => {
            let members: Vec<(usize, T)> = population
                .records()
                .iter()
                .enumerate()
                .map(|(i, r)| (i, rates[r.stratum as usize - 1]))
                .collect();
            poisson_law(&members, budget)?
        }
        SamplingDesign::Swor { alloc } => {
            let strata = population.stratum_members();
            let law = allocate(alloc, &population.strata_sizes())?;
            let mut required: u128 = 0;
            let mut plans = Vec::with_capacity(law.support.len());
            for (counts, p) in &law.support {
                let mut cells: u128 = 1;
                let mut plan = Vec::with_capacity(counts.len());
                for (i, (&n, members)) in counts.iter().zip(&strata).enumerate() {
                    let available = members.len() as u64;
                    let n = if n > available {
                        if infeasible == Infeasible::Error {
                            return Err(Error::InfeasibleAllocation {
                                stratum: i + 1,
                                requested: n,
                                available,
                            });
                        }
                        truncated = true;
                        available
                    } else {
                        n
                    };
                    cells = cells.saturating_mul(binomial(available, n));
                    plan.push(n as usize);
                }
                required = required.saturating_add(cells);
                plans.push((plan, *p));
            }
            check_budget(required, budget)?;
            let mut entries = Vec::with_capacity(required as usize);
            for (plan, p) in plans {
                let mut partial: Vec<(Vec<usize>, T)> = vec![(Vec::new(), p)];
                for (members, &n) in strata.iter().zip(&plan) {
                    let choices = combinations(members, n);
                    let q = T::one() / T::from_count(choices.len() as u64);
                    partial = partial
                        .into_iter()
                        .flat_map(|(acc, pa)| {
                            choices.iter().map(move |c| {
                                let mut next = acc.clone();
                                next.extend_from_slice(c);
                                (next, pa * q)
                            })
                        })
                        .collect();
                }
                entries.extend(partial.into_iter().map(|(members, probability)| Outcome {
                    members,
                    probability,
                }));
            }
            entries
        }
        SamplingDesign::Cluster { choose, within } => {
            let clusters = population.cluster_members();
            let ids: Vec<usize> = (0..clusters.len()).collect();
            let selections = binomial(clusters.len() as u64, *choose as u64);
            check_budget(selections, budget)?;
            let picks = combinations(&ids, *choose as usize);
            let q = T::one() / T::from_count(picks.len() as u64);
            let mut entries = Vec::new();
            let mut required: u128 = 0;
            for pick in picks {
                let mut chosen: Vec<usize> = pick
                    .iter()
                    .flat_map(|&c| clusters[c].iter().copied())
                    .collect();
                chosen.sort_unstable();
                match within {
                    Within::Census => {
                        required += 1;
                        entries.push(Outcome {
                            members: chosen,
                            probability: q,
                        });
                    }
                    Within::Poisson { rate } => {
                        let members: Vec<(usize, T)> = chosen.iter().map(|&i| (i, *rate)).collect();
                        let inner = poisson_law(&members, budget)?;
                        required = required.saturating_add(inner.len() as u128);
                        check_budget(required, budget)?;
                        entries.extend(inner.into_iter().map(|o| Outcome {
                            members: o.members,
                            probability: o.probability * q,
                        }));
                    }
                }
            }
            check_budget(required, budget)?;
            entries
        }
    };
    Ok(OutcomeDistribution {
        source: population.clone(),
        entries,
        truncated,
    })
}

/// Independent inclusion of each `(index, rate)`. Rates of exactly 0 or 1 do
/// not branch.
fn poisson_law<T: Real>(members: &[(usize, T)], budget: u64) -> Result<Vec<Outcome<T>>> {
    let branching = members
        .iter()
        .filter(|(_, r)| *r > T::zero() && *r < T::one())
        .count();
    let required = 1u128.checked_shl(branching as u32).unwrap_or(u128::MAX);
    check_budget(required, budget)?;
    let mut out = vec![Outcome {
        members: Vec::new(),
        probability: T::one(),
    }];
    for &(i, r) in members {
        if r <= T::zero() {
            continue;
        }
        if r >= T::one() {
            for o in &mut out {
                o.members.push(i);
            }
            continue;
        }
        let mut next = Vec::with_capacity(out.len() * 2);
        for o in out {
            let mut with = o.members.clone();
            with.push(i);
            next.push(Outcome {
                members: o.members,
                probability: o.probability * (T::one() - r),
            });
            next.push(Outcome {
                members: with,
                probability: o.probability * r,
            });
        }
        out = next;
    }
    Ok(out)
}

pub(crate) fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `n`-subsets of `items`, lexicographic.
fn combinations(items: &[usize], n: usize) -> Vec<Vec<usize>> {
    if n > items.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut pos = n;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] < items.len() - n + pos {
                idx[pos] += 1;
                for q in pos + 1..n {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Draws one sample. Infeasible allocations are an error here.
pub fn draw<T: Real, R: Rng + ?Sized>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    rng: &mut R,
) -> Result<Population<T>> {
    let mut members = Vec::new();
    draw_members(design, population, rng, &mut members)?;
    Ok(population.subset(&members))
}

/// [`draw`] writing the sampled record indices into `out` (cleared first).
pub fn draw_members<T: Real, R: Rng + ?Sized>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    PreparedDesign::new(design, population)?.draw_into(rng, out)
}

/// A design bound to one population, with stratum and cluster membership and
/// the allocation law precomputed for repeated draws.
#[derive(Debug, Clone)]
pub struct PreparedDesign<'a, T> {
    design: &'a SamplingDesign<T>,
    population: &'a Population<T>,
    strata: Vec<Vec<usize>>,
    clusters: Vec<Vec<usize>>,
    allocation: Option<AllocationOutcome<T>>,
}

impl<'a, T: Real> PreparedDesign<'a, T> {
    pub fn new(design: &'a SamplingDesign<T>, population: &'a Population<T>) -> Result<Self> {
        design.validate(population)?;
        let allocation = match design {
            SamplingDesign::Swor { alloc } => Some(allocate(alloc, &population.strata_sizes())?),
            _ => None,
        };
        Ok(Self {
            design,
            population,
            strata: population.stratum_members(),
            clusters: population.cluster_members(),
            allocation,
        })
    }

    pub fn population(&self) -> &'a Population<T> {
        self.population
    }

    /// Draws one sample into `out` (cleared first). Infeasible allocations
    /// are an error.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<usize>) -> Result<()> {
        out.clear();
        let bernoulli = |rng: &mut R, r: T| {
            r >= T::one() || (r > T::zero() && rng.random::<f64>() < r.as_f64())
        };
        match self.design {
            SamplingDesign::Poisson { rates } => {
                for (i, rec) in self.population.records().iter().enumerate() {
                    if bernoulli(rng, rates[rec.stratum as usize - 1]) {
                        out.push(i);
                    }
                }
            }
            SamplingDesign::Swor { .. } => {
                let law = self
                    .allocation
                    .as_ref()
                    .expect("swor designs carry an allocation");
                let counts = pick_weighted(&law.support, rng);
                for (i, (members, &n)) in self.strata.iter().zip(counts).enumerate() {
                    if n as usize > members.len() {
                        return Err(Error::InfeasibleAllocation {
                            stratum: i + 1,
                            requested: n,
                            available: members.len() as u64,
                        });
                    }
                    let start = out.len();
                    out.extend(
                        index::sample(rng, members.len(), n as usize)
                            .into_iter()
                            .map(|j| members[j]),
                    );
                    out[start..].sort_unstable();
                }
            }
            SamplingDesign::Cluster { choose, within } => {
                let mut picked =
                    index::sample(rng, self.clusters.len(), *choose as usize).into_vec();
                picked.sort_unstable();
                for c in picked {
                    for &i in &self.clusters[c] {
                        match within {
                            Within::Census => out.push(i),
                            Within::Poisson { rate } => {
                                if bernoulli(rng, *rate) {
                                    out.push(i);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn pick_weighted<'a, T: Real, R: Rng + ?Sized>(
    support: &'a [(Vec<u64>, T)],
    rng: &mut R,
) -> &'a [u64] {
    if support.len() == 1 {
        return &support[0].0;
    }
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (counts, p) in support {
        acc = acc + *p;
        if u < acc {
            return counts;
        }
    }
    &support[support.len() - 1].0
}

/// `P(record index is sampled)`. Poisson designs use the closed form.
pub fn inclusion_probability<T: Real>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    index: usize,
    budget: u64,
) -> Result<T> {
    check_index(population, index)?;
    if let SamplingDesign::Poisson { rates } = design {
        design.validate(population)?;
        return Ok(rates[population.records()[index].stratum as usize - 1]);
    }
    let law = enumerate_outcomes(design, population, budget)?;
    Ok(law
        .entries()
        .iter()
        .filter(|o| o.members.contains(&index))
        .map(|o| o.probability)
        .sum())
}

/// Pearson correlation of the inclusion indicators of records `i` and `j`
/// under the exact outcome law.
pub fn inclusion_correlation<T: Real>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    i: usize,
    j: usize,
    budget: u64,
) -> Result<T> {
    check_index(population, i)?;
    check_index(population, j)?;
    if i == j {
        return Err(Error::InvalidParameter(
            "correlation needs two distinct records".into(),
        ));
    }
    let law = enumerate_outcomes(design, population, budget)?;
    let (mut pi, mut pj, mut pij) = (T::zero(), T::zero(), T::zero());
    for o in law.entries() {
        let (a, b) = (o.members.contains(&i), o.members.contains(&j));
        if a {
            pi = pi + o.probability;
        }
        if b {
            pj = pj + o.probability;
        }
        if a && b {
            pij = pij + o.probability;
        }
    }
    let tol = T::epsilon().sqrt();
    let var_i = pi * (T::one() - pi);
    let var_j = pj * (T::one() - pj);
    if var_i <= tol {
        return Err(Error::DegenerateIndicator(i));
    }
    if var_j <= tol {
        return Err(Error::DegenerateIndicator(j));
    }
    Ok((pij - pi * pj) / (var_i * var_j).sqrt())
}

/// `P(i sampled | j sampled)` and `P(i sampled | j not sampled)`.
pub fn conditional_inclusion<T: Real>(
    design: &SamplingDesign<T>,
    population: &Population<T>,
    i: usize,
    j: usize,
    budget: u64,
) -> Result<(T, T)> {
    let law = enumerate_outcomes(design, population, budget)?;
    let (mut pj, mut pij, mut pi_not_j) = (T::zero(), T::zero(), T::zero());
    for o in law.entries() {
        let (a, b) = (o.members.contains(&i), o.members.contains(&j));
        if b {
            pj = pj + o.probability;
            if a {
                pij = pij + o.probability;
            }
        } else if a {
            pi_not_j = pi_not_j + o.probability;
        }
    }
    Ok((pij / pj, pi_not_j / (T::one() - pj)))
}

fn check_index<T: Real>(population: &Population<T>, index: usize) -> Result<()> {
    if index >= population.len() {
        Err(Error::IndexOutOfRange {
            index,
            len: population.len(),
        })
    } else {
        Ok(())
    }
}
