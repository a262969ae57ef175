//! Allocation rules mapping strata sizes to per-stratum sample counts, and an
//! exhaustive scanner measuring their add/remove global sensitivity.
//!
//! Deterministic apportionment is computed in exact integer arithmetic, so
//! remainder and priority ties are real ties and break toward the lowest
//! stratum index.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, Error, Result};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AllocationRule<T> {
    /// The same counts regardless of the data.
    Fixed { counts: Vec<u64> },
    /// `n` if even, `n - 1` if odd, per stratum. Has sensitivity 2.
    ParityDemo,
    /// `⌊total·|S_i|/|P|⌋`.
    ProportionalFloor { total: u64 },
    /// Largest remainder (Hamilton) apportionment of `total`.
    ProportionalHamilton { total: u64 },
    /// Huntington-Hill (equal proportions) apportionment of `total`.
    HuntingtonHill { total: u64 },
    /// `⌊r_i|S_i|⌋` or `⌈r_i|S_i|⌉`, rounding up with probability equal to
    /// the fractional part.
    RandomizedRounding { rates: Vec<T> },
}

impl<T: Real> AllocationRule<T> {
    pub fn is_randomized(&self) -> bool {
        matches!(self, AllocationRule::RandomizedRounding { .. })
    }

    /// Same rule with a different total, for rules that have one.
    pub fn with_total(&self, total: u64) -> Self {
        match self {
            AllocationRule::ProportionalFloor { .. } => AllocationRule::ProportionalFloor { total },
            AllocationRule::ProportionalHamilton { .. } => {
                AllocationRule::ProportionalHamilton { total }
            }
            AllocationRule::HuntingtonHill { .. } => AllocationRule::HuntingtonHill { total },
            other => other.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AllocationRule::Fixed { .. } => "fixed",
            AllocationRule::ParityDemo => "parity_demo",
            AllocationRule::ProportionalFloor { .. } => "proportional_floor",
            AllocationRule::ProportionalHamilton { .. } => "proportional_hamilton",
            AllocationRule::HuntingtonHill { .. } => "huntington_hill",
            AllocationRule::RandomizedRounding { .. } => "randomized_rounding",
        }
    }
}

impl<T: Real> fmt::Display for AllocationRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(";");
        match self {
            AllocationRule::Fixed { counts } => {
                write!(
                    f,
                    "fixed({})",
                    list(&mut counts.iter().map(|c| c.to_string()))
                )
            }
            AllocationRule::ParityDemo => write!(f, "parity_demo"),
            AllocationRule::ProportionalFloor { total }
            | AllocationRule::ProportionalHamilton { total }
            | AllocationRule::HuntingtonHill { total } => write!(f, "{}({total})", self.name()),
            AllocationRule::RandomizedRounding { rates } => write!(
                f,
                "randomized_rounding({})",
                list(&mut rates.iter().map(|r| r.to_string()))
            ),
        }
    }
}

/// A finite distribution over per-stratum count vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationOutcome<T> {
    pub support: Vec<(Vec<u64>, T)>,
}

impl<T: Real> AllocationOutcome<T> {
    pub fn deterministic(counts: Vec<u64>) -> Self {
        Self {
            support: vec![(counts, T::one())],
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.support.len() == 1
    }

    /// Per-stratum marginal laws, each sorted by count.
    pub fn marginals(&self) -> Vec<Vec<(u64, T)>> {
        let k = self.support.first().map_or(0, |(c, _)| c.len());
        (0..k)
            .map(|i| {
                let mut law: Vec<(u64, T)> = Vec::new();
                for (counts, p) in &self.support {
                    match law.iter_mut().find(|(c, _)| *c == counts[i]) {
                        Some(entry) => entry.1 = entry.1 + *p,
                        None => law.push((counts[i], *p)),
                    }
                }
                law.sort_by_key(|&(c, _)| c);
                law
            })
            .collect()
    }

    /// Expected count in each stratum.
    pub fn expected(&self) -> Vec<T> {
        self.marginals()
            .iter()
            .map(|law| law.iter().map(|&(c, p)| T::from_count(c) * p).sum())
            .collect()
    }
}

/// Applies `rule` to the strata sizes.
pub fn allocate<T: Real>(rule: &AllocationRule<T>, sizes: &[u64]) -> Result<AllocationOutcome<T>> {
    let population: u64 = sizes.iter().sum();
    let need_population = |total: u64| {
        if population == 0 && total > 0 {
            Err(Error::Allocation(format!(
                "cannot apportion {total} samples over an empty population"
            )))
        } else {
            Ok(())
        }
    };
    match rule {
        AllocationRule::Fixed { counts } => {
            if counts.len() != sizes.len() {
                return Err(Error::Allocation(format!(
                    "fixed allocation has {} counts for {} strata",
                    counts.len(),
                    sizes.len()
                )));
            }
            Ok(AllocationOutcome::deterministic(counts.clone()))
        }
        AllocationRule::ParityDemo => Ok(AllocationOutcome::deterministic(
            sizes.iter().map(|&n| n - n % 2).collect(),
        )),
        AllocationRule::ProportionalFloor { total } => {
            need_population(*total)?;
            Ok(AllocationOutcome::deterministic(
                quotas(*total, sizes).into_iter().map(|(q, _)| q).collect(),
            ))
        }
        AllocationRule::ProportionalHamilton { total } => {
            need_population(*total)?;
            Ok(AllocationOutcome::deterministic(hamilton(*total, sizes)))
        }
        AllocationRule::HuntingtonHill { total } => {
            need_population(*total)?;
            huntington_hill(*total, sizes).map(AllocationOutcome::deterministic)
        }
        AllocationRule::RandomizedRounding { rates } => randomized_rounding(rates, sizes),
    }
}

/// Integer quotient and remainder of `total·s_i / |P|` for each stratum.
fn quotas(total: u64, sizes: &[u64]) -> Vec<(u64, u128)> {
    let population: u128 = sizes.iter().map(|&s| s as u128).sum();
    if population == 0 {
        return vec![(0, 0); sizes.len()];
    }
    sizes
        .iter()
        .map(|&s| {
            let num = total as u128 * s as u128;
            ((num / population) as u64, num % population)
        })
        .collect()
}

fn hamilton(total: u64, sizes: &[u64]) -> Vec<u64> {
    let q = quotas(total, sizes);
    let mut counts: Vec<u64> = q.iter().map(|&(f, _)| f).collect();
    let leftover = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // Largest remainder first; stable sort keeps lowest index first on ties.
    order.sort_by(|&a, &b| q[b].1.cmp(&q[a].1));
    for &i in order.iter().take(leftover as usize) {
        counts[i] += 1;
    }
    counts
}

fn huntington_hill(total: u64, sizes: &[u64]) -> Result<Vec<u64>> {
    let nonempty = sizes.iter().filter(|&&s| s > 0).count() as u64;
    if total < nonempty {
        return Err(Error::Allocation(format!(
            "Huntington-Hill needs at least one seat per nonempty stratum: total {total} < {nonempty}"
        )));
    }
    let mut seats: Vec<u64> = sizes.iter().map(|&s| u64::from(s > 0)).collect();
    // priority s/√(a(a+1)) compared exactly as s_i²·a_j(a_j+1) vs s_j²·a_i(a_i+1)
    let beats = |i: usize, j: usize, seats: &[u64]| -> Ordering {
        let (si, sj) = (sizes[i] as u128, sizes[j] as u128);
        let (ai, aj) = (seats[i] as u128, seats[j] as u128);
        (si * si * aj * (aj + 1)).cmp(&(sj * sj * ai * (ai + 1)))
    };
    for _ in nonempty..total {
        let mut best: Option<usize> = None;
        for i in (0..sizes.len()).filter(|&i| sizes[i] > 0) {
            best = match best {
                Some(b) if beats(i, b, &seats) != Ordering::Greater => Some(b),
                _ => Some(i),
            };
        }
        match best {
            Some(b) => seats[b] += 1,
            None => break,
        }
    }
    Ok(seats)
}

fn randomized_rounding<T: Real>(rates: &[T], sizes: &[u64]) -> Result<AllocationOutcome<T>> {
    if rates.len() != sizes.len() {
        return Err(Error::Allocation(format!(
            "randomized rounding has {} rates for {} strata",
            rates.len(),
            sizes.len()
        )));
    }
    let mut support: Vec<(Vec<u64>, T)> = vec![(Vec::with_capacity(sizes.len()), T::one())];
    for (&rate, &size) in rates.iter().zip(sizes) {
        if !(rate >= T::zero() && rate <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "rate {rate} not in [0, 1]"
            )));
        }
        let (lo, p_up) = split_fraction(rate * T::from_count(size));
        let branches: Vec<(u64, T)> = if p_up > T::zero() {
            vec![(lo, T::one() - p_up), (lo + 1, p_up)]
        } else {
            vec![(lo, T::one())]
        };
        support = support
            .into_iter()
            .flat_map(|(counts, p)| {
                branches.iter().map(move |&(c, q)| {
                    let mut next = counts.clone();
                    next.push(c);
                    (next, p * q)
                })
            })
            .collect();
    }
    Ok(AllocationOutcome { support })
}

/// Floor and fractional part of a non-negative target, snapping float noise
/// (e.g. `0.7 * 10`) to the nearest integer.
fn split_fraction<T: Real>(x: T) -> (u64, T) {
    let nearest = x.round();
    let tol = T::epsilon() * T::lit(8.0) * T::one().max(x);
    let to_u64 = |v: T| v.to_u64().expect("allocation target fits u64");
    if (x - nearest).abs() <= tol {
        (to_u64(nearest), T::zero())
    } else {
        let lo = x.floor();
        (to_u64(lo), x - lo)
    }
}

/// Largest `|X_i - Y_i|` over the pairs that the monotone (quantile) coupling
/// of two laws on the integers gives positive probability, with the pair.
fn coupled_gap<T: Real>(before: &[(u64, T)], after: &[(u64, T)]) -> (u64, u64, u64) {
    let tol = T::epsilon().sqrt();
    let (mut i, mut j) = (0, 0);
    let (mut rem_x, mut rem_y) = (before[0].1, after[0].1);
    let mut best = (0, before[0].0, after[0].0);
    let mut first = true;
    loop {
        let step = rem_x.min(rem_y);
        if step > tol || first {
            let (x, y) = (before[i].0, after[j].0);
            let gap = x.abs_diff(y);
            if first || gap > best.0 {
                best = (gap, x, y);
            }
            first = false;
        }
        rem_x = rem_x - step;
        rem_y = rem_y - step;
        if rem_x <= tol {
            i += 1;
            if i == before.len() {
                break;
            }
            rem_x = rem_x + before[i].1;
        }
        if rem_y <= tol {
            j += 1;
            if j == after.len() {
                break;
            }
            rem_y = rem_y + after[j].1;
        }
    }
    best
}

/// L1 distance between two allocation laws under the per-stratum monotone
/// coupling, with the count vectors realizing it. Reduces to the plain L1
/// distance for deterministic laws.
pub fn coupled_l1<T: Real>(
    before: &AllocationOutcome<T>,
    after: &AllocationOutcome<T>,
) -> (u64, Vec<u64>, Vec<u64>) {
    let mb = before.marginals();
    let ma = after.marginals();
    let mut total = 0;
    let (mut xs, mut ys) = (Vec::with_capacity(mb.len()), Vec::with_capacity(mb.len()));
    for (b, a) in mb.iter().zip(&ma) {
        let (gap, x, y) = coupled_gap(b, a);
        total += gap;
        xs.push(x);
        ys.push(y);
    }
    (total, xs, ys)
}

/// One scanned cell: strata sizes, the stratum (1-based) receiving the added
/// unit, and the allocation before and after.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRow {
    pub sizes: Vec<u64>,
    pub stratum: usize,
    pub before: Vec<u64>,
    pub after: Vec<u64>,
    pub l1_change: u64,
}

impl ScanRow {
    /// Sizes after the addition to `stratum`.
    pub fn sizes_after(&self) -> Vec<u64> {
        let mut sizes = self.sizes.clone();
        sizes[self.stratum - 1] += 1;
        sizes
    }

    /// Whether neither allocation asks for more records than a stratum holds.
    pub fn is_feasible(&self) -> bool {
        let fits = |alloc: &[u64], sizes: &[u64]| alloc.iter().zip(sizes).all(|(a, s)| a <= s);
        fits(&self.before, &self.sizes) && fits(&self.after, &self.sizes_after())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport<T> {
    pub rule: AllocationRule<T>,
    pub k: usize,
    pub max_stratum_size: u64,
    pub observed_gs: u64,
    /// First cell attaining `observed_gs`; `None` if nothing was scanned.
    pub witness: Option<ScanRow>,
    pub cells_scanned: u64,
    /// Cells where the rule is undefined on either side (e.g. Huntington-Hill
    /// with fewer seats than nonempty strata).
    pub cells_skipped: u64,
}

/// Exhaustively measures `max ‖f(s) - f(s + e_j)‖₁` over all size vectors with
/// entries `<= max_stratum_size` and every stratum `j`.
pub fn global_sensitivity_scan<T: Real>(
    rule: &AllocationRule<T>,
    k: usize,
    max_stratum_size: u64,
    budget: u64,
) -> Result<SensitivityReport<T>> {
    global_sensitivity_scan_with(rule, k, max_stratum_size, budget, |_| {})
}

/// [`global_sensitivity_scan`], calling `visit` on every scanned cell.
pub fn global_sensitivity_scan_with<T: Real>(
    rule: &AllocationRule<T>,
    k: usize,
    max_stratum_size: u64,
    budget: u64,
    mut visit: impl FnMut(&ScanRow),
) -> Result<SensitivityReport<T>> {
    let side = max_stratum_size as u128 + 1;
    let cells = side
        .checked_pow(k as u32)
        .map_or(u128::MAX, |c| c.saturating_mul(k as u128));
    check_budget(cells, budget)?;

    let mut report = SensitivityReport {
        rule: rule.clone(),
        k,
        max_stratum_size,
        observed_gs: 0,
        witness: None,
        cells_scanned: 0,
        cells_skipped: 0,
    };
    if k == 0 {
        return Ok(report);
    }
    let mut sizes = vec![0u64; k];
    loop {
        if let Ok(before) = allocate(rule, &sizes) {
            for j in 0..k {
                let mut grown = sizes.clone();
                grown[j] += 1;
                let Ok(after) = allocate(rule, &grown) else {
                    report.cells_skipped += 1;
                    continue;
                };
                let (l1_change, b, a) = coupled_l1(&before, &after);
                let row = ScanRow {
                    sizes: sizes.clone(),
                    stratum: j + 1,
                    before: b,
                    after: a,
                    l1_change,
                };
                visit(&row);
                report.cells_scanned += 1;
                if report.witness.is_none() || l1_change > report.observed_gs {
                    report.observed_gs = l1_change;
                    report.witness = Some(row);
                }
            }
        } else {
            report.cells_skipped += k as u64;
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(report);
            }
            if sizes[pos] < max_stratum_size {
                sizes[pos] += 1;
                break;
            }
            sizes[pos] = 0;
            pos += 1;
        }
    }
}
