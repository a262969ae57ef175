//! Populations of labeled records under add/remove adjacency.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, Error, Result};
use crate::Real;

/// One data subject: stratum and cluster membership plus a numeric value.
/// Ids are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub stratum: u32,
    pub cluster: u32,
    pub value: T,
}

impl<T: Real> Record<T> {
    pub fn new(stratum: u32, cluster: u32, value: T) -> Self {
        Self {
            stratum,
            cluster,
            value,
        }
    }

    /// Canonical order: stratum, then cluster, then value.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.stratum
            .cmp(&other.stratum)
            .then(self.cluster.cmp(&other.cluster))
            .then(
                self.value
                    .partial_cmp(&other.value)
                    .unwrap_or(Ordering::Equal),
            )
    }
}

/// A finite multiset of records with declared numbers of strata `k` and
/// clusters `m`. Record order is insertion order and is what record indices
/// refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population<T> {
    records: Vec<Record<T>>,
    strata: u32,
    clusters: u32,
}

impl<T: Real> Population<T> {
    /// Builds a population, checking every id against the declared bounds.
    pub fn new(records: Vec<Record<T>>, strata: u32, clusters: u32) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.stratum == 0 || r.cluster == 0 {
                return Err(Error::InvalidParameter(format!(
                    "record {i}: ids are 1-based"
                )));
            }
            if r.stratum > strata || r.cluster > clusters {
                return Err(Error::InvalidParameter(format!(
                    "record {i}: stratum {} / cluster {} exceeds declared k={strata}, m={clusters}",
                    r.stratum, r.cluster
                )));
            }
        }
        Ok(Self {
            records,
            strata,
            clusters,
        })
    }

    /// Builds a population with `k` and `m` inferred as the largest ids seen.
    pub fn from_records(records: Vec<Record<T>>) -> Result<Self> {
        let strata = records.iter().map(|r| r.stratum).max().unwrap_or(0);
        let clusters = records.iter().map(|r| r.cluster).max().unwrap_or(0);
        Self::new(records, strata, clusters)
    }

    pub fn empty(strata: u32, clusters: u32) -> Self {
        Self {
            records: Vec::new(),
            strata,
            clusters,
        }
    }

    pub fn records(&self) -> &[Record<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Declared number of strata `k`.
    pub fn strata(&self) -> u32 {
        self.strata
    }

    /// Declared number of clusters `m`.
    pub fn clusters(&self) -> u32 {
        self.clusters
    }

    /// Number of records in each stratum `1..=k`.
    pub fn strata_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.strata as usize];
        for r in &self.records {
            sizes[r.stratum as usize - 1] += 1;
        }
        sizes
    }

    /// Indices of the records in each stratum, in insertion order.
    pub fn stratum_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.strata as usize];
        for (i, r) in self.records.iter().enumerate() {
            members[r.stratum as usize - 1].push(i);
        }
        members
    }

    /// Indices of the records in each cluster, in insertion order.
    pub fn cluster_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.clusters as usize];
        for (i, r) in self.records.iter().enumerate() {
            members[r.cluster as usize - 1].push(i);
        }
        members
    }

    /// Record indices sorted by (stratum, cluster, value, insertion index).
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| {
            self.records[a]
                .canonical_cmp(&self.records[b])
                .then(a.cmp(&b))
        });
        idx
    }

    /// The sub-population made of the given record indices.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            strata: self.strata,
            clusters: self.clusters,
        }
    }

    /// Adds one record, producing an add/remove neighbor pair. Declared bounds
    /// grow to fit the record if needed; [`NeighborPair::grew_bounds`] flags it.
    pub fn add_record(&self, record: Record<T>) -> NeighborPair<T> {
        let mut extended = self.clone();
        let grew = record.stratum > self.strata || record.cluster > self.clusters;
        extended.strata = extended.strata.max(record.stratum);
        extended.clusters = extended.clusters.max(record.cluster);
        extended.records.push(record);
        let mut base = self.clone();
        base.strata = extended.strata;
        base.clusters = extended.clusters;
        NeighborPair {
            base,
            extended,
            added: record,
            grew_bounds: grew,
        }
    }

    /// Removes the last copy of `record`, if present.
    pub fn remove_record(&self, record: &Record<T>) -> Option<Self> {
        let pos = self.records.iter().rposition(|r| r == record)?;
        let mut out = self.clone();
        out.records.remove(pos);
        Some(out)
    }

    /// True if both populations hold the same multiset of records.
    pub fn same_multiset(&self, other: &Self) -> bool {
        if self.records.len() != other.records.len() {
            return false;
        }
        let a = self.canonical_order();
        let b = other.canonical_order();
        a.iter()
            .zip(&b)
            .all(|(&i, &j)| self.records[i] == other.records[j])
    }
}

/// Parses `stratum,cluster,value` CSV text. An optional line starting with
/// `#` may declare `k=..` and/or `m=..`; otherwise both are inferred.
pub fn load_population<T: Real>(csv_text: &str) -> Result<Population<T>> {
    let mut declared_k = None;
    let mut declared_m = None;
    for (n, line) in csv_text.lines().enumerate() {
        let Some(directive) = line.trim().strip_prefix('#') else {
            continue;
        };
        for part in directive
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
        {
            let (key, val) = part.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("malformed directive `{part}`"),
            })?;
            let val: u32 = val.trim().parse().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("directive value `{val}` is not an integer"),
            })?;
            match key.trim() {
                "k" => declared_k = Some(val),
                "m" => declared_m = Some(val),
                other => {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: format!("unknown directive `{other}`"),
                    })
                }
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ["stratum", "cluster", "value"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `stratum,cluster,value`".into(),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let id = |field: &str, name: &str| -> Result<u32> {
            let v: i64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{name} id `{field}` is not an integer"),
            })?;
            u32::try_from(v)
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("{name} id must be positive, found {field}"),
                })
        };
        let stratum = id(&row[0], "stratum")?;
        let cluster = id(&row[1], "cluster")?;
        let value: f64 = row[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("value `{}` is not a number", &row[2]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("value `{}` is not finite", &row[2]),
            });
        }
        records.push(Record::new(stratum, cluster, T::lit(value)));
    }

    let seen_k = records.iter().map(|r| r.stratum).max().unwrap_or(0);
    let seen_m = records.iter().map(|r| r.cluster).max().unwrap_or(0);
    let k = declared_k.unwrap_or(seen_k);
    let m = declared_m.unwrap_or(seen_m);
    if k < seen_k || m < seen_m {
        return Err(Error::Parse {
            line: 1,
            message: format!("directive k={k}, m={m} is smaller than ids in the data"),
        });
    }
    Population::new(records, k, m)
}

/// An add/remove neighbor pair: `extended` is `base` plus one copy of `added`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair<T> {
    pub base: Population<T>,
    pub extended: Population<T>,
    pub added: Record<T>,
    /// Set when `added` needed larger declared `k` or `m` than `base` had.
    pub grew_bounds: bool,
}

/// A finite data universe: every combination of value, stratum and cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe<T> {
    pub values: Vec<T>,
    pub strata: u32,
    pub clusters: u32,
}

impl<T: Real> Universe<T> {
    pub fn new(values: Vec<T>, strata: u32, clusters: u32) -> Self {
        Self {
            values,
            strata,
            clusters,
        }
    }

    /// All distinct records of the universe in canonical order.
    pub fn records(&self) -> Vec<Record<T>> {
        let mut values = self.values.clone();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        values.dedup();
        let mut out = Vec::with_capacity(values.len() * (self.strata * self.clusters) as usize);
        for s in 1..=self.strata {
            for c in 1..=self.clusters {
                out.extend(values.iter().map(|&v| Record::new(s, c, v)));
            }
        }
        out
    }
}

/// Number of multisets of size at most `max_size` over `n` items:
/// `Σ_{r=0..max} C(n+r-1, r)`, saturating.
pub fn multiset_count(n: u64, max_size: u64) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1; // C(n-1, 0)
    for r in 0..=max_size {
        if r > 0 {
            if n == 0 {
                break;
            }
            // C(n+r-1, r) = C(n+r-2, r-1) * (n+r-1) / r
            term = match term.checked_mul((n + r - 1) as u128) {
                Some(v) => v / r as u128,
                None => return u128::MAX,
            };
        }
        total = total.saturating_add(term);
    }
    total
}

/// Streams every population of size `<= max_size` over `universe` exactly
/// once, by size and then in canonical (sorted) record order.
pub fn enumerate_populations<T: Real>(
    universe: &Universe<T>,
    max_size: usize,
    budget: u64,
) -> Result<PopulationStream<T>> {
    let items = universe.records();
    check_budget(multiset_count(items.len() as u64, max_size as u64), budget)?;
    Ok(PopulationStream {
        items,
        strata: universe.strata,
        clusters: universe.clusters,
        max_size,
        current: Some(Vec::new()),
    })
}

/// Iterator returned by [`enumerate_populations`].
#[derive(Debug, Clone)]
pub struct PopulationStream<T> {
    items: Vec<Record<T>>,
    strata: u32,
    clusters: u32,
    max_size: usize,
    /// Non-decreasing item indices of the next multiset.
    current: Option<Vec<usize>>,
}

impl<T: Real> PopulationStream<T> {
    fn advance(&mut self, mut idx: Vec<usize>) -> Option<Vec<usize>> {
        let n = self.items.len();
        if n == 0 {
            return None;
        }
        // Next non-decreasing sequence of the same length.
        let mut pos = idx.len();
        while pos > 0 {
            pos -= 1;
            if idx[pos] + 1 < n {
                let v = idx[pos] + 1;
                for slot in &mut idx[pos..] {
                    *slot = v;
                }
                return Some(idx);
            }
        }
        // Exhausted this size; start the next one.
        if idx.len() < self.max_size {
            Some(vec![0; idx.len() + 1])
        } else {
            None
        }
    }
}

impl<T: Real> Iterator for PopulationStream<T> {
    type Item = Population<T>;

    fn next(&mut self) -> Option<Self::Item> {
        let idx = self.current.take()?;
        let pop = Population {
            records: idx.iter().map(|&i| self.items[i]).collect(),
            strata: self.strata,
            clusters: self.clusters,
        };
        self.current = self.advance(idx);
        Some(pop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop(rows: &[(u32, u32, f64)]) -> Population<f64> {
        Population::from_records(rows.iter().map(|&(s, c, v)| Record::new(s, c, v)).collect())
            .unwrap()
    }

    #[test]
    fn load_two_records() {
        let p: Population<f64> = load_population("stratum,cluster,value\n1,1,0\n1,1,1").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!((p.strata(), p.clusters()), (1, 1));
        assert_eq!(p.records()[1].value, 1.0);
    }

    #[test]
    fn load_empty() {
        let p: Population<f64> = load_population("stratum,cluster,value\n").unwrap();
        assert!(p.is_empty());
        assert_eq!((p.strata(), p.clusters()), (0, 0));
    }

    #[test]
    fn load_infers_bounds_and_keeps_row_order() {
        let p: Population<f64> =
            load_population("stratum,cluster,value\n2,1,0.5\n1,2,1.0").unwrap();
        assert_eq!((p.strata(), p.clusters()), (2, 2));
        assert_eq!(p.records()[0], Record::new(2, 1, 0.5));
    }

    #[test]
    fn load_directive_overrides_bounds() {
        let p: Population<f64> =
            load_population("#k=3,m=4\nstratum,cluster,value\n1,1,0\n").unwrap();
        assert_eq!((p.strata(), p.clusters()), (3, 4));
        assert_eq!(p.strata_sizes(), vec![1, 0, 0]);
    }

    #[test]
    fn load_reports_line_numbers() {
        let err = load_population::<f64>("stratum,cluster,value\n1,1,0\n1,x,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = load_population::<f64>("stratum,cluster,value\n0,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = load_population::<f64>("stratum,cluster,value\n-1,1,0\n").unwrap_err();
        assert!(err.to_string().contains("positive"));
        let err = load_population::<f64>("stratum,cluster,value\n1,1,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = load_population::<f64>("stratum,cluster,value\n1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(load_population::<f64>("a,b,c\n").is_err());
    }

    #[test]
    fn add_record_to_empty() {
        let pair = Population::<f64>::empty(1, 1).add_record(Record::new(1, 1, 0.0));
        assert_eq!(pair.base.len(), 0);
        assert_eq!(pair.extended.len(), 1);
        assert!(!pair.grew_bounds);
    }

    #[test]
    fn add_record_duplicates_and_grows() {
        let p = pop(&[
            (1, 1, 0.0),
            (1, 1, 1.0),
            (1, 1, 1.0),
            (1, 1, 0.0),
            (1, 1, 2.0),
        ]);
        let pair = p.add_record(Record::new(1, 1, 1.0));
        assert_eq!(pair.extended.len(), 6);
        let ones = pair
            .extended
            .records()
            .iter()
            .filter(|r| r.value == 1.0)
            .count();
        assert_eq!(ones, 3);

        let pair = p.add_record(Record::new(3, 1, 0.0));
        assert!(pair.grew_bounds);
        assert_eq!(pair.extended.strata(), 3);
        assert_eq!(pair.base.strata(), 3);
    }

    #[test]
    fn add_then_remove_is_identity() {
        let p = pop(&[(1, 1, 0.0), (2, 1, 1.0)]);
        let r = Record::new(2, 1, 1.0);
        let back = p.add_record(r).extended.remove_record(&r).unwrap();
        assert!(back.same_multiset(&p));
        assert!(p.remove_record(&Record::new(1, 1, 5.0)).is_none());
    }

    #[test]
    fn strata_sizes_cases() {
        assert_eq!(Population::<f64>::empty(3, 1).strata_sizes(), vec![0, 0, 0]);
        let p = pop(&[(1, 1, 0.0), (1, 1, 0.0), (2, 1, 0.0)]);
        assert_eq!(p.strata_sizes(), vec![2, 1]);
        let after = p.add_record(Record::new(2, 1, 3.0)).extended.strata_sizes();
        assert_eq!(after, vec![2, 2]);
    }

    #[test]
    fn canonical_order_sorts_by_ids_then_value() {
        let p = pop(&[(2, 1, 0.0), (1, 2, 1.0), (1, 2, 0.0), (1, 1, 9.0)]);
        assert_eq!(p.canonical_order(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn enumerate_small_universes() {
        let u = Universe::new(vec![0.0, 1.0], 1, 1);
        let pops: Vec<_> = enumerate_populations(&u, 1, 100).unwrap().collect();
        assert_eq!(pops.len(), 3);
        assert!(pops[0].is_empty());

        let u0 = Universe::new(vec![0.0], 1, 1);
        let sizes: Vec<_> = enumerate_populations(&u0, 2, 100)
            .unwrap()
            .map(|p| p.len())
            .collect();
        assert_eq!(sizes, vec![0, 1, 2]);

        let values: Vec<Vec<f64>> = enumerate_populations(&u, 2, 100)
            .unwrap()
            .map(|p| p.records().iter().map(|r| r.value).collect())
            .collect();
        assert_eq!(
            values,
            vec![
                vec![],
                vec![0.0],
                vec![1.0],
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn enumerate_respects_budget() {
        let u = Universe::new(vec![0.0, 1.0], 2, 2);
        let err = enumerate_populations(&u, 10, 1000).unwrap_err();
        assert_eq!(
            err,
            Error::BudgetExceeded {
                required: multiset_count(8, 10),
                budget: 1000
            }
        );
    }

    #[test]
    fn multiset_count_matches_formula() {
        assert_eq!(multiset_count(2, 2), 6);
        assert_eq!(multiset_count(0, 5), 1);
        assert_eq!(multiset_count(3, 0), 1);
        assert_eq!(multiset_count(3, 2), 1 + 3 + 6);
    }
}
