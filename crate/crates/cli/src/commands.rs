use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;
use surveydp_core::allocation::global_sensitivity_scan_with;
use surveydp_core::auditor::{
    conjecture_harness, exact_effective_epsilon, mc_effective_epsilon_lower, random_dp_harness,
    stratified_audit, worst_case_scan, ConjectureGrid,
};
use surveydp_core::bounds::{
    cluster_worst_eps, degradation_eps, homogeneous_cluster_eps, poisson_amplified_eps,
    random_dp_cluster_eps, small_eps_approx,
};
use surveydp_core::{AllocationRule64, AuditOptions, Infeasible, PrivacyReport64};

use crate::config::{Mode, Scenario};
use crate::error::CliError;
use crate::report::{json, num, text, Table};
use crate::{
    AllocScanArgs, BoundKind, BoundsArgs, ConjectureArgs, GlobalArgs, RandomDpArgs, RuleName,
};

const AUDIT_COLUMNS: [&str; 8] = [
    "scenario",
    "eps_base",
    "design",
    "eps_add",
    "eps_remove",
    "eps_effective",
    "witness",
    "method",
];

fn finish(table: &Table, global: &GlobalArgs) -> Result<(), CliError> {
    if let Some(path) = &global.out {
        table.write(path, global.format)?;
    }
    Ok(())
}

fn options(global: &GlobalArgs) -> AuditOptions<f64> {
    AuditOptions {
        budget: global.budget,
        ..AuditOptions::default()
    }
}

fn audit_row(scenario: &Scenario, name: &str, report: &PrivacyReport64) -> Vec<Value> {
    vec![
        text(name),
        num(scenario.mechanism.epsilon),
        text(scenario.design().label()),
        num(report.eps_add),
        num(report.eps_remove),
        num(report.eps_effective),
        text(report.witness_output.to_string()),
        text(report.method.as_str()),
    ]
}

pub fn audit(path: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let scenario = Scenario::load(path)?;
    let audit = &scenario.config.audit;
    let mut opts = options(global);
    if audit.strict_feasibility {
        opts.infeasible = Infeasible::Error;
    }
    let core = |e| CliError::from_core(&scenario.name, e);
    let design = scenario.design();
    let mechanism = &scenario.mechanism;
    let mut table = Table::new(&AUDIT_COLUMNS);

    let report = match audit.mode {
        Mode::Exact => {
            let pair = scenario.population()?.add_record(scenario.added()?);
            exact_effective_epsilon(design, mechanism, &pair, &opts).map_err(core)?
        }
        Mode::Mc => {
            let pair = scenario.population()?.add_record(scenario.added()?);
            let seed = global.seed.or(audit.seed).unwrap_or(0);
            mc_effective_epsilon_lower(
                design,
                mechanism,
                &pair,
                audit.n_samples,
                audit.confidence,
                seed,
            )
            .map_err(core)?
        }
        Mode::Scan => {
            let (universe, max_size) = scenario.universe()?;
            let scan =
                worst_case_scan(design, mechanism, &universe, max_size, &opts).map_err(core)?;
            println!(
                "{}: scanned {} pairs ({} skipped as undefined)",
                scenario.name, scan.pairs_scanned, scan.pairs_skipped
            );
            if let Some(w) = &scan.witness {
                println!(
                    "  worst pair: base of {} records, strata sizes {:?}, added {:?}",
                    w.base.len(),
                    w.base.strata_sizes(),
                    w.added
                );
            }
            scan.report
        }
        Mode::Stratified => {
            let values = match &audit.values {
                Some(v) => v.clone(),
                None => mechanism
                    .query
                    .extremes()
                    .map_or(vec![0.0], |(lo, hi)| vec![lo, hi]),
            };
            let report =
                stratified_audit(design, mechanism, scenario.population()?, &values, &opts)
                    .map_err(core)?;
            if let Some(per) = &report.per_stratum {
                for (i, eps) in per.per_stratum.iter().enumerate() {
                    println!("  stratum {}: eps {eps}", i + 1);
                    let mut row = audit_row(
                        &scenario,
                        &format!("{}/stratum{}", scenario.name, i + 1),
                        &report,
                    );
                    row[3] = Value::Null;
                    row[4] = Value::Null;
                    row[5] = num(*eps);
                    row[6] = Value::Null;
                    table.push(row);
                }
            }
            report
        }
    };
    println!(
        "{}: eps_effective {} (add {}, remove {}), witness {}, method {}{}",
        scenario.name,
        report.eps_effective,
        report.eps_add,
        report.eps_remove,
        report.witness_output,
        report.method.as_str(),
        if report.truncated {
            ", allocation truncated to stratum sizes"
        } else {
            ""
        }
    );
    table.insert(0, audit_row(&scenario, &scenario.name, &report));
    finish(&table, global)
}

fn need<T: Copy>(values: &[T], flag: &str, kind: BoundKind) -> Result<Vec<Option<T>>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config(
            format!("bounds {kind:?}: --{flag} is required").to_lowercase(),
        ));
    }
    Ok(values.iter().copied().map(Some).collect())
}

fn none<T>() -> Vec<Option<T>> {
    vec![None]
}

pub fn bounds(args: &BoundsArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let kind = args.kind;
    let (rates, bs, ns, gss) = match kind {
        BoundKind::Poisson | BoundKind::SmallEps => {
            (need(&args.rate, "rate", kind)?, none(), none(), none())
        }
        BoundKind::Cluster => (none(), need(&args.b, "b", kind)?, none(), none()),
        BoundKind::RandomDp => (none(), none(), need(&args.n, "n", kind)?, none()),
        BoundKind::Degradation => (none(), none(), none(), need(&args.gs, "gs", kind)?),
        BoundKind::Homogeneous => (none(), none(), none(), none()),
    };
    if let Some(e) = args.eps.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(CliError::Config(format!(
            "--eps must be positive and finite, got {e}"
        )));
    }
    if let Some(r) = rates.iter().flatten().find(|&&r| !(0.0..=1.0).contains(&r)) {
        return Err(CliError::Config(format!(
            "--rate must lie in [0, 1], got {r}"
        )));
    }
    if bs.contains(&Some(0)) || ns.contains(&Some(0)) {
        return Err(CliError::Config("--b and --n must be positive".into()));
    }

    let name = kind
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    let mut table = Table::new(&["kind", "eps", "rate", "b", "n", "gs", "value"]);
    let mut values = Vec::new();
    for &eps in &args.eps {
        for &rate in &rates {
            for &b in &bs {
                for &n in &ns {
                    for &gs in &gss {
                        let value = match kind {
                            BoundKind::Poisson => poisson_amplified_eps(eps, rate.unwrap()),
                            BoundKind::SmallEps => small_eps_approx(eps, rate.unwrap()),
                            BoundKind::Cluster => cluster_worst_eps(eps, b.unwrap()),
                            BoundKind::RandomDp => random_dp_cluster_eps(eps, n.unwrap()),
                            BoundKind::Degradation => degradation_eps(eps, gs.unwrap()),
                            BoundKind::Homogeneous => homogeneous_cluster_eps(eps),
                        };
                        let opt = |x: Option<u64>| x.map_or(Value::Null, Value::from);
                        table.push(vec![
                            text(&name),
                            num(eps),
                            rate.map_or(Value::Null, num),
                            opt(b),
                            opt(n),
                            opt(gs),
                            num(value),
                        ]);
                        values.push((eps, rate, b, n, gs, value));
                    }
                }
            }
        }
    }
    if let [(.., value)] = values[..] {
        println!("{value:.7}");
    } else {
        for (eps, rate, b, n, gs, value) in values {
            let mut line = format!("eps={eps}");
            for (flag, v) in [
                ("rate", rate.map(|r| r.to_string())),
                ("b", b.map(|x| x.to_string())),
                ("n", n.map(|x| x.to_string())),
                ("gs", gs.map(|x| x.to_string())),
            ] {
                if let Some(v) = v {
                    line.push_str(&format!(" {flag}={v}"));
                }
            }
            println!("{line}  {value:.7}");
        }
    }
    finish(&table, global)
}

fn rule_for(args: &AllocScanArgs, total: Option<u64>) -> Result<AllocationRule64, CliError> {
    let total = || {
        total.ok_or_else(|| {
            CliError::Config(format!("alloc-scan {:?}: --total is required", args.rule))
        })
    };
    let per_stratum = |len: usize, flag: &str| {
        if len == args.k {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "alloc-scan: --{flag} needs {} values, got {len}",
                args.k
            )))
        }
    };
    Ok(match args.rule {
        RuleName::Fixed => {
            per_stratum(args.counts.len(), "counts")?;
            AllocationRule64::Fixed {
                counts: args.counts.clone(),
            }
        }
        RuleName::ParityDemo => AllocationRule64::ParityDemo,
        RuleName::ProportionalFloor => AllocationRule64::ProportionalFloor { total: total()? },
        RuleName::ProportionalHamilton => {
            AllocationRule64::ProportionalHamilton { total: total()? }
        }
        RuleName::HuntingtonHill => AllocationRule64::HuntingtonHill { total: total()? },
        RuleName::RandomizedRounding => {
            per_stratum(args.rates.len(), "rates")?;
            if let Some(r) = args.rates.iter().find(|&&r| !(0.0..=1.0).contains(&r)) {
                return Err(CliError::Config(format!(
                    "--rates must lie in [0, 1], got {r}"
                )));
            }
            AllocationRule64::RandomizedRounding {
                rates: args.rates.clone(),
            }
        }
    })
}

fn join(xs: &[u64]) -> String {
    xs.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub fn alloc_scan(args: &AllocScanArgs, global: &GlobalArgs) -> Result<(), CliError> {
    if args.k == 0 {
        return Err(CliError::Config("alloc-scan: --k must be positive".into()));
    }
    let totals: Vec<Option<u64>> = if args.total.is_empty() {
        vec![None]
    } else {
        args.total.iter().copied().map(Some).collect()
    };
    let mut table = Table::new(&[
        "rule",
        "sizes",
        "stratum",
        "before",
        "after",
        "l1_change",
        "feasible",
    ]);
    for total in totals {
        let rule = rule_for(args, total)?;
        let label = rule.to_string();
        let mut feasible_gs = 0;
        let report =
            global_sensitivity_scan_with(&rule, args.k, args.max_size, global.budget, |row| {
                if row.is_feasible() {
                    feasible_gs = feasible_gs.max(row.l1_change);
                }
                table.push(vec![
                    text(&label),
                    text(join(&row.sizes)),
                    Value::from(row.stratum),
                    text(join(&row.before)),
                    text(join(&row.after)),
                    Value::from(row.l1_change),
                    Value::from(row.is_feasible()),
                ]);
            })
            .map_err(|e| CliError::from_core(&label, e))?;
        print!(
            "{label}: observed GS {} over {} cells ({} skipped), {feasible_gs} on cells within stratum sizes",
            report.observed_gs, report.cells_scanned, report.cells_skipped
        );
        match &report.witness {
            Some(w) => println!(
                "; witness sizes {:?} +1 in stratum {}: {:?} -> {:?}",
                w.sizes, w.stratum, w.before, w.after
            ),
            None => println!(),
        }
    }
    finish(&table, global)
}

pub fn conjecture(args: &ConjectureArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let grid = ConjectureGrid {
        eps: args.eps.clone(),
        rates: args.rates.clone(),
        sizes: args.sizes.clone(),
    };
    let rows = conjecture_harness(&grid, &options(global))
        .map_err(|e| CliError::from_core("conjecture", e))?;
    let mut table = Table::new(&[
        "eps",
        "rate",
        "stratum_size",
        "exact_eps",
        "fitted_constant",
    ]);
    println!(
        "{:>6} {:>6} {:>4} {:>14} {:>10}",
        "eps", "rate", "|S|", "exact_eps", "constant"
    );
    for row in &rows {
        let constant = row
            .fitted_constant
            .map_or_else(|| "-".into(), |c| format!("{c:.6}"));
        println!(
            "{:>6} {:>6} {:>4} {:>14.10} {:>10}",
            row.eps, row.rate, row.stratum_size, row.exact_eps, constant
        );
        table.push(vec![
            num(row.eps),
            num(row.rate),
            Value::from(row.stratum_size),
            num(row.exact_eps),
            json(&row.fitted_constant),
        ]);
    }
    finish(&table, global)
}

pub fn random_dp(args: &RandomDpArgs, global: &GlobalArgs) -> Result<(), CliError> {
    if args.n == 0 || args.trials == 0 {
        return Err(CliError::Config(
            "random-dp: --n and --trials must be positive".into(),
        ));
    }
    let seed = global.seed.unwrap_or(0);
    let table_data = random_dp_harness(args.n, args.eps, args.trials, seed, &options(global))
        .map_err(|e| CliError::from_core("random-dp", e))?;
    println!(
        "n={} eps={} trials={}: exact eps q10 {:.6}, median {:.6}, q90 {:.6}; formula {:.6}",
        table_data.n,
        table_data.eps,
        args.trials,
        table_data.q10,
        table_data.median,
        table_data.q90,
        random_dp_cluster_eps(args.eps, args.n)
    );
    let mut table = Table::new(&["trial", "gap", "exact_eps", "formula_eps"]);
    for row in &table_data.rows {
        table.push(vec![
            Value::from(row.trial),
            Value::from(row.gap),
            num(row.exact_eps),
            num(row.formula_eps),
        ]);
    }
    finish(&table, global)
}
