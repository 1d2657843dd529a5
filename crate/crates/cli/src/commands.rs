use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;

use smartgrid_coalition::data::{synth_scenario, RosterSpec};
use smartgrid_coalition::game::{build_coalition_table, shapley, CoalitionTable, Variant};
use smartgrid_coalition::horizon::{
    run_horizon, sweep_alpha, sweep_capacity, write_alpha_csv, write_capacity_csv, HorizonRun,
    Method,
};

use crate::config::{
    parse_grid, parse_methods, usage, Cli, Command, InputArgs, ShapleyArgs, SweepKind, EXIT_AUDIT,
    EXIT_OK,
};

pub fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run(args) => {
            let methods = parse_methods(&args.methods)?;
            cmd_run(&args.input, methods, args.shapley, &cli.out)
        }
        Command::Sweep(args) => match &args.kind {
            SweepKind::Alpha { input, grid } => cmd_sweep_alpha(input, grid, &cli.out),
            SweepKind::Capacity { input, grid } => cmd_sweep_capacity(input, grid, &cli.out),
        },
        Command::Shapley(args) => cmd_shapley(args, &cli.out),
        Command::Synth(args) => cmd_synth(args.seed, args.days, &cli.out),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn prepare_out(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

/// Failed post-solve checks, one message each.
#[derive(Default)]
struct Audit {
    checks: usize,
    failures: Vec<String>,
}

impl Audit {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }

    fn summary(&self) -> String {
        if self.failures.is_empty() {
            format!("audits: all {} checks passed\n", self.checks)
        } else {
            let mut s = format!(
                "audits: {} of {} checks FAILED\n",
                self.failures.len(),
                self.checks
            );
            for f in &self.failures {
                let _ = writeln!(s, "  - {f}");
            }
            s
        }
    }
}

fn audit_run(run: &HorizonRun, feas_tol: f64, delta: f64) -> Audit {
    let mut audit = Audit::default();
    for d in &run.days {
        for r in &d.methods {
            let sol = &r.dispatch;
            let obj = sol.lp_objective;
            let recon = sol.aggregate.total + sol.aggregate.penalty_charge;
            audit.check((obj - recon).abs() <= 1e-6 * (1.0 + obj.abs()), || {
                format!(
                    "day {} {}: LP objective {obj} does not reconcile with costs {recon}",
                    d.day + 1,
                    r.method
                )
            });
            if r.method == Method::Community {
                let bills = &run.utility_only_bill[d.day];
                for h in sol.households.iter().filter(|h| !h.kind.is_member()) {
                    let baseline = bills[h.household];
                    audit.check(h.cost.total <= baseline - delta + feas_tol, || {
                        format!(
                            "day {} consumer {} pays {} against baseline {baseline}",
                            d.day + 1,
                            h.id,
                            h.cost.total
                        )
                    });
                }
            }
            if let Some(s) = &r.shapley {
                let gap = s.efficiency_gap();
                audit.check(gap.abs() <= 1e-9 * (1.0 + s.grand_worth.abs()), || {
                    format!(
                        "day {} {}: Shapley payoffs miss v(M) by {gap}",
                        d.day + 1,
                        r.method
                    )
                });
            }
        }
    }
    audit
}

fn cmd_run(input: &InputArgs, methods: Vec<Method>, with_shapley: bool, out: &Path) -> Result<u8> {
    let cfg = input.config(methods, with_shapley)?;
    let delta = cfg.days[0].prices.consumer_margin;
    let out = prepare_out(out)?;
    info!("running {} days", cfg.days.len());
    let run = run_horizon(&cfg.days, &cfg.options)?;

    run.write_run_log(create(&out, "run_log.csv")?)?;
    for &m in &run.methods {
        run.write_cumulative_csv(m, create(&out, &format!("cumulative_{}.csv", m.name()))?)?;
    }
    if with_shapley {
        let dir = prepare_out(&out.join("coalitions"))?;
        for d in &run.days {
            for r in &d.methods {
                if let (Some(table), Some(alloc)) = (&r.table, &r.shapley) {
                    let stem = format!("{}_day{:02}", r.method.name(), d.day + 1);
                    table.write_csv(create(&dir, &format!("table_{stem}.csv"))?)?;
                    alloc.write_csv(create(&dir, &format!("shapley_{stem}.csv"))?)?;
                }
            }
        }
    }

    let audit = audit_run(&run, cfg.options.solver.feas_tol, delta);
    let summary = format_summary(&run) + &audit.summary();
    fs::write(out.join("summary.txt"), &summary).context("writing summary.txt")?;
    print!("{summary}");
    Ok(if audit.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

fn format_summary(run: &HorizonRun) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "days: {}  storage mode: {:?}",
        run.days.len(),
        run.storage_mode
    );
    let _ = writeln!(
        s,
        "{:<14}{:>14}{:>16}",
        "method", "members_eur", "consumers_eur"
    );
    for &m in &run.methods {
        let _ = writeln!(
            s,
            "{:<14}{:>14.4}{:>16.4}",
            m.name(),
            run.total_member_cost(m),
            run.total_consumer_cost(m)
        );
    }
    let _ = writeln!(
        s,
        "consumer utility-only bill: {:.4} EUR",
        run.total_consumer_baseline()
    );
    for m in [Method::CoalitionalResEss, Method::Community] {
        if let Some(p) = run.member_savings_pct(m) {
            let _ = writeln!(s, "{} vs individual (members): {p:.2} % saved", m.name());
        }
    }
    if let Some(p) = run.consumer_savings_pct() {
        let _ = writeln!(s, "community vs utility-only (consumers): {p:.2} % saved");
    }
    for m in [Method::CoalitionalResEss, Method::Community] {
        if run.methods.contains(&m) && run.methods.contains(&Method::Individual) {
            let worse = run.days_worse_than_individual(m, 1e-9);
            let list: Vec<String> = worse.iter().map(usize::to_string).collect();
            let _ = writeln!(
                s,
                "days where {} cost members more than individual: {}",
                m.name(),
                if list.is_empty() {
                    "none".into()
                } else {
                    list.join(", ")
                }
            );
        }
    }
    s
}

fn cmd_sweep_alpha(input: &InputArgs, grid: &str, out: &Path) -> Result<u8> {
    if input.alpha.is_some() {
        return Err(usage("--alpha cannot be combined with an alpha sweep"));
    }
    let alphas = parse_grid(grid)?;
    let cfg = input.config(vec![Method::Individual, Method::Community], false)?;
    let out = prepare_out(out)?;
    let points = sweep_alpha(&cfg.days, &alphas, &cfg.options)?;
    write_alpha_csv(&points, create(&out, "sweep_alpha.csv")?)?;

    let mut audit = Audit::default();
    println!(
        "{:>6}{:>14}{:>18}",
        "alpha", "member_worth", "consumer_savings"
    );
    for p in &points {
        println!(
            "{:>6.2}{:>14.4}{:>18.4}",
            p.alpha, p.member_worth, p.consumer_savings
        );
        audit.check(p.consumer_savings >= -1e-7 * cfg.days.len() as f64, || {
            format!(
                "alpha {}: consumer savings {} < 0",
                p.alpha, p.consumer_savings
            )
        });
        let gap = p.member_sales_revenue - p.consumer_purchase_cost;
        audit.check(gap.abs() <= 1e-9 * (1.0 + p.consumer_purchase_cost), || {
            format!(
                "alpha {}: sales revenue and purchase cost differ by {gap}",
                p.alpha
            )
        });
    }
    print!("{}", audit.summary());
    Ok(if audit.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

fn cmd_sweep_capacity(input: &InputArgs, grid: &str, out: &Path) -> Result<u8> {
    let capacities = parse_grid(grid)?;
    let cfg = input.config(Method::ALL.to_vec(), false)?;
    let out = prepare_out(out)?;
    let points = sweep_capacity(&cfg.days, &capacities, &cfg.options)?;
    write_capacity_csv(&points, create(&out, "sweep_capacity.csv")?)?;
    println!(
        "{:>10}{:>18}{:>16}{:>18}",
        "capacity", "coalitional_worth", "community_worth", "consumer_savings"
    );
    for p in &points {
        println!(
            "{:>10.2}{:>18.4}{:>16.4}{:>18.4}",
            p.capacity_kwh, p.coalitional_worth, p.community_worth, p.consumer_savings
        );
    }
    Ok(EXIT_OK)
}

/// Members whose marginal contribution to every coalition is within `tol`
/// of zero.
fn dummies(table: &CoalitionTable, tol: f64) -> Vec<bool> {
    let grand = table.grand_mask();
    (0..table.num_members())
        .map(|i| {
            let bit = 1u32 << i;
            (0..=grand).filter(|s| s & bit == 0).all(|s| {
                let with = table.worth(s | bit).unwrap_or(f64::NAN);
                let without = table.worth(s).unwrap_or(f64::NAN);
                (with - without).abs() <= tol
            })
        })
        .collect()
}

fn cmd_shapley(args: &ShapleyArgs, out: &Path) -> Result<u8> {
    if args.day == 0 {
        return Err(usage("--day is 1-based"));
    }
    if let Some(n) = args.input.days {
        if args.day > n {
            return Err(usage(format!("--day {} is beyond --days {n}", args.day)));
        }
    }
    let probe = args.input.config(Method::ALL.to_vec(), false)?;
    if args.day > probe.days.len() {
        return Err(usage(format!(
            "--day {} exceeds the {} available days",
            args.day,
            probe.days.len()
        )));
    }
    let has_consumers = !probe.days[0].consumers().is_empty();
    let variant: Variant = match args.variant {
        Some(v) => v.into(),
        None if has_consumers => Variant::Community,
        None => Variant::ResEss,
    };
    let method = match variant {
        Variant::ResEss => Method::CoalitionalResEss,
        Variant::Community => Method::Community,
    };
    let mut cfg = args.input.config(vec![Method::Individual, method], false)?;
    cfg.days.truncate(args.day);
    let run = run_horizon(&cfg.days, &cfg.options)?;
    let last = run.days.last().expect("at least one day");
    let reference = last.method(method).expect("method was run");
    let baseline = last
        .method(Method::Individual)
        .expect("individual was run")
        .individual_costs();
    let day = cfg.days[args.day - 1].with_initial_storage(&reference.initial_storage);
    let table = build_coalition_table(&day, variant, &cfg.options.solver, Some(&baseline))?;
    let alloc = shapley(&table)?;

    let out = prepare_out(out)?;
    let stem = format!("{}_day{:02}", method.name(), args.day);
    table.write_csv(create(&out, &format!("table_{stem}.csv"))?)?;
    alloc.write_csv(create(&out, &format!("shapley_{stem}.csv"))?)?;

    let flags = dummies(&table, 1e-6);
    println!(
        "day {} {:?} coalition game, {} coalitions",
        args.day,
        variant,
        table.entries.len()
    );
    println!("{:<10}{:>14}", "member", "payoff_eur");
    for ((id, p), dummy) in alloc.ids.iter().zip(&alloc.payoffs).zip(&flags) {
        let note = if *dummy {
            "  (dummy: no marginal contribution)"
        } else {
            ""
        };
        println!("{id:<10}{p:>14.6}{note}");
    }
    let gap = alloc.efficiency_gap();
    let ok = gap.abs() <= 1e-9 * (1.0 + alloc.grand_worth.abs());
    println!(
        "efficiency: sum of payoffs {:.9} vs v(M) {:.9}, gap {gap:.3e} {}",
        alloc.payoffs.iter().sum::<f64>(),
        alloc.grand_worth,
        if ok { "ok" } else { "FAILED" }
    );
    Ok(if ok { EXIT_OK } else { EXIT_AUDIT })
}

fn cmd_synth(seed: u64, days: usize, out: &Path) -> Result<u8> {
    if days == 0 {
        return Err(usage("--days must be at least 1"));
    }
    let roster = RosterSpec {
        days,
        ..RosterSpec::default()
    };
    let data = synth_scenario(seed, &roster)?;
    let out = prepare_out(out)?;
    data.scenario.save(&out.join("scenario.json"))?;
    data.series.price.save(&out.join("price.csv"))?;
    data.series.wind.save(&out.join("wind.csv"))?;
    data.series.demand.save(&out.join("demand.csv"))?;
    println!(
        "wrote scenario.json, price.csv, wind.csv and demand.csv ({} households, {} slots) to {}",
        data.scenario.households.len(),
        data.scenario.grid.slots,
        out.display()
    );
    Ok(EXIT_OK)
}
