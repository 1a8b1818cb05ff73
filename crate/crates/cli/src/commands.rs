use std::fs;

use lbt_coex::airtime::analyze;
use lbt_coex::cellular::{cell_solve, cell_transition_matrix};
use lbt_coex::markov::{stationary_distribution, StochasticMatrix};
use lbt_coex::optimizer::{optimal_cw, sweep};
use lbt_coex::sim::{compare, simulate, trace, ModelPoint, SimConfig, PRNG_ALGORITHM};
use lbt_coex::solver::distinct_roots;
use lbt_coex::wifi::{wifi_solve, wifi_transition_matrix, WifiStates};
use lbt_coex::{CellChainInput, Config, WifiChainInput};
use serde_json::json;

use crate::error::CliError;
use crate::grid::GridSpec;
use crate::output::*;
use crate::{Cli, Command, DumpChainArgs, SweepArgs, Tech, ValidateArgs, ZRange};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let out = OutputDir::create(&cli.out_dir)?;
    match &cli.command {
        Command::Analyze => cmd_analyze(&cfg, out),
        Command::Optimize(z) => cmd_optimize(&cfg, z, out),
        Command::Sweep(args) => cmd_sweep(&cfg, args, out),
        Command::Validate(args) => cmd_validate(&cfg, args, out),
        Command::DumpChain(args) => cmd_dump_chain(&cfg, args, out),
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Config::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    for (key, value) in cli.overrides.pairs() {
        cfg.set_field(key, value)
            .map_err(|reason| CliError::Usage(format!("--{key}: {reason}")))?;
    }
    cfg.check()?;
    Ok(cfg)
}

fn check_range(z: &ZRange) -> Result<(), CliError> {
    if z.z_min > z.z_max || z.z_min < 2 {
        return Err(CliError::Usage(format!(
            "empty or invalid Z range [{}, {}]: need 2 <= z-min <= z-max",
            z.z_min, z.z_max
        )));
    }
    Ok(())
}

fn cmd_analyze(cfg: &Config, mut out: OutputDir) -> Result<(), CliError> {
    let (fp, rep) = analyze(cfg)?;
    println!("tau_w={}", fp.tau_wifi.get());
    println!("tau_c={}", fp.tau_cell.get());
    println!("p_w={}", fp.p_wifi.get());
    println!("p_c={}", fp.p_cell.get());
    println!(
        "residual={:e} iterations={} converged={}",
        fp.residual_inf_norm, fp.iterations, fp.converged
    );
    println!("t_state_us={}", rep.t_state_us);
    println!("s_w_bps={}", rep.s_wifi);
    println!("s_c_bps={}", rep.s_cell);
    println!("s_total_bps={}", rep.s_total);
    if fp.converged && distinct_roots(cfg, 1e-6)?.len() > 1 {
        eprintln!("warning: more than one fixed point found from scattered starts");
    }
    let row = vec![
        num(cfg.q_wifi),
        num(cfg.q_cell),
        cfg.cw_cell.to_string(),
        num(fp.tau_wifi.get()),
        num(fp.tau_cell.get()),
        num(fp.p_wifi.get()),
        num(fp.p_cell.get()),
        num(fp.residual_inf_norm),
        fp.iterations.to_string(),
        fp.converged.to_string(),
        num(rep.t_state_us),
        num(rep.s_wifi),
        num(rep.s_cell),
        num(rep.s_total),
    ];
    out.write_csv("analyze.csv", ANALYZE_SCHEMA, &ANALYZE_HEADER, [row])?;
    out.finish(ManifestInput {
        command: "analyze",
        config: cfg,
        options: json!({}),
        prng: None,
    })?;
    if !fp.converged {
        return Err(CliError::Numerical(format!(
            "fixed point did not converge (residual {:e})",
            fp.residual_inf_norm
        )));
    }
    Ok(())
}

fn cmd_optimize(cfg: &Config, z: &ZRange, mut out: OutputDir) -> Result<(), CliError> {
    check_range(z)?;
    let res = optimal_cw(cfg, z.z_min, z.z_max)?;
    let rows = res.trace.iter().map(|t| {
        vec![
            num(cfg.q_wifi),
            num(cfg.q_cell),
            t.z.to_string(),
            num(t.s_co_wifi),
            num(t.s_co_cell),
            num(t.s_only_wifi),
            t.constraint_met.to_string(),
            num(t.s_total),
        ]
    });
    out.write_csv("optimize_trace.csv", TRACES_SCHEMA, &TRACES_HEADER, rows)?;
    let script = "set datafile separator ','\n\
                  set terminal pngcairo size 640,480\n\
                  set output 'optimize_trace.png'\n\
                  set xlabel 'Z'\n\
                  set ylabel 'throughput per node (bit/s)'\n\
                  plot 'optimize_trace.csv' every ::1 using 3:4 with linespoints title 'Wi-Fi AP', \\\n     \
                  '' every ::1 using 3:5 with linespoints title 'SCBS', \\\n     \
                  '' every ::1 using 3:6 with lines title 'Wi-Fi-only baseline'\n";
    out.write_bytes("optimize_trace.gp", script.as_bytes())?;
    out.finish(ManifestInput {
        command: "optimize",
        config: cfg,
        options: json!({ "z_min": z.z_min, "z_max": z.z_max }),
        prng: None,
    })?;
    println!("baseline_bps={}", res.baseline);
    match res.z_star {
        Some(z) => println!("z_star={z}"),
        None => println!("INFEASIBLE"),
    }
    Ok(())
}

fn cmd_sweep(cfg: &Config, args: &SweepArgs, mut out: OutputDir) -> Result<(), CliError> {
    check_range(&args.z)?;
    let grid = GridSpec::parse(&args.grid)?;
    let rates = if args.rates.is_empty() {
        vec![cfg.rate_cell]
    } else {
        args.rates.clone()
    };
    let mut summary = Vec::new();
    for &rate in &rates {
        let mut c = cfg.clone();
        c.set_field("R_C", &rate.to_string())
            .map_err(|reason| CliError::Usage(format!("--rates: {reason}")))?;
        c.check()?;
        let g = sweep(
            &grid.q_wifi,
            &grid.q_cell,
            &c,
            (args.z.z_min, args.z.z_max),
            args.reference_z,
        )?;
        let stem = format!("sweep_rc{}", rate);
        let rows = g.cells.iter().map(|cell| {
            let best = cell.result.best();
            vec![
                num(cell.q_wifi),
                num(cell.q_cell),
                cell.result
                    .z_star
                    .map(|z| z.to_string())
                    .unwrap_or_default(),
                cell.result.feasible.to_string(),
                best.map(|b| num(b.s_total)).unwrap_or_default(),
                cell.improvement.map(num).unwrap_or_default(),
            ]
        });
        let csv_name = format!("{stem}.csv");
        out.write_csv(&csv_name, GRID_SCHEMA, &GRID_HEADER, rows)?;
        for (col, what) in [(3, "zstar"), (6, "improvement")] {
            let title = format!("{what}, R_C = {rate} bit/s");
            let script = heatmap_script(&csv_name, col, &title, &format!("{stem}_{what}.png"));
            out.write_bytes(&format!("{stem}_{what}.gp"), script.as_bytes())?;
        }
        let mean = g.mean_improvement();
        println!(
            "R_C={rate} feasible={}/{} mean_improvement={}",
            g.feasible_cells(),
            g.cells.len(),
            mean.map(|m| format!("{:.2}%", 100.0 * m))
                .unwrap_or_else(|| "n/a".into())
        );
        summary.push(vec![
            num(rate),
            g.cells.len().to_string(),
            g.feasible_cells().to_string(),
            mean.map(num).unwrap_or_default(),
            args.reference_z.to_string(),
        ]);
    }
    out.write_csv(
        "sweep_summary.csv",
        SUMMARY_SCHEMA,
        &SUMMARY_HEADER,
        summary,
    )?;
    out.finish(ManifestInput {
        command: "sweep",
        config: cfg,
        options: json!({
            "grid": args.grid,
            "q_w": grid.q_wifi,
            "q_c": grid.q_cell,
            "rates": rates,
            "z_min": args.z.z_min,
            "z_max": args.z.z_max,
            "reference_z": args.reference_z,
        }),
        prng: None,
    })?;
    Ok(())
}

fn cmd_validate(cfg: &Config, args: &ValidateArgs, mut out: OutputDir) -> Result<(), CliError> {
    let sim = SimConfig::new(
        cfg.clone(),
        args.slots,
        args.warmup,
        args.replications,
        args.seed,
    );
    sim.check()?;
    let (fp, rep) = analyze(cfg)?;
    if !fp.converged {
        return Err(CliError::Numerical(format!(
            "fixed point did not converge (residual {:e})",
            fp.residual_inf_norm
        )));
    }
    let est = simulate(&sim)?;
    let report = compare(&est, &ModelPoint::from_analysis(&fp, &rep));
    let rows = report.rows.iter().map(|r| {
        vec![
            r.quantity.to_string(),
            num(r.analytic),
            num(r.simulated),
            num(r.half_width),
            num(r.z_score),
            num(r.rel_error),
            r.within_ci.to_string(),
        ]
    });
    out.write_csv("validate.csv", DIVERGENCE_SCHEMA, &DIVERGENCE_HEADER, rows)?;
    if let Some(n) = args.trace {
        let records = trace(&sim, n)?;
        let n_nodes = cfg.n_wifi + cfg.n_cell;
        let mut header = vec!["epoch".to_string(), "class".into(), "duration_us".into()];
        header.extend((0..n_nodes).map(|i| format!("node{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = records.iter().map(|r| {
            let mut row = vec![
                r.epoch.to_string(),
                r.class.name().to_string(),
                num(r.duration_us),
            ];
            row.extend(r.states.iter().map(|s| s.label()));
            row
        });
        out.write_csv("validate_trace.csv", EPOCH_TRACE_SCHEMA, &header, rows)?;
    }
    out.finish(ManifestInput {
        command: "validate",
        config: cfg,
        options: json!({
            "slots": args.slots,
            "warmup": args.warmup,
            "replications": args.replications,
            "trace": args.trace,
            "strict": args.strict,
        }),
        prng: Some(Prng {
            algorithm: PRNG_ALGORITHM,
            seed: args.seed,
        }),
    })?;
    for r in &report.rows {
        println!(
            "{:<6} analytic={:<12.6e} simulated={:<12.6e} +/-{:<10.3e} z={:>8.2} rel={:.4} {}",
            r.quantity,
            r.analytic,
            r.simulated,
            r.half_width,
            r.z_score,
            r.rel_error,
            if r.within_ci { "ok" } else { "OUTSIDE-CI" }
        );
    }
    let flagged = report.flagged();
    if flagged.is_empty() {
        println!("all analytic values inside the 95% intervals");
    } else {
        println!("outside the 95% intervals: {}", flagged.join(", "));
        if args.strict {
            return Err(CliError::Numerical(format!(
                "divergence in {}",
                flagged.join(", ")
            )));
        }
    }
    Ok(())
}

fn matrix_rows(m: &StochasticMatrix<f64>, label: &dyn Fn(usize) -> String) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for from in 0..m.dim() {
        for (to, &p) in m.row(from).iter().enumerate() {
            if p != 0.0 {
                rows.push(vec![label(from), label(to), num(p)]);
            }
        }
    }
    rows
}

fn cmd_dump_chain(cfg: &Config, args: &DumpChainArgs, mut out: OutputDir) -> Result<(), CliError> {
    let p_idle = args.p_idle.unwrap_or(1.0 - args.p);
    let (name, matrix, label, head, closed_head, closed_tau): (
        _,
        _,
        Box<dyn Fn(usize) -> String>,
        _,
        _,
        _,
    ) = match args.tech {
        Tech::Wifi => {
            let input = WifiChainInput::new(cfg.q_wifi, args.p, p_idle, cfg.w0, cfg.max_stage)?;
            let (m, states) = wifi_transition_matrix(&input)?;
            let sol = wifi_solve(&input)?;
            let states: WifiStates = states;
            let head = states.post_backoff(0);
            (
                "wifi",
                m,
                Box::new(move |i| states.label(i)),
                head,
                sol.b00e.get(),
                sol.tau.get(),
            )
        }
        Tech::Cell => {
            let input = CellChainInput::new(cfg.q_cell, args.p, p_idle, cfg.cw_cell)?;
            let m = cell_transition_matrix(&input)?;
            let sol = cell_solve(&input)?;
            let z = cfg.cw_cell;
            (
                "cell",
                m,
                Box::new(move |i| {
                    if i < z {
                        format!("({i})e")
                    } else {
                        format!("({})", i - z)
                    }
                }),
                input.post_backoff(0),
                sol.b0e.get(),
                sol.tau.get(),
            )
        }
    };
    let pi = stationary_distribution(&matrix)?;
    out.write_csv(
        &format!("chain_{name}.csv"),
        CHAIN_SCHEMA,
        &CHAIN_HEADER,
        matrix_rows(&matrix, &label),
    )?;
    out.write_csv(
        &format!("stationary_{name}.csv"),
        STATIONARY_SCHEMA,
        &STATIONARY_HEADER,
        pi.iter().enumerate().map(|(i, &x)| vec![label(i), num(x)]),
    )?;
    out.finish(ManifestInput {
        command: "dump-chain",
        config: cfg,
        options: json!({ "tech": name, "p": args.p, "p_idle": p_idle }),
        prng: None,
    })?;
    println!("states={}", matrix.dim());
    println!("head_closed_form={closed_head}");
    println!("head_stationary={}", pi[head]);
    println!("tau_closed_form={closed_tau}");
    Ok(())
}
