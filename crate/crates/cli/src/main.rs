use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use incsim_core::channel::ReceptionVector;
use incsim_core::engine::{
    self, pooled_delay_stats, run_trials, summarize, write_series_csv, write_sweep_csv, SweepRow,
};
use incsim_core::presets::{self, PRESET_NAMES};
use incsim_core::scenario::{load_scenario, Scenario, Scheme};
use incsim_core::spn::PressureMode;
use incsim_core::vrnet::{build_matrices, two_slot_oracle, IncOp, QueueId};

#[derive(Parser)]
#[command(name = "incsim", version, about = "Two-flow broadcast erasure channel coding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials of one scenario and write per-sample series.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Arrival scaling; overrides the file.
        #[arg(long)]
        theta: Option<f64>,
        /// Write every packet movement of the first trial to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweep θ for one scenario.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a built-in experiment.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
        #[command(flatten)]
        common: Common,
        /// Only write the preset's scenario files.
        #[arg(long)]
        emit: bool,
    },
    /// Check a scenario file.
    Validate { scenario: PathBuf },
    /// Print the two-slot example and the worked-example service matrices.
    Oracle,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Slots, or seconds with rate adaptation.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, env = "INCSIM_OUT_DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long, value_parser = parse_pressure)]
    pressure: Option<PressureMode>,
    /// Comma-separated θ values.
    #[arg(long, value_delimiter = ',')]
    theta_list: Option<Vec<f64>>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse()
}

fn parse_pressure(s: &str) -> Result<PressureMode, String> {
    match s {
        "virtual" => Ok(PressureMode::Virtual),
        "inter_virtual" => Ok(PressureMode::InterVirtual),
        _ => Err(format!("unknown pressure mode `{s}` (virtual | inter_virtual)")),
    }
}

impl Common {
    fn apply(&self, s: &mut Scenario) -> Result<()> {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(h) = self.horizon {
            s.horizon = h;
        }
        if let Some(k) = self.scheme {
            s.scheme = k;
        }
        if let Some(p) = self.pressure {
            s.pressure = p;
        }
        s.validate()?;
        Ok(())
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?))
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

fn print_rows(rows: &[SweepRow]) {
    for r in rows {
        println!(
            "{:<18} theta={:<8.4} sum={:<8.4} backlog={:<12.1} slope={:<10.5} {}{}",
            r.scheme,
            r.theta,
            r.sum_rate,
            r.mean_backlog,
            r.slope,
            r.verdict.name(),
            if r.integrity.is_clean() { "" } else { "  INTEGRITY FAILURE" }
        );
    }
}

fn cmd_run(path: &Path, common: &Common, theta: Option<f64>, trace: Option<&Path>) -> Result<()> {
    let mut s = load_scenario(path)?;
    common.apply(&mut s)?;
    if let Some(t) = theta {
        s.theta = t;
    }
    let out = common.out_dir()?;
    let stem = slug(&format!("{}_{}", s.name, s.label()));
    let runs = match trace {
        Some(tp) => {
            let mut w = create(tp)?;
            let first = engine::run_trial_traced(&s, &mut w)?;
            w.flush()?;
            let mut runs = vec![first];
            if common.trials > 1 {
                let rest = Scenario { seed: s.seed + 1, ..s.clone() };
                runs.extend(run_trials(&rest, common.trials - 1)?);
            }
            runs
        }
        None => run_trials(&s, common.trials)?,
    };
    for (i, r) in runs.iter().enumerate() {
        let p = out.join(format!("{stem}_series_{i}.csv"));
        write_series_csv(create(&p)?, r)?;
    }
    let row = summarize(&s, &runs);
    print_rows(std::slice::from_ref(&row));
    let stats = pooled_delay_stats(&runs);
    println!(
        "mean delay {}  mean receiver buffer {}",
        stats.mean_delay.map_or("n/a".into(), |d| format!("{d:.2}")),
        stats.mean_rx_buffer.map_or("n/a".into(), |b| format!("{b:.2}"))
    );
    if !row.integrity.is_clean() {
        bail!("integrity failures: {:?}", row.integrity);
    }
    Ok(())
}

fn sweep_scenarios(scenarios: &[Scenario], thetas: &[f64], trials: usize, csv: &Path) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for s in scenarios {
        let r = engine::stability_sweep(s, thetas, trials)?;
        print_rows(&r);
        rows.extend(r);
    }
    write_sweep_csv(create(csv)?, &rows)?;
    println!("wrote {}", csv.display());
    Ok(rows)
}

fn cmd_sweep(path: &Path, common: &Common) -> Result<()> {
    let mut s = load_scenario(path)?;
    common.apply(&mut s)?;
    let thetas = common.theta_list.clone().unwrap_or_else(|| vec![s.theta]);
    let csv = common.out_dir()?.join(format!("{}_sweep.csv", slug(&s.name)));
    sweep_scenarios(&[s], &thetas, common.trials, &csv)?;
    Ok(())
}

fn cmd_preset(name: &str, common: &Common, emit: bool) -> Result<()> {
    let p = presets::preset(name).context("unknown preset")?;
    // In a preset, --scheme selects scenarios instead of overriding them.
    let overrides = Common { scheme: None, ..common.clone() };
    let mut scenarios: Vec<Scenario> = p
        .scenarios
        .iter()
        .filter(|s| common.scheme.is_none_or(|k| s.scheme == k))
        .cloned()
        .collect();
    for s in &mut scenarios {
        overrides.apply(s)?;
    }
    let out = common.out_dir()?;
    if emit {
        for s in &scenarios {
            let f = out.join(format!("{}_{}.toml", slug(&s.name), slug(s.label())));
            fs::write(&f, s.to_toml()).with_context(|| format!("cannot write {}", f.display()))?;
            println!("wrote {}", f.display());
        }
        return Ok(());
    }
    for (label, cap) in &p.capacities {
        println!("reference sum rate {label}: {cap}");
    }
    if name == "table3" {
        let csv = out.join("table3.csv");
        let mut w = create(&csv)?;
        writeln!(w, "setting,load,sum_rate,mean_delay,mean_rx_buffer,delivered")?;
        for s in &scenarios {
            let runs = run_trials(s, common.trials)?;
            for (i, r) in runs.iter().enumerate() {
                let f = out.join(format!("{}_series_{i}.csv", slug(s.label())));
                write_series_csv(create(&f)?, r)?;
            }
            let st = pooled_delay_stats(&runs);
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.name,
                s.theta,
                s.sum_rate(),
                fmt(st.mean_delay),
                fmt(st.mean_rx_buffer),
                st.delivered
            )?;
            println!(
                "{:<12} load {:.2}: delay {}  buffer {}",
                s.name,
                s.theta,
                fmt(st.mean_delay),
                fmt(st.mean_rx_buffer)
            );
        }
        w.flush()?;
        println!("wrote {}", csv.display());
        return Ok(());
    }
    let thetas = common.theta_list.clone().unwrap_or(p.thetas.clone());
    sweep_scenarios(&scenarios, &thetas, common.trials, &out.join(format!("{name}_sweep.csv")))?;
    Ok(())
}

fn print_matrix(title: &str, m: &[[f64; 7]; 5]) {
    println!("{title}");
    print!("{:>6}", "");
    for op in IncOp::ALL {
        print!("{:>8}", op.name());
    }
    println!();
    for q in QueueId::ALL {
        print!("{:>6}", q.name());
        for v in m[q.index()] {
            print!("{v:>8.4}");
        }
        println!();
    }
}

fn cmd_oracle() -> Result<()> {
    let o = two_slot_oracle();
    println!("two-slot example, expected deliveries");
    println!("  best five-operation policy: {}", o.five_op);
    println!("  premix then reactive:       {}", o.seven_op);
    for (label, q1, q2) in [("quality 0", 0.5, 0.7), ("quality 1", 2.0 / 3.0, 1.0 / 3.0)] {
        let m = build_matrices(&ReceptionVector::independent(q1, q2)?);
        print_matrix(&format!("B_in, {label} (d1 {q1:.4}, d2 {q2:.4})"), &m.b_in);
        print_matrix(&format!("B_out, {label}"), &m.b_out);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, common, theta, trace } => {
            cmd_run(scenario, common, *theta, trace.as_deref())
        }
        Command::Sweep { scenario, common } => cmd_sweep(scenario, common),
        Command::Preset { name, common, emit } => cmd_preset(name, common, *emit),
        Command::Validate { scenario } => load_scenario(scenario).map(|s| {
            println!("{}: ok ({}, sum rate {})", scenario.display(), s.scheme.name(), s.sum_rate());
        }).map_err(Into::into),
        Command::Oracle => cmd_oracle(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
