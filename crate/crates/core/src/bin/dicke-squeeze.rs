use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use dicke_squeeze::experiments::{
    asymptote_report, bound_table, husimi_snapshots, moment_runs, scan_n_optimized, scan_time, verify_run, ScanConfig,
};
use dicke_squeeze::{Error, Result};

#[derive(Parser)]
#[command(name = "dicke-squeeze", version, about = "Collective spin squeezing from a squeezed phonon mode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ξ²(t) trajectories for every scheme and n̄ in the config.
    Evolve(Common),
    /// Per-N squeezing minima, power-law fits and the asymptote table.
    ScanN(Common),
    /// Per-N ω_r optimization over `omega_r_bracket_hz`.
    Optimize(Common),
    /// Husimi Q on the sphere at the configured snapshot time.
    Husimi(Common),
    /// Moment-equation trajectories and closed-form optima (TAT_yz).
    Moments(Common),
    /// Asymptotic squeezing floor over n̄ and ω_r.
    Bound(Common),
    /// Full cavity-phonon-spin model against the effective spin model.
    Verify(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

struct Output<'a> {
    dir: &'a Path,
    format: Format,
}

impl Output<'_> {
    /// Data file: `csv` text, or the serialized value when JSON is requested.
    fn data<T: Serialize>(&self, stem: &str, csv: impl FnOnce() -> String, value: &T) -> Result<()> {
        match self.format {
            Format::Csv => fs::write(self.dir.join(format!("{stem}.csv")), csv())?,
            Format::Json => fs::write(self.dir.join(format!("{stem}.json")), serde_json::to_string_pretty(value)?)?,
        }
        Ok(())
    }

    fn summary(&self, value: serde_json::Value) -> Result<()> {
        fs::write(self.dir.join("summary.json"), serde_json::to_string_pretty(&value)?)?;
        Ok(())
    }
}

fn load_config(path: &Path) -> Result<ScanConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ScanConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn run(command: &Command) -> Result<()> {
    let (Command::Evolve(c)
    | Command::ScanN(c)
    | Command::Optimize(c)
    | Command::Husimi(c)
    | Command::Moments(c)
    | Command::Bound(c)
    | Command::Verify(c)) = command;
    let cfg = load_config(&c.config)?;
    fs::create_dir_all(&c.out)?;
    let out = Output { dir: &c.out, format: c.format };

    match command {
        Command::Evolve(_) => {
            let scan = scan_time(&cfg)?;
            out.data("trajectories", || scan.to_csv(), &scan)?;
            let entries: Vec<_> = scan
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "label": e.label, "scheme": e.scheme, "N": e.n_spins, "n_th": e.n_th, "omega_r": e.omega_r,
                        "chi": e.chi, "minimum": e.minimum, "max_trace_drift": e.trajectory.max_trace_drift(),
                        "warnings": e.trajectory.warnings,
                    })
                })
                .collect();
            out.summary(json!({ "command": "evolve", "entries": entries }))
        }
        Command::ScanN(_) => {
            let reports = asymptote_report(&cfg)?;
            let minima_csv = || reports.iter().flat_map(|r| r.scans.iter()).map(|s| s.to_csv()).collect::<Vec<_>>().join("");
            out.data("minima", minima_csv, &reports)?;
            if c.format == Format::Csv {
                fs::write(&c.out.join("asymptote.csv"), reports.iter().map(|r| r.to_csv()).collect::<Vec<_>>().join(""))?;
            }
            let fits: Vec<_> = reports
                .iter()
                .flat_map(|r| r.scans.iter().map(|s| json!({ "label": s.label, "scheme": s.scheme, "n_th": s.n_th, "fit": s.fit })))
                .collect();
            let rows: Vec<_> = reports.iter().map(|r| json!({ "label": r.label, "rows": r.rows })).collect();
            out.summary(json!({ "command": "scan-n", "fits": fits, "asymptote": rows }))
        }
        Command::Optimize(_) => {
            let scans = scan_n_optimized(&cfg)?;
            let csv = || {
                let mut s = String::from("label,scheme,n_th,N,omega_r,xi2_opt,t_opt,evaluations,non_unimodal,flat,at_bracket_edge\n");
                for sc in &scans {
                    for o in &sc.optima {
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{},{},{}\n",
                            sc.label,
                            sc.scheme.label(),
                            sc.n_th,
                            o.n_spins,
                            o.omega_r,
                            o.xi2_opt,
                            o.t_opt,
                            o.evaluations,
                            o.non_unimodal,
                            o.flat,
                            o.at_bracket_edge
                        ));
                    }
                }
                s
            };
            out.data("optima", csv, &scans)?;
            let fits: Vec<_> = scans.iter().map(|s| json!({ "label": s.label, "scheme": s.scheme, "n_th": s.n_th, "fit": s.fit })).collect();
            out.summary(json!({ "command": "optimize", "fits": fits }))
        }
        Command::Husimi(_) => {
            let snaps = husimi_snapshots(&cfg)?;
            let mut meta = Vec::new();
            for (k, s) in snaps.iter().enumerate() {
                out.data(&format!("husimi_{k}_{}", sanitize(&s.label)), || s.field.to_csv(), &s.field)?;
                meta.push(json!({
                    "index": k, "label": s.label, "N": s.n_spins, "t": s.t, "xi2": s.xi2,
                    "grid": s.field.header_json(), "normalization": s.field.normalization(), "max": s.field.max(),
                }));
            }
            out.summary(json!({ "command": "husimi", "snapshots": meta }))
        }
        Command::Moments(_) => {
            let runs = moment_runs(&cfg)?;
            let mut meta = Vec::new();
            for r in &runs {
                out.data(&format!("moments_N{}_nth{}", r.n_spins, r.n_th), || r.trajectory.to_csv("cumulant"), &r.trajectory)?;
                meta.push(serde_json::to_value(r)?);
            }
            out.summary(json!({ "command": "moments", "runs": meta }))
        }
        Command::Bound(_) => {
            let rows = bound_table(&cfg)?;
            let csv = || {
                let mut s = String::from("n_th,omega_r,chi,c,epsilon,xi2_lb\n");
                for r in &rows {
                    s.push_str(&format!("{},{},{},{},{},{}\n", r.n_th, r.omega_r, r.chi, r.c, r.epsilon, r.xi2_lb));
                }
                s
            };
            out.data("bound", csv, &rows)?;
            out.summary(json!({ "command": "bound", "rows": rows }))
        }
        Command::Verify(_) => {
            let report = verify_run(&cfg)?;
            let csv = || {
                let mut s = String::from("t,xi2_full,xi2_effective\n");
                for ((t, a), b) in report.times.iter().zip(&report.xi2_full).zip(&report.xi2_effective) {
                    s.push_str(&format!("{t:.12e},{a:.12e},{b:.12e}\n"));
                }
                s
            };
            out.data("comparison", csv, &report)?;
            let mut summary = serde_json::to_value(&report)?;
            if let Some(obj) = summary.as_object_mut() {
                for k in ["times", "xi2_full", "xi2_effective"] {
                    obj.remove(k);
                }
                obj.insert("command".into(), json!("verify"));
                obj.insert("regime_ok".into(), json!(report.regime_ok()));
            }
            out.summary(summary)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
