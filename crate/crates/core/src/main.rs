use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acrobat::ars::{compare_representations, write_comparison_csv};
use acrobat::env::{read_trajectory_csv, Stage};
use acrobat::error::Result;
use acrobat::harness::{
    compare, converging, eval_to_dir, poincare_section, replay, train, write_phase_plane_csv, write_poincare_csv,
    write_replay_csv, ExperimentSummary, RunConfig,
};
use acrobat::rewards::RewardConfig;
use acrobat::task::task_by_name;

#[derive(Parser)]
#[command(name = "acrobat", version, about = "Two-stage training and analysis of planar quadruped jumps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Run configuration file; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    /// rigid or soft
    #[arg(long)]
    robot: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    randomize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = &self.task {
            cfg.task = t.clone();
        }
        if let Some(r) = &self.robot {
            cfg.robot = r.parse()?;
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if self.randomize {
            cfg.randomize = true;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured stage plan.
    Train(Overrides),
    /// Evaluate a policy file and write a summary plus trajectories.
    Eval {
        policy: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[command(flatten)]
        o: Overrides,
    },
    /// Tabulate metrics of several summaries with deltas against the first.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stick-figure coordinates for every row of a trajectory.
    Replay {
        trajectory: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Phase-plane and touchdown Poincaré-section data of a trajectory.
    LimitCycle {
        trajectory: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reward constants.
    Rewards {
        #[command(subcommand)]
        cmd: RewardsCmd,
    },
    /// Train every configured policy representation under the same budget.
    CompareRepresentations(Overrides),
}

#[derive(Subcommand)]
enum RewardsCmd {
    /// Print the default reward constants as a config section.
    DumpDefaults,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Box::new(fs::File::create(p)?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(|p| p.file_name()) {
        Some(dir) if stem == "summary" => dir.to_string_lossy().into_owned(),
        _ => stem,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(o) => {
            let cfg = o.resolve()?;
            let rep = train(&cfg, &mut |msg| eprintln!("{msg}"))?;
            for s in &rep.seeds {
                let show = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                println!(
                    "seed {}: ars {} warm-start deviation {} refine {}",
                    s.seed,
                    show(s.ars_return),
                    show(s.warm_deviation),
                    show(s.refine_return)
                );
            }
            println!("artifacts in {}", rep.out.display());
        }
        Cmd::Eval { policy, episodes, o } => {
            let cfg = o.resolve()?;
            let out = o.out.clone().unwrap_or_else(|| PathBuf::from("eval"));
            let seed = cfg.seeds.first().copied().unwrap_or(0);
            let s = eval_to_dir(&cfg, &policy, episodes, seed, &out)?;
            let a = &s.aggregate;
            println!("height   {:.4} ± {:.4} m", a.height.mean, a.height.std);
            println!("distance {:.4} ± {:.4} m", a.distance.mean, a.distance.std);
            println!("force    {:.1} ± {:.1} N", a.force.mean, a.force.std);
            println!("success  {:.2}", a.success_rate);
            println!("return   {:.4} ± {:.4}", a.ret.mean, a.ret.std);
        }
        Cmd::Compare { summaries, out } => {
            let labeled = summaries
                .iter()
                .map(|p| Ok((label(p), ExperimentSummary::load(p)?)))
                .collect::<Result<Vec<_>>>()?;
            compare(output(out.as_deref())?, &labeled)?;
        }
        Cmd::Replay { trajectory, o } => {
            let cfg = o.resolve()?;
            let rows = read_trajectory_csv(fs::File::open(&trajectory)?)?;
            let frames = replay(&cfg.env_config(Stage::Ars).model, &rows);
            write_replay_csv(output(o.out.as_deref())?, &rows, &frames)?;
        }
        Cmd::LimitCycle { trajectory, out } => {
            let rows = read_trajectory_csv(fs::File::open(&trajectory)?)?;
            let points = poincare_section(&rows)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("limit_cycle"));
            fs::create_dir_all(&dir)?;
            write_phase_plane_csv(fs::File::create(dir.join("phase_plane.csv"))?, &rows)?;
            write_poincare_csv(fs::File::create(dir.join("poincare.csv"))?, &points)?;
            println!("{} cycles, converging: {}", points.len(), converging(&points, 0.2, 0.0));
        }
        Cmd::Rewards { cmd: RewardsCmd::DumpDefaults } => {
            print!("[rewards]\n{}", RewardConfig::default().to_text());
        }
        Cmd::CompareRepresentations(o) => {
            let cfg = o.resolve()?;
            cfg.validate()?;
            let task = task_by_name(&cfg.task)?;
            let names: Vec<&str> = cfg.representations.iter().map(String::as_str).collect();
            let curves = compare_representations(task, &names, &cfg.ars_config(cfg.seeds[0]), &cfg.env_config(Stage::Ars))?;
            fs::create_dir_all(&cfg.out)?;
            let path = cfg.out.join("representations.csv");
            write_comparison_csv(fs::File::create(&path)?, &curves)?;
            for (name, c) in &curves {
                println!("{name}: final return {:.4}", c.last().map_or(f64::NAN, |p| p.eval_return));
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
