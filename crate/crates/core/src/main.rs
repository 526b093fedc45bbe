use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aperture_complete::commands;
use aperture_complete::config::RunConfig;
use aperture_complete::Result;

#[derive(Parser)]
#[command(
    name = "aperture-complete",
    version,
    about = "Limited-aperture MSR recovery and obstacle imaging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the exact full-aperture MSR matrix (writes msr.json).
    Forward(Opts),
    /// Restrict an MSR file to the aperture and add noise (writes msr_limited.json).
    Degrade {
        input: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Recover the full-aperture MSR matrix from limited data.
    Recover {
        input: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Evaluate an imaging indicator on a sampling grid.
    Image {
        input: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Compare two MSR files (reference first) or two indicator grids.
    Compare {
        reference: PathBuf,
        other: PathBuf,
        /// all | known | measured | symmetry | mgf | mslp | recovered | rows=A-B,cols=C-D
        #[arg(long)]
        region: Option<String>,
    },
    /// Run forward, degrade, recover and image end to end.
    Demo(Opts),
}

#[derive(Args, Default)]
struct Opts {
    /// key = value file applied before command-line flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// kite | peanut | circle:R[@X,Y]
    #[arg(long)]
    obstacle: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<String>,
    /// boundary quadrature nodes (obstacle and artificial circle)
    #[arg(long, allow_hyphen_values = true)]
    nq: Option<String>,
    /// fraction of columns (0.25), column count (l=75) or angle range ((0,pi/2))
    #[arg(long)]
    aperture: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// mgf | mslp
    #[arg(long)]
    method: Option<String>,
    /// columns recovered per step
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// artificial boundary radius
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<String>,
    /// sampling grid size, NXxNY
    #[arg(long)]
    grid: Option<String>,
    /// xmin,xmax,ymin,ymax
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    /// dsm | fm
    #[arg(long)]
    indicator: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Opts {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("obstacle", &self.obstacle),
            ("k", &self.k),
            ("m", &self.m),
            ("nq", &self.nq),
            ("aperture", &self.aperture),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("method", &self.method),
            ("t", &self.t),
            ("alpha", &self.alpha),
            ("radius", &self.radius),
            ("grid", &self.grid),
            ("bounds", &self.bounds),
            ("indicator", &self.indicator),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward(opts) => print_paths(&[commands::cmd_forward(&opts.resolve()?)?]),
        Command::Degrade { input, opts } => {
            print_paths(&[commands::cmd_degrade(&opts.resolve()?, &input)?])
        }
        Command::Recover { input, opts } => {
            let (msr, map) = commands::cmd_recover(&opts.resolve()?, &input)?;
            print_paths(&[msr, map]);
        }
        Command::Image { input, opts } => {
            print_paths(&commands::cmd_image(&opts.resolve()?, &input)?)
        }
        Command::Compare {
            reference,
            other,
            region,
        } => {
            let report = commands::cmd_compare(&reference, &other, region.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        }
        Command::Demo(opts) => print_paths(&commands::cmd_demo(&opts.resolve()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("APERTURE_COMPLETE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => log::warn!("ignoring APERTURE_COMPLETE_THREADS={threads}"),
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
