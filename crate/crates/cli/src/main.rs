use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use geodet::report::{render, run, Command, Format, RunConfig};

/// Functional determinants of Jacobi operators and short-time heat-kernel limits.
#[derive(Parser, Debug)]
#[command(name = "geodet", version, about, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,

    /// TOML file with `command`, `format`, `out` and a `[parameters]` table.
    /// Command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Report format.
    #[arg(long, global = true, value_parser = ["json", "csv", "text"])]
    format: Option<String>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Include wall-clock runtimes (reports are then no longer byte-stable).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Galerkin determinant of id + P⁻¹ℛ along a constant-curvature geodesic.
    DetFredholm(Params),
    /// Gel'fand–Yaglom ratio det J(1) from the Jacobi ODE.
    DetGy(Params),
    /// Zeta-regularized determinants (kind = laplacian | power | jacobi).
    DetZeta(Params),
    /// Heat-kernel limit on a round sphere against the determinant prediction.
    HeatLimit(Params),
    /// Evaluation-map Jacobian of piecewise geodesics on uniform partitions.
    EvalJacobian(Params),
    /// Run the bundled validation suite.
    Validate(Params),
}

#[derive(Args, Debug, Default)]
struct Params {
    /// Sectional curvature.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    /// Geodesic length.
    #[arg(long)]
    r: Option<String>,
    /// Dimension.
    #[arg(long)]
    n: Option<String>,
    /// Interval length.
    #[arg(long)]
    t: Option<String>,
    /// Power of the Laplacian for `det-zeta --kind power`.
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated Fourier mode schedule.
    #[arg(long)]
    modes: Option<String>,
    /// RK4 steps.
    #[arg(long)]
    steps: Option<String>,
    /// Comma-separated segment counts of uniform partitions.
    #[arg(long = "partition-n")]
    partition_n: Option<String>,
    /// fourier | piecewise.
    #[arg(long)]
    filtration: Option<String>,
    /// Exclude the numerical kernel (Fourier filtration only).
    #[arg(long)]
    deflate: bool,
    #[arg(long = "kernel-tol")]
    kernel_tol: Option<String>,
    /// Sphere radius.
    #[arg(long)]
    radius: Option<String>,
    /// antipodal | nondegenerate.
    #[arg(long)]
    case: Option<String>,
    /// Distance for the nondegenerate heat case.
    #[arg(long)]
    d: Option<String>,
    /// laplacian | power | jacobi.
    #[arg(long)]
    kind: Option<String>,
    /// Extra KEY=VALUE parameter, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Params {
    fn pairs(&self) -> Result<Vec<(String, String)>, String> {
        let named = [
            ("kappa", &self.kappa),
            ("r", &self.r),
            ("n", &self.n),
            ("t", &self.t),
            ("m", &self.m),
            ("modes", &self.modes),
            ("steps", &self.steps),
            ("partition-n", &self.partition_n),
            ("filtration", &self.filtration),
            ("kernel-tol", &self.kernel_tol),
            ("radius", &self.radius),
            ("case", &self.case),
            ("d", &self.d),
            ("kind", &self.kind),
        ];
        let mut out: Vec<(String, String)> = named
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.deflate {
            out.push(("deflate".into(), "true".into()));
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got '{item}'"))?;
            out.push((k.to_string(), v.to_string()));
        }
        Ok(out)
    }
}

impl Sub {
    fn split(&self) -> (Command, &Params) {
        match self {
            Sub::DetFredholm(p) => (Command::DetFredholm, p),
            Sub::DetGy(p) => (Command::DetGy, p),
            Sub::DetZeta(p) => (Command::DetZeta, p),
            Sub::HeatLimit(p) => (Command::HeatLimit, p),
            Sub::EvalJacobian(p) => (Command::EvalJacobian, p),
            Sub::Validate(p) => (Command::Validate, p),
        }
    }
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}\n");
    eprintln!("{}", Cli::command().render_usage());
    ExitCode::from(2)
}

fn build_config(cli: &Cli) -> Result<RunConfig, String> {
    let sub = cli.command.as_ref().map(Sub::split);
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            RunConfig::from_toml_str(&text, sub.map(|(c, _)| c)).map_err(|e| e.to_string())?
        }
        None => match sub {
            Some((c, _)) => RunConfig::new(c),
            None => return Err("no command given".into()),
        },
    };
    if let Some((_, params)) = sub {
        for (k, v) in params.pairs()? {
            config.set(&k, &v);
        }
    }
    if let Some(f) = &cli.format {
        config.format = f.parse::<Format>().map_err(|e| e.to_string())?;
    }
    if let Some(out) = &cli.out {
        config.output_path = Some(out.clone());
    }
    config.timings |= cli.timings;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(msg) => return usage_error(&msg),
    };
    let report = run(&config);
    let text = match render(&report, config.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match &config.output_path {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    if let Some(e) = &report.error {
        eprintln!("{}: {}", e.name, e.message);
    }
    ExitCode::from(report.exit_code() as u8)
}
