use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod output;

use renorm::scene::Scene;

#[derive(Parser, Debug)]
#[command(name = "renorm", version, about = "Renormalization toolkit for complex polynomials")]
struct Cli {
    /// Scene JSON; defaults to the built-in z(z+2)^2 scene.
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Grid resolution, overriding the scene.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Iteration budget, overriding the scene.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "RENORM_THREADS", default_value_t = 0)]
    threads: usize,
    /// Sub-pixel samples per axis for set masks.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    supersample: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Image of the filled Julia set.
    Julia,
    /// Trace external rays and report their landing points.
    Ray {
        /// Angles such as 1/3; defaults to the scene rays and cut angles.
        #[arg(long = "angle")]
        angles: Vec<String>,
    },
    /// Admissibility and legality of the cut family.
    CutsCheck,
    /// Image and connectivity of the avoiding set.
    Avoid,
    /// Carrot boundaries and geometry estimates.
    Carrot,
    /// Carrot surgery: degree, visit counts and the non-escaping set.
    Surgery,
    /// Cycle census of P on the avoiding set against the candidate Q.
    Verify,
    /// Full pipeline on the built-in z(z+2)^2 scene.
    Figure1,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("thread pool")?;
    }
    let mut scene = match (&cli.scene, &cli.command) {
        (Some(_), Command::Figure1) => bail!("figure1 runs the built-in scene; drop --scene"),
        (Some(path), _) => Scene::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, _) => Scene::figure1(),
    };
    if let Some(n) = cli.resolution {
        scene = scene.with_resolution(n)?;
    }
    if let Some(m) = cli.max_iter {
        if m == 0 {
            bail!("--max-iter must be positive");
        }
        scene.max_iter = m;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let ctx = commands::Ctx {
        scene,
        out: cli.out,
        supersample: cli.supersample as usize,
    };
    let checks = match cli.command {
        Command::Julia => commands::julia(&ctx)?,
        Command::Ray { angles } => commands::ray(&ctx, &angles)?,
        Command::CutsCheck => commands::cuts_check(&ctx)?,
        Command::Avoid => commands::avoid(&ctx)?,
        Command::Carrot => commands::carrot(&ctx)?,
        Command::Surgery => commands::surgery(&ctx)?,
        Command::Verify => commands::verify(&ctx)?,
        Command::Figure1 => commands::figure1(&ctx)?,
    };
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.pass))
}
