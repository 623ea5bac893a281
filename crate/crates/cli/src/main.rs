use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use inkmotion::pipeline::{
    cmd_animate, cmd_edit_propagate, cmd_hlm, cmd_poisson_blend, cmd_render_guidance, write_demo_project, DemoOptions,
    EditRequest, Overrides, ProjectConfig,
};
use inkmotion::poisson::{SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use inkmotion::sdi::BlendMode;
use inkmotion::Error;

#[derive(Parser)]
#[command(name = "inkmotion", version, about = "Layered hand-drawn character animation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the SDF into hair and body meshes.
    Hlm(ProjectArgs),
    /// Render pose, SDI mask and coarse color sequences.
    RenderGuidance(ProjectArgs),
    /// Render guidance and sample the animation.
    Animate(ProjectArgs),
    /// Re-sample with edited references or SDI masks over the cached geometry.
    EditPropagate {
        #[command(flatten)]
        project: ProjectArgs,
        /// Edited reference with contour lines.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Edited contour-free reference.
        #[arg(long)]
        nc_reference: Option<PathBuf>,
        #[arg(long)]
        sdi_front: Option<PathBuf>,
        #[arg(long)]
        sdi_back: Option<PathBuf>,
    },
    /// Seamlessly clone a source image into a target inside a mask.
    PoissonBlend {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Write a small synthetic project to try the other commands on.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        /// Leave the SDI masks empty.
        #[arg(long)]
        no_sdi: bool,
    },
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// ddim_consistent or literal.
    #[arg(long)]
    blend_mode: Option<BlendMode>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ProjectArgs {
    fn load(&self) -> Result<ProjectConfig, Error> {
        let mut cfg = ProjectConfig::load(&self.config)?;
        let output_dir = match &self.out {
            Some(p) => Some(std::path::absolute(p).map_err(|e| Error::io(p, e))?),
            None => None,
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
            blend_mode: self.blend_mode,
            output_dir,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let start = Instant::now();
    match cli.command {
        Command::Hlm(args) => {
            let report = cmd_hlm(&args.load()?)?;
            if let Some(n) = report.notice {
                println!("notice: {n}");
            }
            for p in report.written {
                println!("wrote {}", p.display());
            }
        }
        Command::RenderGuidance(args) => {
            let report = cmd_render_guidance(&args.load()?)?;
            println!("rendered {} frames into {}", report.frames, report.dir.display());
        }
        Command::Animate(args) => {
            let report = cmd_animate(&args.load()?)?;
            println!(
                "generated {} frames in {} segment(s) into {}",
                report.output.frames.len(),
                report.output.segments.len(),
                report.layout.frames().display()
            );
        }
        Command::EditPropagate {
            project,
            reference,
            nc_reference,
            sdi_front,
            sdi_back,
        } => {
            let edit = EditRequest {
                reference,
                nc_reference,
                sdi_front,
                sdi_back,
            };
            let report = cmd_edit_propagate(&project.load()?, &edit)?;
            println!(
                "generated {} frames into {}",
                report.output.frames.len(),
                report.layout.frames().display()
            );
        }
        Command::PoissonBlend {
            target,
            source,
            mask,
            out,
            tol,
            max_iter,
        } => {
            cmd_poisson_blend(&target, &source, &mask, &out, SolverOptions { tol, max_iter })?;
            println!("wrote {}", out.display());
        }
        Command::Demo {
            out,
            frames,
            width,
            height,
            no_sdi,
        } => {
            let opts = DemoOptions {
                frames,
                width,
                height,
                sdi: !no_sdi,
            };
            let config = write_demo_project(&out, opts)?;
            println!("wrote {}", config.display());
        }
    }
    log::info!("done in {:.2?}", start.elapsed());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
