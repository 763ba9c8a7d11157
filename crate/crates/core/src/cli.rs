//! Command-line surface. [`run`] parses arguments, executes one subcommand and
//! returns the process exit code; the `ilnrs` binary is a thin wrapper.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::data::{load_ions, read_records, write_ions, write_records, Dataset, ILKey, LoadOptions, Property};
use crate::error::{Error, Result};
use crate::model::{EncoderSnapshot, FinetuneModel};
use crate::persist::{load_encoder, load_finetune, save_encoder, save_finetune, Artifact};
use crate::pipeline::{
    audit_models, correlation_audit, cv_summary, finetune, finetune_head_grid, full_space_predict, metrics, pretrain,
    size_sweep, sweep_summary, transfer_matrix, transfer_summary, write_cv_csv, write_sweep_csv, write_transfer_csv,
    AuditFit,
};
use crate::synth::{emit_datasets, Oracle};

const DEFAULT_OUT: &str = "ilnrs-out";

fn parse_property(s: &str) -> std::result::Result<Property, String> {
    s.parse().map_err(|_| {
        let tags: Vec<&str> = Property::ALL.iter().map(|p| p.tag()).collect();
        format!("unknown property {s:?}; expected one of {}", tags.join(", "))
    })
}

#[derive(Debug, Parser)]
#[command(name = "ilnrs", version, about = "Transfer learning for ionic-liquid properties")]
pub struct Cli {
    /// Base seed for data generation, splits and initialization.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for reports, models and the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit a synthetic benchmark: ions.csv, pretrain.csv, experimental.csv.
    GenSynth,
    /// Grid-search and train the recommender on simulated data.
    Pretrain {
        /// Directory with ions.csv and pretrain.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_property, default_value = "density")]
        property: Property,
    },
    /// Fine-tune heads on experimental data over a frozen encoder.
    Finetune {
        #[arg(long)]
        encoder: PathBuf,
        /// Directory with ions.csv and experimental.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Target property; defaults to every configured target.
        #[arg(long, value_parser = parse_property)]
        property: Option<Property>,
    },
    /// Cross-validate every configured target on every given encoder.
    TransferMatrix {
        #[arg(long = "encoder", required = true)]
        encoders: Vec<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Pre-train on growing samples of the synthetic universe and fine-tune on each.
    SizeSweep,
    /// Predict one property for one ionic liquid.
    Predict {
        #[arg(long)]
        cation: String,
        #[arg(long)]
        anion: String,
        /// Kelvin.
        #[arg(long, default_value_t = 298.15)]
        temperature: f64,
        /// Bar.
        #[arg(long, default_value_t = 1.0)]
        pressure: f64,
        #[arg(long, value_parser = parse_property)]
        property: Property,
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict every cation-anion combination of the models' vocabularies.
    FullSpace {
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 298.15)]
        temperature: f64,
        #[arg(long, default_value_t = 1.0)]
        pressure: f64,
        /// Output CSV; defaults to full-space.csv in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit the surface-tension law to density, viscosity and surface-tension values.
    Audit {
        #[arg(long, required_unless_present = "oracle")]
        density: Option<PathBuf>,
        #[arg(long, required_unless_present = "oracle")]
        viscosity: Option<PathBuf>,
        #[arg(long, required_unless_present = "oracle")]
        surface_tension: Option<PathBuf>,
        /// Audit the synthetic oracle's ground truth instead of models.
        #[arg(long, conflicts_with_all = ["density", "viscosity", "surface_tension"])]
        oracle: bool,
        #[arg(long, default_value_t = 298.15)]
        temperature: f64,
        #[arg(long, default_value_t = 1.0)]
        pressure: f64,
    },
    /// Score a fine-tuned model on experimental records.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSynth => "gen-synth",
            Command::Pretrain { .. } => "pretrain",
            Command::Finetune { .. } => "finetune",
            Command::TransferMatrix { .. } => "transfer-matrix",
            Command::SizeSweep => "size-sweep",
            Command::Predict { .. } => "predict",
            Command::FullSpace { .. } => "full-space",
            Command::Audit { .. } => "audit",
            Command::Evaluate { .. } => "evaluate",
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Context {
    fn data_dir(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone()
            .or_else(|| self.config.paths.data.clone())
            .unwrap_or_else(|| self.out.clone())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, text)?;
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }
}

fn resolve(cli: &Cli) -> Result<Context> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    config = config.with_seed(seed);
    config.command = Some(cli.command.name().to_string());
    let out = cli
        .out
        .clone()
        .or_else(|| config.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    config.paths.out = Some(out.clone());
    config.validate()?;
    fs::create_dir_all(&out)?;
    Ok(Context {
        config,
        out,
        outputs: Vec::new(),
    })
}

fn execute(cli: Cli, args: &[String]) -> Result<()> {
    let mut ctx = resolve(&cli)?;
    let name = cli.command.name();
    match cli.command {
        Command::GenSynth => gen_synth(&mut ctx)?,
        Command::Pretrain { data, property } => {
            let dir = ctx.data_dir(&data);
            ctx.config.paths.data = Some(dir.clone());
            run_pretrain(&mut ctx, &dir, property)?
        }
        Command::Finetune {
            encoder,
            data,
            property,
        } => {
            let dir = ctx.data_dir(&data);
            ctx.config.paths.data = Some(dir.clone());
            run_finetune(&mut ctx, &encoder, &dir, property)?
        }
        Command::TransferMatrix { encoders, data } => {
            let dir = ctx.data_dir(&data);
            ctx.config.paths.data = Some(dir.clone());
            run_transfer(&mut ctx, &encoders, &dir)?
        }
        Command::SizeSweep => run_sweep(&mut ctx)?,
        Command::Predict {
            cation,
            anion,
            temperature,
            pressure,
            property,
            model,
        } => run_predict(&cation, &anion, temperature, pressure, property, &model)?,
        Command::FullSpace {
            models,
            temperature,
            pressure,
            output,
        } => run_full_space(&mut ctx, &models, temperature, pressure, output)?,
        Command::Audit {
            density,
            viscosity,
            surface_tension,
            oracle,
            temperature,
            pressure,
        } => {
            let fit = if oracle {
                audit_oracle(&ctx.config, temperature, pressure)?
            } else {
                let (d, v, s) = (density.unwrap(), viscosity.unwrap(), surface_tension.unwrap());
                audit_files(&d, &v, &s, temperature, pressure)?
            };
            let text = format!(
                "k3 = {:.6e}\nb = {:.6}\nc = {:.6}\nr2 = {:.6}\nn = {}\n",
                fit.k3, fit.b, fit.c, fit.r2, fit.n
            );
            print!("{text}");
            ctx.write_text("audit.txt", &text)?;
        }
        Command::Evaluate { model, data } => {
            let dir = ctx.data_dir(&data);
            ctx.config.paths.data = Some(dir.clone());
            run_evaluate(&mut ctx, &model, &dir)?
        }
    }
    write_manifest(&mut ctx, name, args)
}

/// The manifest is the resolved configuration, loadable with `--config`, under
/// a comment block recording the invocation.
fn write_manifest(ctx: &mut Context, name: &str, args: &[String]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# ilnrs {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(text, "# argv: {}", args.join(" ")).unwrap();
    for o in &ctx.outputs {
        writeln!(text, "# output: {}", o.display()).unwrap();
    }
    text.push_str(&ctx.config.to_toml()?);
    fs::write(ctx.out.join(format!("{name}.manifest.toml")), text)?;
    Ok(())
}

fn gen_synth(ctx: &mut Context) -> Result<()> {
    let bench = emit_datasets(&ctx.config.oracle, &ctx.config.plan)?;
    let ions = ctx.create("ions.csv")?;
    write_ions(ions, &bench.pretrain.cations, &bench.pretrain.anions)?;
    write_records(ctx.create("pretrain.csv")?, &bench.pretrain)?;
    write_records(ctx.create("experimental.csv")?, &bench.experimental)?;
    println!(
        "{} pre-training records, {} experimental records over {} cations x {} anions",
        bench.pretrain.records.len(),
        bench.experimental.records.len(),
        bench.pretrain.cations.len(),
        bench.pretrain.anions.len()
    );
    Ok(())
}

/// Records of `file` in `dir`, with ion ids from `dir/ions.csv`.
fn load_dataset(dir: &Path, file: &str) -> Result<Dataset> {
    let (cations, anions) = load_ions(dir.join("ions.csv"))?;
    let opts = LoadOptions {
        fixed_vocabulary: true,
        ..LoadOptions::default()
    };
    read_records(
        File::open(dir.join(file))?,
        Dataset::with_vocabularies(cations, anions),
        opts,
    )
}

fn run_pretrain(ctx: &mut Context, dir: &Path, property: Property) -> Result<()> {
    if !Property::PRETRAINABLE.contains(&property) {
        return Err(Error::Config(format!("{property} is not a pre-training property")));
    }
    let ds = load_dataset(dir, "pretrain.csv")?;
    let grid = ctx.config.pretrain.configs(property);
    let outcome = pretrain(&ds, &grid, &ctx.config.train)?;
    let tag = property.tag();
    write_cv_csv(ctx.create(&format!("pretrain-{tag}-cv.csv"))?, &outcome.report)?;
    let summary = cv_summary(&format!("pre-training {tag}"), &outcome.report);
    print!("{summary}");
    ctx.write_text(&format!("pretrain-{tag}-summary.txt"), &summary)?;
    let path = ctx.path(&format!("encoder-{tag}.ilnrs"));
    save_encoder(&path, &outcome.trained.model.export_encoder(), &ds.cations, &ds.anions)?;
    println!("encoder written to {}", path.display());
    Ok(())
}

fn encoder_for(path: &Path, ds: &Dataset) -> Result<Arc<EncoderSnapshot>> {
    let art = load_encoder(path)?;
    art.check_vocabularies(&ds.cations, &ds.anions)?;
    Ok(Arc::new(art.model))
}

fn run_finetune(ctx: &mut Context, encoder: &Path, dir: &Path, property: Option<Property>) -> Result<()> {
    let ds = load_dataset(dir, "experimental.csv")?;
    let encoder = encoder_for(encoder, &ds)?;
    let targets = match property {
        Some(p) => vec![p],
        None => ctx.config.finetune.targets.clone(),
    };
    for target in targets {
        let grid = finetune_head_grid(target, &ctx.config.finetune.head_widths);
        let outcome = finetune(encoder.clone(), &ds, &grid, &ctx.config.train)?;
        let tag = target.tag();
        write_cv_csv(ctx.create(&format!("finetune-{tag}-cv.csv"))?, &outcome.report)?;
        let summary = cv_summary(&format!("fine-tuning {tag} on {}", encoder.source()), &outcome.report);
        print!("{summary}");
        ctx.write_text(&format!("finetune-{tag}-summary.txt"), &summary)?;
        let path = ctx.path(&format!("finetune-{tag}.ilnrs"));
        save_finetune(&path, &outcome.model, &ds.cations, &ds.anions)?;
        println!("model written to {}", path.display());
    }
    Ok(())
}

fn run_transfer(ctx: &mut Context, encoders: &[PathBuf], dir: &Path) -> Result<()> {
    let mut ds = load_dataset(dir, "experimental.csv")?;
    let targets = ctx.config.finetune.targets.clone();
    ds.records.retain(|r| targets.contains(&r.property));
    let encoders = encoders
        .iter()
        .map(|p| encoder_for(p, &ds))
        .collect::<Result<Vec<_>>>()?;
    let matrix = transfer_matrix(&encoders, &ds, &ctx.config.finetune.head_widths, &ctx.config.train)?;
    write_transfer_csv(ctx.create("transfer.csv")?, &matrix)?;
    let summary = transfer_summary(&matrix);
    print!("{summary}");
    ctx.write_text("transfer-summary.txt", &summary)
}

fn run_sweep(ctx: &mut Context) -> Result<()> {
    let bench = emit_datasets(&ctx.config.oracle, &ctx.config.plan)?;
    let points = size_sweep(&bench, &ctx.config.sweep, &ctx.config.train)?;
    write_sweep_csv(ctx.create("sweep.csv")?, &points)?;
    let summary = sweep_summary(&points);
    print!("{summary}");
    ctx.write_text("sweep-summary.txt", &summary)
}

fn run_predict(
    cation: &str,
    anion: &str,
    temperature: f64,
    pressure: f64,
    property: Property,
    model: &Path,
) -> Result<()> {
    let art = load_finetune(model)?;
    if art.model.property() != property {
        return Err(Error::Config(format!(
            "{} holds a {} model, not {property}",
            model.display(),
            art.model.property()
        )));
    }
    let c = art.cations.lookup(cation)?;
    let a = art.anions.lookup(anion)?;
    let y = art.model.predict(&[c], &[a], &[temperature], &[pressure])?;
    println!("{}", y[0]);
    Ok(())
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<Artifact<FinetuneModel>>> {
    let models = paths.iter().map(load_finetune).collect::<Result<Vec<_>>>()?;
    let first = &models[0];
    for m in &models[1..] {
        m.check_vocabularies(&first.cations, &first.anions)?;
    }
    Ok(models)
}

fn run_full_space(
    ctx: &mut Context,
    paths: &[PathBuf],
    temperature: f64,
    pressure: f64,
    output: Option<PathBuf>,
) -> Result<()> {
    let arts = load_models(paths)?;
    let models: Vec<&FinetuneModel> = arts.iter().map(|a| &a.model).collect();
    let path = match output {
        Some(p) => {
            ctx.outputs.push(p.clone());
            p
        }
        None => ctx.path("full-space.csv"),
    };
    let out = BufWriter::new(File::create(&path)?);
    let rows = full_space_predict(&models, &arts[0].cations, &arts[0].anions, temperature, pressure, out)?;
    println!("{rows} rows written to {}", path.display());
    Ok(())
}

fn audit_files(density: &Path, viscosity: &Path, surface_tension: &Path, t: f64, p: f64) -> Result<AuditFit> {
    let arts = load_models(&[density.into(), viscosity.into(), surface_tension.into()])?;
    let ils: Vec<ILKey> = (0..arts[0].cations.len())
        .flat_map(|c| (0..arts[0].anions.len()).map(move |a| ILKey::new(c, a)))
        .collect();
    audit_models(&arts[0].model, &arts[1].model, &arts[2].model, &ils, t, p)
}

fn audit_oracle(config: &RunConfig, t: f64, p: f64) -> Result<AuditFit> {
    let oracle = Oracle::new(config.oracle, config.plan.num_cations, config.plan.num_anions)?;
    let (mut rho, mut mu, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..oracle.num_cations() {
        for a in 0..oracle.num_anions() {
            let il = ILKey::new(c, a);
            rho.push(oracle.true_property(il, Property::Density, t, p)?);
            mu.push(oracle.true_property(il, Property::LnViscosity, t, p)?.exp());
            sigma.push(oracle.true_property(il, Property::SurfaceTension, t, p)?);
        }
    }
    correlation_audit(&rho, &mu, &sigma)
}

fn run_evaluate(ctx: &mut Context, model: &Path, dir: &Path) -> Result<()> {
    let art = load_finetune(model)?;
    let ds = load_dataset(dir, "experimental.csv")?;
    art.check_vocabularies(&ds.cations, &ds.anions)?;
    let property = art.model.property();
    let records: Vec<_> = ds.records.iter().filter(|r| r.property == property).collect();
    let c: Vec<usize> = records.iter().map(|r| r.il.cation).collect();
    let a: Vec<usize> = records.iter().map(|r| r.il.anion).collect();
    let t: Vec<f64> = records.iter().map(|r| r.temperature).collect();
    let p: Vec<f64> = records.iter().map(|r| r.pressure).collect();
    let y: Vec<f64> = records.iter().map(|r| r.value).collect();
    let pred = art.model.predict(&c, &a, &t, &p)?;
    let ils = records
        .iter()
        .map(|r| r.il)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let m = metrics(&pred, &y)?.with_ils(ils);
    let text = format!(
        "{property}: r2 = {:.4}, mae = {:.4} {}, mape = {:.2}%, records = {}, ils = {}\n",
        m.r2,
        m.mae,
        property.unit(),
        m.mape,
        m.n_records,
        m.n_ils
    );
    print!("{text}");
    ctx.write_text(&format!("evaluate-{}.txt", property.tag()), &text)
}
