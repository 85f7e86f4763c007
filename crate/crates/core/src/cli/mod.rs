//! Command-line entry point. Exit codes: 0 success, 1 failed check,
//! 2 configuration error, 3 I/O or file-format error.

mod args;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use args::{AblateArgs, AblationTable, Cli, Command, GradcheckArgs, Preset, RunArgs, SweepArgs, SynthArgs, SynthFiles};

use crate::check::{run_gradcheck, GradcheckConfig};
use crate::data::{
    generate_synthetic, load_semantic_matrix, read_feature_file, read_split, validate_split, write_feature_file,
    write_semantic_matrix, write_split, ClassSplit, FeatureDataset, LabelSpace, Role, SemanticMatrix,
};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_csv, evaluate, run_ablation, sweep, sweep_csv, AblationVariant, EvalContext, HeadPredictions,
    LOSS_PLAN, MODULE_PLAN,
};
use crate::inference::CombineConfig;
use crate::model::{checkpoint_bytes, load_checkpoint, ModelConfig};
use crate::train::{train, TrainConfig};

/// Runs one command, writing its primary output to `out`. Returns the exit
/// code for a completed run; errors map through [`Error::exit_code`].
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Train(a) => cmd_train(a.resolve()?, out),
        Command::Eval(a) => cmd_eval(a.resolve()?, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::Ablate(a) => cmd_ablate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<u8> {
    let spec = a.spec();
    let data = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let staging = a.out.join(format!(".synth-staging-{}", std::process::id()));
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    let staged = (|| -> Result<()> {
        write_semantic_matrix(&data.semantic, &staging.join(SynthFiles::SEMANTIC))?;
        write_split(&data.split, &staging.join(SynthFiles::SPLIT))?;
        write_feature_file(&data.train, &staging.join(SynthFiles::TRAIN))?;
        write_feature_file(&data.test_seen, &staging.join(SynthFiles::TEST_SEEN))?;
        write_feature_file(&data.test_unseen, &staging.join(SynthFiles::TEST_UNSEEN))
    })();
    let names = [
        SynthFiles::SEMANTIC,
        SynthFiles::MANIFEST,
        SynthFiles::SPLIT,
        SynthFiles::TRAIN,
        SynthFiles::TEST_SEEN,
        SynthFiles::TEST_UNSEEN,
    ];
    let moved = staged.and_then(|_| {
        names.iter().try_for_each(|n| {
            let dest = a.out.join(n);
            fs::rename(staging.join(n), &dest).map_err(|e| Error::io(dest, e))
        })
    });
    let _ = fs::remove_dir_all(&staging);
    moved?;
    let listing: String = names.iter().map(|n| format!("{}\n", a.out.join(n).display())).collect();
    emit(out, &listing)?;
    Ok(0)
}

struct Inputs {
    semantic: SemanticMatrix,
    split: ClassSplit,
    train: Option<FeatureDataset>,
    test: Option<(FeatureDataset, FeatureDataset)>,
}

impl Inputs {
    fn load(args: &RunArgs, want_train: bool, want_test: bool) -> Result<Self> {
        let semantic = load_semantic_matrix(RunArgs::require(&args.semantic, "semantic")?)?;
        let split = read_split(RunArgs::require(&args.split, "split")?)?;
        let read = |slot: &Option<PathBuf>, flag: &str, role: Role| -> Result<FeatureDataset> {
            let ds = read_feature_file(RunArgs::require(slot, flag)?, role)?;
            Ok(if args.normalize_input { ds.l2_normalized() } else { ds })
        };
        let train = if want_train {
            let ds = read(&args.features_train, "features-train", Role::Train)?;
            validate_split(&split, &semantic, &ds)?;
            Some(ds)
        } else {
            None
        };
        let test = if want_test {
            Some((
                read(&args.features_test_seen, "features-test-seen", Role::TestSeen)?,
                read(&args.features_test_unseen, "features-test-unseen", Role::TestUnseen)?,
            ))
        } else {
            None
        };
        Ok(Self {
            semantic,
            split,
            train,
            test,
        })
    }

    fn ctx(&self) -> EvalContext<'_> {
        let (seen, unseen) = self.test.as_ref().expect("test sets loaded");
        EvalContext {
            semantic: &self.semantic,
            split: &self.split,
            test_seen: seen,
            test_unseen: unseen,
        }
    }

    fn dim(&self) -> usize {
        match (&self.train, &self.test) {
            (Some(t), _) => t.dim(),
            (None, Some((s, _))) => s.dim(),
            (None, None) => 0,
        }
    }
}

fn ablation_variant(args: &RunArgs) -> Result<AblationVariant> {
    AblationVariant::resolve(
        args.variant.as_deref().unwrap_or("full"),
        args.lambda.unwrap_or(TrainConfig::DEFAULT_LAMBDA),
    )
}

/// Combination coefficients; variants with one trained predictor keep their
/// fixed betas unless betas are given explicitly.
fn combine_for(args: &RunArgs, variant: &AblationVariant) -> Result<CombineConfig> {
    let mut combine = args.combine()?;
    if let (Some((b1, b2)), None, None) = (variant.betas, args.beta1, args.beta2) {
        combine = CombineConfig::new(b1, b2, combine.gamma)?;
    }
    Ok(combine)
}

fn train_config(args: &RunArgs, inputs: &Inputs) -> Result<TrainConfig> {
    let resolved = ablation_variant(args)?;
    let mut model = ModelConfig::new(inputs.dim(), inputs.semantic.num_attributes());
    model.hidden1 = args.hidden1.unwrap_or(model.hidden1);
    model.hidden2 = args.hidden2.unwrap_or(model.hidden2);
    model.attention_axis = args.attention_axis.unwrap_or_default();
    let cfg = TrainConfig {
        variant: resolved.variant,
        epochs: args.epochs.unwrap_or(TrainConfig::DEFAULT_EPOCHS),
        batch_size: args.batch.unwrap_or(TrainConfig::DEFAULT_BATCH),
        lr: args.lr.unwrap_or(TrainConfig::DEFAULT_LR),
        weight_decay: args.wd.unwrap_or(TrainConfig::DEFAULT_WD),
        lambda: resolved.lambda,
        seed: args.seed.unwrap_or(0),
        ..TrainConfig::new(model)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: RunArgs, out: &mut dyn Write) -> Result<u8> {
    let ckpt = RunArgs::require(&args.checkpoint, "checkpoint")?.to_path_buf();
    ablation_variant(&args)?;
    let inputs = Inputs::load(&args, true, false)?;
    let cfg = train_config(&args, &inputs)?;
    let space = LabelSpace::new(&inputs.semantic, &inputs.split)?;
    let data = inputs.train.as_ref().expect("train set loaded");
    let mut sink = Ok(());
    let result = train(data, &inputs.semantic, &space, &cfg, |log| {
        if sink.is_ok() {
            let line = serde_json::to_string(log).expect("log serializes");
            sink = emit(out, &format!("{line}\n"));
        }
    })?;
    sink?;
    write_atomic(&ckpt, &checkpoint_bytes(&result.params)?)?;
    Ok(0)
}

fn cmd_eval(args: RunArgs, out: &mut dyn Write) -> Result<u8> {
    let variant = ablation_variant(&args)?;
    let combine = combine_for(&args, &variant)?;
    let ckpt = RunArgs::require(&args.checkpoint, "checkpoint")?;
    let params = load_checkpoint(ckpt, args.attention_axis.unwrap_or_default())?;
    let inputs = Inputs::load(&args, false, true)?;
    let report = evaluate(
        &params,
        &variant.variant,
        &inputs.ctx(),
        &combine,
        variant.lambda,
        args.seed.unwrap_or(0),
    )?;
    let json = serde_json::to_string(&report).expect("report serializes");
    emit(out, &format!("{json}\n"))?;
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<u8> {
    let cfg = GradcheckConfig {
        regions: a.regions,
        dim: a.dim,
        attributes: a.attributes,
        seen_classes: a.seen_classes,
        batch: a.batch,
        lambda: a.lambda,
        step: a.step,
        tol: a.tol,
        seed: a.seed,
        corrupt: a.corrupt.clone(),
        ..GradcheckConfig::default()
    };
    let report = run_gradcheck(&cfg)?;
    let mut table = format!("{:<10} {:>12} {:>12}  result\n", "group", "max_rel", "max_abs");
    for g in &report.groups {
        table.push_str(&format!(
            "{:<10} {:>12.3e} {:>12.3e}  {}\n",
            g.name,
            g.max_rel_error,
            g.max_abs_error,
            if g.pass { "PASS" } else { "FAIL" }
        ));
    }
    let failing = report.failing();
    if failing.is_empty() {
        table.push_str(&format!("all groups pass at tol {:e}\n", report.tol));
    } else {
        table.push_str(&format!("failing groups: {}\n", failing.join(", ")));
    }
    emit(out, &table)?;
    Ok(if report.passes() { 0 } else { 1 })
}

fn write_table(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => emit(out, text),
    }
}

fn cmd_ablate(a: AblateArgs, out: &mut dyn Write) -> Result<u8> {
    let args = a.run.resolve()?;
    let explicit: Vec<&str> = a.variants.iter().map(String::as_str).collect();
    let tables: Vec<(&str, Vec<&str>)> = if !explicit.is_empty() {
        vec![("custom", explicit)]
    } else {
        match a.table {
            AblationTable::Module => vec![("module", MODULE_PLAN.to_vec())],
            AblationTable::Loss => vec![("loss", LOSS_PLAN.to_vec())],
            AblationTable::Both => vec![("module", MODULE_PLAN.to_vec()), ("loss", LOSS_PLAN.to_vec())],
        }
    };
    for (_, plan) in &tables {
        for name in plan {
            AblationVariant::resolve(name, args.lambda.unwrap_or(TrainConfig::DEFAULT_LAMBDA))?;
        }
    }
    let inputs = Inputs::load(&args, true, true)?;
    let base = train_config(&RunArgs { variant: None, ..args.clone() }, &inputs)?;
    let combine = args.combine()?;
    let train_set = inputs.train.as_ref().expect("train set loaded");

    let mut csv = String::from("table,variant,U,S,H,acc\n");
    for (table, plan) in &tables {
        let rows = run_ablation(plan, train_set, &inputs.ctx(), &base, &combine)?;
        for line in ablation_csv(&rows).lines().skip(1) {
            csv.push_str(&format!("{table},{line}\n"));
        }
    }
    write_table(args.out.as_deref(), &csv, out)?;
    Ok(0)
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<u8> {
    let args = a.run.resolve()?;
    let variant = ablation_variant(&args)?;
    let combine = combine_for(&args, &variant)?;
    let grid = if a.grid.is_empty() { a.axis.default_grid() } else { a.grid.clone() };
    let ckpt = RunArgs::require(&args.checkpoint, "checkpoint")?;
    let params = load_checkpoint(ckpt, args.attention_axis.unwrap_or_default())?;
    let inputs = Inputs::load(&args, false, true)?;
    let ctx = inputs.ctx();
    let preds = HeadPredictions::compute(&params, &variant.variant, ctx.test_seen, ctx.test_unseen)?;
    let points = sweep(
        &preds,
        &inputs.semantic,
        &inputs.split,
        &combine,
        a.axis,
        &grid,
        variant.lambda,
        args.seed.unwrap_or(0),
    )?;
    write_table(args.out.as_deref(), &sweep_csv(a.axis, &points), out)?;
    Ok(0)
}
