use std::path::{Path, PathBuf};

use maxout_core::bank::ProjectionBank;
use maxout_core::data::Dataset;
use maxout_core::embedding::{all_pairs, distance_curve, fit_pca};
use maxout_core::experiment::{
    class_list, evaluate_dataset, fit_ridge, index_of, labels_of, RidgeCellConfig,
};
use maxout_core::kernel::{kappa_mc, EstimationSettings, KernelModel};
use maxout_core::linear::{train_logistic_sgd_dense, Evaluation, LinearModel};
use maxout_core::stats::{mean, sample_std};
use maxout_core::{featurize_batch, hash_code};
use toml::Table;

use crate::config::{ExperimentConfig, ModelSpec, Splits};
use crate::error::{CliError, CliResult, Context};
use crate::report::{Csv, Report};

fn load(cfg: &ExperimentConfig) -> CliResult<Splits> {
    cfg.dataset
        .load()
        .and_then(|s| s.normalized(cfg.normalization))
        .context("loading dataset")
}

fn out_dir(cfg: &ExperimentConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    Ok(&cfg.output_dir)
}

fn hex(v: u64) -> String {
    format!("{v:016x}")
}

fn require_test(splits: &Splits) -> CliResult<&Dataset> {
    splits
        .test
        .as_ref()
        .ok_or_else(|| CliError::config("dataset: this command needs a test split"))
}

fn features_csv(bank: &ProjectionBank, data: &Dataset, path: &Path) -> CliResult<()> {
    let z = featurize_batch(bank, data.x.view()).context("featurizing")?;
    let mut head = vec!["id".to_string()];
    if data.labels.is_some() {
        head.push("label".into());
    }
    head.extend((1..=bank.m()).map(|l| format!("phi_{l}")));
    let mut csv = Csv::new(head);
    for (i, row) in z.values.rows().into_iter().enumerate() {
        let mut f = vec![i.to_string()];
        if let Some(l) = &data.labels {
            f.push(l[i].to_string());
        }
        f.extend(row.iter().map(|v| v.to_string()));
        csv.row(f);
    }
    csv.write(path)
}

pub fn featurize(cfg: &ExperimentConfig) -> CliResult<()> {
    let splits = load(cfg)?;
    let (m, q, seed) = (cfg.m[0], cfg.q[0], cfg.seeds[0]);
    let bank = ProjectionBank::sample(m, q, splits.train.dim(), seed).context("sampling bank")?;
    let dir = out_dir(cfg)?;
    bank.save(dir.join("bank.bin"))?;
    features_csv(&bank, &splits.train, &dir.join("features.csv"))?;
    if let Some(test) = &splits.test {
        features_csv(&bank, test, &dir.join("features_test.csv"))?;
    }
    let mut r = Report::new("featurize");
    r.set("m", m as i64);
    r.set("q", q as i64);
    r.set("seed", seed as i64);
    r.set("rows", splits.train.len() as i64);
    r.set("bank_fingerprint", hex(bank.fingerprint()));
    r.write(cfg, dir)
}

fn ridge_config(cfg: &ExperimentConfig, m: usize, q: usize, seed: u64) -> Option<RidgeCellConfig> {
    match &cfg.model {
        ModelSpec::Ridge {
            lambda_grid,
            holdout_fraction,
            intercept,
        } => Some(RidgeCellConfig {
            m,
            q,
            seed,
            lambda_grid: lambda_grid.clone(),
            holdout_fraction: *holdout_fraction,
            intercept: *intercept,
        }),
        ModelSpec::Logistic { .. } => None,
    }
}

struct Trained {
    bank: ProjectionBank,
    model: LinearModel,
    validation: Vec<(f64, f64)>,
}

fn train_one(
    cfg: &ExperimentConfig,
    train: &Dataset,
    m: usize,
    q: usize,
    seed: u64,
) -> CliResult<Trained> {
    let ctx = format!("training m={m} q={q} seed={seed}");
    if let Some(rc) = ridge_config(cfg, m, q, seed) {
        let fit = fit_ridge(train, &rc).context(&ctx)?;
        return Ok(Trained {
            bank: fit.bank,
            model: fit.model,
            validation: fit.selection.errors,
        });
    }
    let sgd = cfg.model.sgd(seed).expect("logistic model");
    let labels = labels_of(train).context(&ctx)?;
    let classes = class_list(labels);
    let y = index_of(labels, &classes).context(&ctx)?;
    let bank = ProjectionBank::sample(m, q, train.dim(), seed).context(&ctx)?;
    let z = featurize_batch(&bank, train.x.view()).context(&ctx)?;
    let mut model =
        train_logistic_sgd_dense(z.values.view(), &y, classes.len(), &sgd).context(&ctx)?;
    model.classes = classes;
    model.feature_fingerprint = bank.fingerprint();
    Ok(Trained {
        bank,
        model,
        validation: Vec::new(),
    })
}

fn evaluation_entries(r: &mut Report, e: &Evaluation) {
    r.set("error_rate", e.error_rate);
    r.set("evaluated_rows", e.total as i64);
}

pub fn train(cfg: &ExperimentConfig) -> CliResult<()> {
    let splits = load(cfg)?;
    let (m, q, seed) = (cfg.m[0], cfg.q[0], cfg.seeds[0]);
    let t = train_one(cfg, &splits.train, m, q, seed)?;
    let dir = out_dir(cfg)?;
    t.model.save(dir.join("model.bin"))?;
    t.bank.save(dir.join("bank.bin"))?;
    let mut r = Report::new("train");
    r.set("m", m as i64);
    r.set("q", q as i64);
    r.set("seed", seed as i64);
    r.set("loss", t.model.loss_kind.name());
    r.set("lambda", t.model.lambda);
    r.set("bank_fingerprint", hex(t.bank.fingerprint()));
    let meta = &t.model.training_meta;
    r.set("final_objective", meta.final_objective);
    if let Some(res) = meta.residual {
        r.set("residual", res);
    }
    if !t.validation.is_empty() {
        let mut csv = Csv::new(["lambda", "validation_error"]);
        for (l, e) in &t.validation {
            csv.row([l.to_string(), e.to_string()]);
        }
        csv.write(&dir.join("validation.csv"))?;
    }
    if !meta.epoch_objectives.is_empty() {
        let mut csv = Csv::new(["epoch", "objective"]);
        for (i, o) in meta.epoch_objectives.iter().enumerate() {
            csv.row([(i + 1).to_string(), o.to_string()]);
        }
        csv.write(&dir.join("epochs.csv"))?;
        r.set(
            "objective_monotone",
            meta.objective_monotone.unwrap_or(false),
        );
    }
    if let Some(test) = &splits.test {
        let e =
            evaluate_dataset(&t.bank, &t.model, test).context("evaluating on the test split")?;
        evaluation_entries(&mut r, &e);
        std::fs::write(dir.join("confusion.csv"), e.to_csv(&t.model.classes))?;
    }
    r.write(cfg, dir)
}

pub fn eval(
    cfg: &ExperimentConfig,
    model: Option<PathBuf>,
    bank: Option<PathBuf>,
    on_train: bool,
) -> CliResult<()> {
    let model_path = model.unwrap_or_else(|| cfg.output_dir.join("model.bin"));
    let bank_path = bank.unwrap_or_else(|| cfg.output_dir.join("bank.bin"));
    let model =
        LinearModel::load(&model_path).context(format!("reading {}", model_path.display()))?;
    let bank =
        ProjectionBank::load(&bank_path).context(format!("reading {}", bank_path.display()))?;
    let splits = load(cfg)?;
    let data = if on_train {
        &splits.train
    } else {
        require_test(&splits)?
    };
    let e = evaluate_dataset(&bank, &model, data).context("evaluating")?;
    let dir = out_dir(cfg)?;
    std::fs::write(dir.join("confusion.csv"), e.to_csv(&model.classes))?;
    let mut r = Report::new("eval");
    r.set("split", if on_train { "train" } else { "test" });
    r.set("model", model_path.display().to_string());
    evaluation_entries(&mut r, &e);
    r.write(cfg, dir)
}

pub fn kernel_probe(cfg: &ExperimentConfig) -> CliResult<()> {
    let p = &cfg.probe;
    let mut csv = Csv::new([
        "q",
        "rho",
        "kappa_mc",
        "kappa_stderr",
        "kappa_series",
        "expected_distance2",
    ]);
    for &q in &p.q {
        let model = KernelModel::new(q, &EstimationSettings::default())
            .context(format!("moments for q={q}"))?;
        for rho in p.rho_grid() {
            // One seed across the grid: common random numbers keep the curve smooth.
            let k = kappa_mc(q, rho, p.samples, p.seed)?;
            let d2 = model.sigma2 * (2.0 - 2.0 * rho * k.estimate);
            csv.row([
                q.to_string(),
                rho.to_string(),
                k.estimate.to_string(),
                k.stderr.to_string(),
                model.kappa_series(rho)?.to_string(),
                d2.to_string(),
            ]);
        }
    }
    let dir = out_dir(cfg)?;
    csv.write(&dir.join("kernel_probe.csv"))?;
    let mut r = Report::new("kernel-probe");
    r.set("rows", (p.q.len() * p.rho_points) as i64);
    r.write(cfg, dir)
}

pub fn embed(cfg: &ExperimentConfig) -> CliResult<()> {
    let splits = load(cfg)?;
    let data = &splits.train;
    let (m, q, seed, k) = (cfg.m[0], cfg.q[0], cfg.seeds[0], cfg.embed.k);
    let bank = ProjectionBank::sample(m, q, data.dim(), seed).context("sampling bank")?;
    let z = featurize_batch(&bank, data.x.view()).context("featurizing")?;
    let pca = fit_pca(z.values.view(), k).context("fitting PCA")?;
    let y = pca.transform_batch(z.values.view())?;
    let dir = out_dir(cfg)?;
    let mut head = vec!["id".to_string()];
    head.extend((1..=k).map(|c| format!("coord_{c}")));
    let mut csv = Csv::new(head);
    for (i, row) in y.rows().into_iter().enumerate() {
        csv.row(std::iter::once(i.to_string()).chain(row.iter().map(|v| v.to_string())));
    }
    csv.write(&dir.join("embedding.csv"))?;

    let mut r = Report::new("embed");
    r.set(
        "eigenvalues",
        pca.eigenvalues
            .iter()
            .map(|&v| toml::Value::from(v))
            .collect::<Vec<_>>(),
    );
    if cfg.embed.distance_curve {
        let header = ["orig_dist", "embed_dist", "q", "m", "seed"];
        let (mut raw, mut norm) = (Csv::new(header), Csv::new(header));
        let pairs = all_pairs(data.len());
        for &q in &cfg.q {
            let sigma = KernelModel::new(q, &EstimationSettings::default())?
                .sigma2
                .sqrt();
            for &s in &cfg.seeds {
                let b = ProjectionBank::sample(m, q, data.dim(), s)?;
                let rows = distance_curve(&b, data.x.view(), &pairs).context("distance curve")?;
                for (o, e) in rows {
                    raw.row([
                        o.to_string(),
                        e.to_string(),
                        q.to_string(),
                        m.to_string(),
                        s.to_string(),
                    ]);
                    norm.row([
                        o.to_string(),
                        (e / sigma).to_string(),
                        q.to_string(),
                        m.to_string(),
                        s.to_string(),
                    ]);
                }
            }
        }
        raw.write(&dir.join("distance_curve.csv"))?;
        norm.write(&dir.join("distance_curve_normalized.csv"))?;
        r.set("distance_pairs", pairs.len() as i64);
    }
    r.write(cfg, dir)
}

pub fn hash(cfg: &ExperimentConfig) -> CliResult<()> {
    let splits = load(cfg)?;
    let (m, q, seed) = (cfg.m[0], cfg.q[0], cfg.seeds[0]);
    let bank = ProjectionBank::sample(m, q, splits.train.dim(), seed).context("sampling bank")?;
    let mut head = vec!["id".to_string()];
    head.extend((1..=m).map(|l| format!("c_{l}")));
    let mut csv = Csv::new(head);
    for (i, row) in splits.train.x.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let code = hash_code(&bank, &x).context(format!("hashing row {i}"))?;
        csv.row(std::iter::once(i.to_string()).chain(code.indices.iter().map(|c| c.to_string())));
    }
    let dir = out_dir(cfg)?;
    csv.write(&dir.join("codes.csv"))?;
    let mut r = Report::new("hash");
    r.set("rows", splits.train.len() as i64);
    r.set("bank_fingerprint", hex(bank.fingerprint()));
    r.write(cfg, dir)
}

pub fn sweep(cfg: &ExperimentConfig) -> CliResult<()> {
    let splits = load(cfg)?;
    let test = require_test(&splits)?;
    let mut runs = Csv::new(["m", "q", "seed", "test_error", "lambda"]);
    let mut summary = Csv::new(["m", "q", "n_seeds", "mean_error", "std_error"]);
    let mut r = Report::new("sweep");
    for &m in &cfg.m {
        for &q in &cfg.q {
            let mut errors = Vec::with_capacity(cfg.seeds.len());
            for &seed in &cfg.seeds {
                let t = train_one(cfg, &splits.train, m, q, seed)?;
                let e = evaluate_dataset(&t.bank, &t.model, test)
                    .context(format!("evaluating m={m} q={q} seed={seed}"))?;
                runs.row([
                    m.to_string(),
                    q.to_string(),
                    seed.to_string(),
                    e.error_rate.to_string(),
                    t.model.lambda.to_string(),
                ]);
                errors.push(e.error_rate);
            }
            let (mu, sd) = (mean(&errors), sample_std(&errors));
            summary.row([
                m.to_string(),
                q.to_string(),
                errors.len().to_string(),
                mu.to_string(),
                sd.to_string(),
            ]);
            let mut cell = Table::new();
            cell.insert("m".into(), (m as i64).into());
            cell.insert("q".into(), (q as i64).into());
            cell.insert(
                "errors".into(),
                errors
                    .iter()
                    .map(|&e| toml::Value::from(e))
                    .collect::<Vec<_>>()
                    .into(),
            );
            cell.insert("mean".into(), mu.into());
            cell.insert("std".into(), sd.into());
            r.push_table("cells", cell);
        }
    }
    let dir = out_dir(cfg)?;
    runs.write(&dir.join("sweep.csv"))?;
    summary.write(&dir.join("sweep_summary.csv"))?;
    r.write(cfg, dir)
}
