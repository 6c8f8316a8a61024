use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use proxyhash::codespace::{read_codes, write_codebook, write_codes};
use proxyhash::data::{
    read_labels, split, synth_generate, write_labels, NoiseScale, Split, SplitSpec, Standardizer, SynthConfig,
};
use proxyhash::pipeline::{evaluate, train, CrossModalMap, TrainedModel, Variant};
use proxyhash::retrieval::{
    mean_average_precision, pr_curve, precision_curve, write_map_csv, write_pn_csv, write_pr_csv, MapRow, RetrievalSet,
};
use proxyhash::trainer::{encode_all, Objective};
use proxyhash::{Mlp, Modality, PairedDataset, TrainConfig};

use crate::args::{AblateArgs, EncodeArgs, EvalArgs, GenDataArgs, Param, Rows, SweepArgs, TrainArgs, TrainingOptions};
use crate::config::write_manifest;

pub const CODEBOOK_FILE: &str = "codebook.pxc";
pub const PHNET_FILE: &str = "phnet.pxw";
pub const IMG_NET_FILE: &str = "img.pxw";
pub const TXT_NET_FILE: &str = "txt.pxw";
pub const IMG_STD_FILE: &str = "img.pxz";
pub const TXT_STD_FILE: &str = "txt.pxz";
pub const SPLIT_FILE: &str = "split.txt";
pub const LOSS_FILE: &str = "loss.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let noise = match (args.sigma, args.sigma_gap) {
        (Some(s), _) => NoiseScale::Absolute(s),
        (None, g) => NoiseScale::GapFraction(g.unwrap_or(0.5)),
    };
    let cfg = SynthConfig {
        categories: args.categories,
        n: args.n,
        dim_img: args.dv,
        dim_txt: args.dt,
        noise,
        multi_label_prob: args.multi_prob,
        seed: args.seed,
    };
    let synth = synth_generate(&cfg)?;
    synth.data.save(&args.out)?;
    println!(
        "wrote {} pairs (c={}, d_v={}, d_t={}, sigma_img={:.4}, sigma_txt={:.4}) to {}",
        args.n,
        args.categories,
        args.dv,
        args.dt,
        synth.img_sigma,
        synth.txt_sigma,
        args.out.display()
    );
    Ok(())
}

/// A loaded dataset with its split, standardized when requested.
struct Prepared {
    data: PairedDataset,
    split: Split,
    standardizers: Option<(Standardizer, Standardizer)>,
}

impl Prepared {
    fn train_set(&self) -> PairedDataset {
        self.data.subset(&self.split.train)
    }
}

fn prepare(opts: &TrainingOptions) -> Result<Prepared> {
    let raw = PairedDataset::load(&opts.data)?;
    let n = raw.len();
    let query = opts.query.unwrap_or(n / 5);
    let train_count = opts.train_count.unwrap_or(n.saturating_sub(query));
    let spec = SplitSpec { query, train: train_count, seed: opts.split_seed.unwrap_or(opts.seed) };
    let split = split(n, &spec)?;
    if split.train.is_empty() {
        bail!(proxyhash::Error::Config("the training split is empty".into()));
    }
    let (data, standardizers) = if opts.standardize {
        let (img, txt) = raw.fit_standardizers(&split.train);
        (raw.standardize_with(&img, &txt)?, Some((img, txt)))
    } else {
        (raw, None)
    };
    Ok(Prepared { data, split, standardizers })
}

fn train_config(opts: &TrainingOptions) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let hp = &mut cfg.hp;
    hp.bits = opts.bits.unwrap_or(hp.bits);
    hp.alpha = opts.alpha.unwrap_or(hp.alpha);
    hp.beta = opts.beta.unwrap_or(hp.beta);
    hp.eta = opts.eta.unwrap_or(hp.eta);
    hp.mu = opts.mu.unwrap_or(hp.mu);
    hp.lambda = opts.lambda.unwrap_or(hp.lambda);
    hp.gamma = opts.gamma.unwrap_or(hp.gamma);
    let m = &mut cfg.modality;
    m.learning_rate = opts.lr.unwrap_or(m.learning_rate);
    m.batch_size = opts.batch.unwrap_or(m.batch_size);
    m.epochs = opts.epochs.unwrap_or(m.epochs);
    m.seed = opts.seed;
    let p = &mut cfg.phnet;
    p.learning_rate = opts.phnet_lr.unwrap_or(p.learning_rate);
    p.epochs = opts.phnet_epochs.unwrap_or(p.epochs);
    p.seed = opts.seed;
    if opts.no_early_stop {
        cfg.convergence.window = 0;
    }
    cfg.validate()?;
    if cfg.modality.epochs == 0 {
        warn("--epochs 0 leaves the image and text networks at their initialization");
    }
    if cfg.phnet.epochs == 0 {
        warn("--phnet-epochs 0 takes proxy codes from the untrained proxy network");
    }
    Ok(cfg)
}

/// Resolved training options in manifest form.
fn training_entries(opts: &TrainingOptions, cfg: &TrainConfig, prep: &Prepared) -> Vec<(&'static str, String)> {
    let hp = &cfg.hp;
    vec![
        ("data", opts.data.display().to_string()),
        ("bits", hp.bits.to_string()),
        ("alpha", hp.alpha.to_string()),
        ("beta", hp.beta.to_string()),
        ("eta", hp.eta.to_string()),
        ("mu", hp.mu.to_string()),
        ("lambda", hp.lambda.to_string()),
        ("gamma", hp.gamma.to_string()),
        ("lr", cfg.modality.learning_rate.to_string()),
        ("batch", cfg.modality.batch_size.to_string()),
        ("epochs", cfg.modality.epochs.to_string()),
        ("phnet-lr", cfg.phnet.learning_rate.to_string()),
        ("phnet-epochs", cfg.phnet.epochs.to_string()),
        ("seed", opts.seed.to_string()),
        ("query", prep.split.query.len().to_string()),
        ("train-count", prep.split.train.len().to_string()),
        ("split-seed", opts.split_seed.unwrap_or(opts.seed).to_string()),
        ("standardize", opts.standardize.to_string()),
        ("no-early-stop", opts.no_early_stop.to_string()),
    ]
}

fn fit(prep: &Prepared, cfg: &TrainConfig, label: &str) -> Result<TrainedModel> {
    let start = Instant::now();
    let model = train(&prep.train_set(), cfg, |r, _| {
        if r.epoch % 10 == 0 {
            eprintln!(
                "[{label}] epoch {:>4} objective {:.6} flipped {:.4} ({:.1}s)",
                r.epoch,
                r.objective,
                r.flipped,
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    Ok(model)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let opts = &args.training;
    let cfg = train_config(opts)?;
    let prep = prepare(opts)?;
    create_dir(&args.out)?;
    let model = fit(&prep, &cfg, "train")?;

    let out = &args.out;
    write_codebook(&out.join(CODEBOOK_FILE), &model.codebook)?;
    model.phnet.save(&out.join(PHNET_FILE))?;
    model.networks.img.save(&out.join(IMG_NET_FILE))?;
    model.networks.txt.save(&out.join(TXT_NET_FILE))?;
    model.report.write_loss_csv(&out.join(LOSS_FILE))?;
    write_split(&out.join(SPLIT_FILE), prep.data.len(), &prep.split)?;
    if let Some((img, txt)) = &prep.standardizers {
        img.save(&out.join(IMG_STD_FILE))?;
        txt.save(&out.join(TXT_STD_FILE))?;
    }
    let mut entries = training_entries(opts, &cfg, &prep);
    entries.push(("out", out.display().to_string()));
    write_manifest(&out.join(MANIFEST_FILE), "train", &entries)?;

    let last = model.report.modality.last().expect("epoch-0 report always present");
    println!(
        "trained {} categories, k={}: {} modality epochs (converged: {}), final objective {:.6}; model in {}",
        model.codebook.categories(),
        model.codebook.bits(),
        last.epoch,
        model.report.converged,
        last.objective,
        out.display()
    );
    Ok(())
}

fn write_split(path: &Path, n: usize, split: &Split) -> Result<()> {
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let text = format!("n={n}\nquery={}\ntrain={}\n", join(&split.query), join(&split.train));
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Returns `(n, query, train)`.
fn read_split(path: &Path) -> Result<(usize, Vec<usize>, Vec<usize>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bad = |msg: &str| proxyhash::Error::Format { path: path.to_path_buf(), msg: msg.into() };
    let (mut n, mut query, mut train) = (None, None, None);
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        let list = || -> Result<Vec<usize>, proxyhash::Error> {
            value.split_whitespace().map(|v| v.parse().map_err(|_| bad("bad index"))).collect()
        };
        match key {
            "n" => n = Some(value.trim().parse().map_err(|_| bad("bad n"))?),
            "query" => query = Some(list()?),
            "train" => train = Some(list()?),
            _ => {}
        }
    }
    match (n, query, train) {
        (Some(n), Some(q), Some(t)) if q.iter().chain(&t).all(|&i| i < n) => Ok((n, q, t)),
        _ => Err(bad("missing or out-of-range split entries").into()),
    }
}

pub fn encode_cmd(args: &EncodeArgs) -> Result<()> {
    let modality = Modality::from(args.modality);
    let net_file = match modality {
        Modality::Image => IMG_NET_FILE,
        Modality::Text => TXT_NET_FILE,
    };
    let net = Mlp::load(&args.model.join(net_file))?;
    let mut data = PairedDataset::load(&args.data)?;
    let (img_std, txt_std) = (args.model.join(IMG_STD_FILE), args.model.join(TXT_STD_FILE));
    if img_std.exists() || txt_std.exists() {
        data = data.standardize_with(&Standardizer::load(&img_std)?, &Standardizer::load(&txt_std)?)?;
    }
    if args.rows != Rows::All {
        let (n, query, train) = read_split(&args.model.join(SPLIT_FILE))?;
        if n != data.len() {
            bail!(proxyhash::Error::InvalidInput(format!(
                "model split covers {n} rows but the dataset has {}",
                data.len()
            )));
        }
        let rows = match args.rows {
            Rows::Query => query,
            Rows::Train => train,
            Rows::Retrieval => {
                let mut in_query = vec![false; n];
                query.iter().for_each(|&i| in_query[i] = true);
                (0..n).filter(|&i| !in_query[i]).collect()
            }
            Rows::All => unreachable!(),
        };
        data = data.subset(&rows);
    }
    let codes = encode_all(&net, data.features(modality))?;
    write_codes(&args.out, &codes)?;
    if let Some(path) = &args.labels_out {
        write_labels(path, data.labels())?;
    }
    println!("encoded {} {} rows to {} bits in {}", codes.len(), modality.name(), net.output_dim(), args.out.display());
    Ok(())
}

fn load_coded_set(codes: &Path, labels: &Path) -> Result<RetrievalSet> {
    let (_, codes) = read_codes(codes)?;
    let labels = read_labels(labels, codes.len())?;
    Ok(RetrievalSet::new(codes, &labels)?)
}

pub fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let queries = load_coded_set(&args.query_codes, &args.query_labels)?;
    let set = load_coded_set(&args.set_codes, &args.set_labels)?;
    if queries.bits() != set.bits() {
        bail!(proxyhash::Error::Dimension { expected: set.bits(), got: queries.bits() });
    }
    if args.n > set.len() {
        warn(format!("--n {} exceeds the set size; using {}", args.n, set.len()));
    }
    let map = mean_average_precision(&queries, &set, args.n)?;
    let pn = precision_curve(&queries, &set, &args.pn_cutoffs)?;
    if pn.len() < args.pn_cutoffs.len() {
        warn(format!("precision@N cutoffs above the set size ({}) were dropped", set.len()));
    }
    let pr = pr_curve(&queries, &set)?;
    if !pr.excluded_queries.is_empty() {
        warn(format!("{} queries have no relevant item and are left out of recall", pr.excluded_queries.len()));
    }
    create_dir(&args.out_dir)?;
    let row = MapRow { task: args.task.name().to_string(), bits: set.bits(), map };
    write_map_csv(&args.out_dir.join("map.csv"), &[row])?;
    write_pn_csv(&args.out_dir.join("pn.csv"), &pn)?;
    write_pr_csv(&args.out_dir.join("pr.csv"), &pr)?;
    let path_entry = |p: &PathBuf| p.display().to_string();
    write_manifest(
        &args.out_dir.join(MANIFEST_FILE),
        "eval",
        &[
            ("query-codes", path_entry(&args.query_codes)),
            ("query-labels", path_entry(&args.query_labels)),
            ("set-codes", path_entry(&args.set_codes)),
            ("set-labels", path_entry(&args.set_labels)),
            ("task", args.task.name().to_string()),
            ("n", args.n.to_string()),
            ("pn-cutoffs", args.pn_cutoffs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
            ("out-dir", path_entry(&args.out_dir)),
        ],
    )?;
    println!("map {} @{} bits: {:.6}", args.task.name(), set.bits(), map);
    Ok(())
}

fn train_and_evaluate(prep: &Prepared, cfg: &TrainConfig, n: usize, label: &str) -> Result<CrossModalMap> {
    let model = fit(prep, cfg, label)?;
    Ok(evaluate(&model.networks, &prep.data, &prep.split, n)?)
}

fn require_queries(prep: &Prepared, n: usize) -> Result<()> {
    if prep.split.query.is_empty() {
        bail!(proxyhash::Error::Config("evaluation needs --query > 0".into()));
    }
    if n > prep.split.retrieval.len() {
        warn(format!("--n {n} exceeds the retrieval set size; using {}", prep.split.retrieval.len()));
    }
    Ok(())
}

pub fn ablate_cmd(args: &AblateArgs) -> Result<()> {
    let opts = &args.training;
    let base = train_config(opts)?;
    let prep = prepare(opts)?;
    require_queries(&prep, args.n)?;
    create_dir(&args.out_dir)?;
    let mut variants: Vec<Variant> = Vec::new();
    for v in args.variant.iter().map(|&v| Variant::from(v)) {
        if variants.contains(&v) {
            warn(format!("variant {} listed twice; running it once", v.name()));
        } else {
            variants.push(v);
        }
    }

    let mut csv = String::from("variant,bits,map_i2t,map_t2i\n");
    for &variant in &variants {
        let cfg = variant.configure(&base);
        let map = train_and_evaluate(&prep, &cfg, args.n, variant.name())?;
        writeln!(csv, "{},{},{:.6},{:.6}", variant.name(), cfg.hp.bits, map.i2t, map.t2i).unwrap();
        println!("{:<9} map i2t {:.6} t2i {:.6}", variant.name(), map.i2t, map.t2i);
        let mut entries = training_entries(opts, &cfg, &prep);
        entries.push(("variant", variant.name().to_string()));
        entries.push(("n", args.n.to_string()));
        entries.push(("out-dir", args.out_dir.display().to_string()));
        let objective = match cfg.objective {
            Objective::MarginSoftmax => "margin-softmax",
            Objective::Pairwise => "pairwise",
        };
        write_manifest(
            &args.out_dir.join(format!("manifest-{}.txt", variant.name())),
            &format!("ablate (objective {objective})"),
            &entries,
        )?;
    }
    let path = args.out_dir.join("ablation.csv");
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    let mut entries = training_entries(opts, &base, &prep);
    entries.push(("variant", variants.iter().map(|v| v.name()).collect::<Vec<_>>().join(",")));
    entries.push(("n", args.n.to_string()));
    entries.push(("out-dir", args.out_dir.display().to_string()));
    write_manifest(&args.out_dir.join(MANIFEST_FILE), "ablate", &entries)
}

fn param_name(p: Param) -> &'static str {
    match p {
        Param::Alpha => "alpha",
        Param::Beta => "beta",
        Param::Eta => "eta",
        Param::Mu => "mu",
        Param::Lambda => "lambda",
        Param::Gamma => "gamma",
    }
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let opts = &args.training;
    let base = train_config(opts)?;
    let mut values: Vec<f64> = Vec::new();
    for &v in &args.values {
        if values.contains(&v) {
            warn(format!("value {v} listed twice; running it once"));
        } else {
            values.push(v);
        }
    }
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            let hp = &mut cfg.hp;
            *match args.param {
                Param::Alpha => &mut hp.alpha,
                Param::Beta => &mut hp.beta,
                Param::Eta => &mut hp.eta,
                Param::Mu => &mut hp.mu,
                Param::Lambda => &mut hp.lambda,
                Param::Gamma => &mut hp.gamma,
            } = v;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let prep = prepare(opts)?;
    require_queries(&prep, args.n)?;
    create_dir(&args.out_dir)?;

    let name = param_name(args.param);
    let mut csv = String::from("value,map_i2t,map_t2i\n");
    for (v, cfg) in values.iter().zip(&configs) {
        let map = train_and_evaluate(&prep, cfg, args.n, &format!("{name}={v}"))?;
        writeln!(csv, "{v},{:.6},{:.6}", map.i2t, map.t2i).unwrap();
        println!("{name}={v} map i2t {:.6} t2i {:.6}", map.i2t, map.t2i);
    }
    let path = args.out_dir.join("sweep.csv");
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    let mut entries = training_entries(opts, &base, &prep);
    entries.retain(|(k, _)| *k != name);
    entries.push(("param", name.to_string()));
    entries.push(("values", values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")));
    entries.push(("n", args.n.to_string()));
    entries.push(("out-dir", args.out_dir.display().to_string()));
    write_manifest(&args.out_dir.join(MANIFEST_FILE), "sweep", &entries)
}
