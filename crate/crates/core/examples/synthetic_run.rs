//! Trains and evaluates on a generated dataset, printing progress.
//!
//! `cargo run --release --example synthetic_run -- [phnet_lr] [modality_lr] [multi_prob]`

use std::time::Instant;

use proxyhash::codespace::inner_product;
use proxyhash::data::{split, synth_generate, SplitSpec, SynthConfig};
use proxyhash::pipeline::{evaluate, train};
use proxyhash::TrainConfig;

fn main() -> proxyhash::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("number")).collect();
    let mut cfg = TrainConfig::default();
    if let Some(&lr) = args.first() {
        cfg.phnet.learning_rate = lr;
    }
    if let Some(&lr) = args.get(1) {
        cfg.modality.learning_rate = lr;
    }
    let synth = SynthConfig { multi_label_prob: args.get(2).copied().unwrap_or(0.0), ..Default::default() };
    let data = synth_generate(&synth)?.data;
    let sp = split(data.len(), &SplitSpec { query: 500, train: 2000, seed: 0 })?;
    let train_set = data.subset(&sp.train);

    let start = Instant::now();
    let model = train(&train_set, &cfg, |r, nets| {
        if r.epoch % 10 == 0 {
            let map = evaluate(nets, &data, &sp, 5000).unwrap();
            println!(
                "epoch {:>3} obj {:.5} (sv {:.4} st {:.4} inter {:.4} q {:.3}) flip {:.4} map i2t {:.4} t2i {:.4} [{:.1}s]",
                r.epoch, r.objective, r.parts.intra_img, r.parts.intra_txt, r.parts.inter,
                r.parts.quantization, r.flipped, map.i2t, map.t2i, start.elapsed().as_secs_f64()
            );
        }
    })?;
    let losses = &model.report.phnet_losses;
    println!("phnet epochs {} first {:.4} last {:.4}", losses.len(), losses[0], losses[losses.len() - 1]);
    let g = &model.codebook;
    let mut max_ip = i64::MIN;
    for i in 0..g.categories() {
        for j in i + 1..g.categories() {
            max_ip = max_ip.max(inner_product(g.code(i), g.code(j))?);
        }
    }
    println!("max proxy inner product {max_ip}");
    let map = evaluate(&model.networks, &data, &sp, 5000)?;
    println!(
        "final: epochs {} converged {} map i2t {:.4} t2i {:.4} in {:.1}s",
        model.report.modality.len() - 1,
        model.report.converged,
        map.i2t,
        map.t2i,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
