use proxyhash::data::{min_prototype_gap, split, synth_generate, NoiseScale, SplitSpec, SynthConfig};
use proxyhash::{Modality, PairedDataset};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn primary_labels_are_uniform() {
    let cfg = SynthConfig { noise: NoiseScale::Absolute(0.5), ..Default::default() };
    let data = synth_generate(&cfg).unwrap().data;
    let c = cfg.categories;
    let mut counts = vec![0.0; c];
    for i in 0..data.len() {
        let row = data.label_row(i);
        assert_eq!(row.iter().map(|&v| u32::from(v)).sum::<u32>(), 1);
        counts[row.iter().position(|&v| v == 1).unwrap()] += 1.0;
    }
    let expected = data.len() as f64 / c as f64;
    let stat: f64 = counts.iter().map(|o| (o - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((c - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat:.3}, p = {p:.4}, counts {counts:?}");
}

#[test]
fn noiseless_categories_collapse_to_prototypes() {
    let cfg = SynthConfig { n: 300, noise: NoiseScale::Absolute(0.0), ..Default::default() };
    let synth = synth_generate(&cfg).unwrap();
    let data = &synth.data;
    for i in 0..data.len() {
        let cat = data.label_row(i).iter().position(|&v| v == 1).unwrap();
        for (m, protos) in [(Modality::Image, &synth.img_prototypes), (Modality::Text, &synth.txt_prototypes)] {
            let row = data.features(m).row(i);
            assert!(row.iter().zip(protos.row(cat)).all(|(&a, &b)| a == b as f32));
        }
    }
}

#[test]
fn noise_norm_tracks_sigma() {
    let cfg = SynthConfig { n: 2000, dim_img: 256, dim_txt: 16, noise: NoiseScale::GapFraction(0.5), ..Default::default() };
    let synth = synth_generate(&cfg).unwrap();
    assert!((synth.img_sigma - 0.5 * min_prototype_gap(&synth.img_prototypes)).abs() < 1e-12);
    for (m, protos, sigma) in [
        (Modality::Image, &synth.img_prototypes, synth.img_sigma),
        (Modality::Text, &synth.txt_prototypes, synth.txt_sigma),
    ] {
        let mut sq = 0.0;
        for i in 0..synth.data.len() {
            let cat = synth.data.label_row(i).iter().position(|&v| v == 1).unwrap();
            let x = synth.data.features(m).row(i);
            sq += x.iter().zip(protos.row(cat)).map(|(&a, &b)| (f64::from(a) - b).powi(2)).sum::<f64>();
        }
        let rms = (sq / synth.data.len() as f64).sqrt();
        assert!((rms / sigma - 1.0).abs() < 0.05, "{m:?}: rms {rms} vs sigma {sigma}");
    }
}

#[test]
fn multi_label_rate_matches_probability() {
    let cfg = SynthConfig { n: 4000, multi_label_prob: 0.25, ..Default::default() };
    let data = synth_generate(&cfg).unwrap().data;
    let total: f64 = data.labels().iter().map(|&v| f64::from(v)).sum();
    let mean_extra = total / data.len() as f64 - 1.0;
    let expected = 0.25 * (cfg.categories - 1) as f64;
    // Binomial(7, 0.25) per row; the mean over 4000 rows has sd ≈ 0.018.
    assert!((mean_extra - expected).abs() < 0.08, "{mean_extra} vs {expected}");
}

#[test]
fn generation_and_split_are_deterministic() {
    let cfg = SynthConfig { n: 200, seed: 9, ..Default::default() };
    let a = synth_generate(&cfg).unwrap().data;
    let b = synth_generate(&cfg).unwrap().data;
    assert_eq!(a, b);
    let spec = SplitSpec { query: 50, train: 100, seed: 4 };
    let s1 = split(200, &spec).unwrap();
    assert_eq!(s1, split(200, &spec).unwrap());
    assert_eq!(s1.query.len(), 50);
    assert_eq!(s1.retrieval.len(), 150);
    assert!(s1.query.iter().all(|q| !s1.retrieval.contains(q)));
    assert!(s1.train.iter().all(|t| s1.retrieval.contains(t)));
}

#[test]
fn save_load_round_trip_on_disk() {
    let data = synth_generate(&SynthConfig { n: 50, multi_label_prob: 0.3, ..Default::default() }).unwrap().data;
    let dir = tempfile::tempdir().unwrap();
    data.save(dir.path()).unwrap();
    let back = PairedDataset::load(dir.path()).unwrap();
    assert_eq!(back, data);
}
