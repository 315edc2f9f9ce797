mod common;

use ppgstage::datagen::{gen_dataset, gen_subject, stationary, SynthConfig};
use ppgstage::traineval::StageLabel;
use ppgstage::EPOCH_SECONDS;

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
}

/// Mean inter-peak interval (s) of one epoch of a noise-free pulse train.
fn mean_interval(epoch: &[f32], fs: f64) -> Option<f64> {
    let peaks: Vec<usize> = (1..epoch.len() - 1)
        .filter(|&i| epoch[i] > 0.5 && epoch[i] > epoch[i - 1] && epoch[i] >= epoch[i + 1])
        .collect();
    (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64 / fs)
}

#[test]
fn empirical_stages_follow_the_stationary_law() {
    let cfg = SynthConfig {
        subjects: 60,
        hours: 1.0,
        sample_rate_hz: 8.0,
        unscored_fraction: 0.0,
        seed: 11,
        ..SynthConfig::default()
    };
    let recs = gen_dataset(&cfg).unwrap();
    let mut counts = [0usize; 4];
    for r in &recs {
        for l in &r.labels {
            counts[StageLabel::from(*l).class_index().unwrap()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    // Independent power iteration on the raw matrix.
    let p = cfg.transitions;
    let mut pi = [0.25f64; 4];
    for _ in 0..10_000 {
        let mut next = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                next[j] += pi[i] * p[i][j];
            }
        }
        pi = next;
    }
    let lib = stationary(&p);
    for k in 0..4 {
        assert!((lib[k] - pi[k]).abs() < 1e-9);
    }
    let tv: f64 = (0..4).map(|k| (counts[k] as f64 / total as f64 - pi[k]).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.05, "total variation {tv}, counts {counts:?}, stationary {pi:?}");
}

#[test]
fn deep_and_wake_rates_are_separable() {
    let cfg = SynthConfig {
        subjects: 6,
        noise_std: 0.0,
        unscored_fraction: 0.0,
        ..SynthConfig::default()
    };
    let per_epoch = (EPOCH_SECONDS * cfg.sample_rate_hz) as usize;
    let (mut wake, mut deep) = (Vec::new(), Vec::new());
    for r in gen_dataset(&cfg).unwrap() {
        for (epoch, l) in r.samples.chunks(per_epoch).zip(&r.labels) {
            let Some(iv) = mean_interval(epoch, cfg.sample_rate_hz) else { continue };
            match StageLabel::from(*l) {
                StageLabel::Wake => wake.push(iv),
                StageLabel::Deep => deep.push(iv),
                _ => {}
            }
        }
    }
    assert!(wake.len() > 20 && deep.len() > 20);
    let (mw, sw) = mean_std(&wake);
    let (md, sd) = mean_std(&deep);
    assert!((md - mw).abs() > 3.0 * (sw * sw + sd * sd).sqrt(), "wake {mw}±{sw} deep {md}±{sd}");
}

#[test]
fn dataset_is_deterministic_and_indexed() {
    let cfg = SynthConfig {
        subjects: 20,
        hours: 0.25,
        ..SynthConfig::default()
    };
    let a = gen_dataset(&cfg).unwrap();
    assert_eq!(a.len(), 20);
    let ids: std::collections::BTreeSet<_> = a.iter().map(|r| r.subject_id.clone()).collect();
    assert_eq!(ids.len(), 20);
    for (i, r) in a.iter().enumerate() {
        let again = gen_subject(&cfg, i).unwrap();
        assert_eq!(again.samples, r.samples);
        assert_eq!(r.labels.len() * 30 * 64, r.samples.len());
        assert!(r.samples.iter().all(|v| v.is_finite()));
    }
    assert_ne!(a[0].samples, a[1].samples);
    let reseeded = gen_subject(&SynthConfig { seed: 1, ..cfg.clone() }, 0).unwrap();
    assert_ne!(reseeded.samples, a[0].samples);
}

#[test]
fn separable_preset_is_valid() {
    let cfg = SynthConfig::separable();
    cfg.validate().unwrap();
    assert_eq!(cfg.transitions, SynthConfig::default().transitions);
}
