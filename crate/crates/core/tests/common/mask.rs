//! Paired runs with and without injected invalid positions.

use ppgstage::model::{init_params, ModelSpec};
use ppgstage::superwin::{build_contiguous, SuperWindow, SuperWindowSet};
use ppgstage::tensorcore::{GradMap, ParamStore, Tape};
use ppgstage::traineval::{evaluate, loss_and_grads, Batch, StageLabel};
use ppgstage::WINDOW_SAMPLES;
use rand::Rng;

use super::{rand_tensor, random_grid, rng};

fn grad_diff(a: &GradMap<f64>, b: &GradMap<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .map(|(name, g)| {
            g.data()
                .iter()
                .zip(b[name].data())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn loss_grads(params: &ParamStore<f64>, spec: &ModelSpec, items: &[&SuperWindow]) -> (f64, GradMap<f64>) {
    loss_and_grads(params, spec, &Batch::from_items(items).unwrap()).unwrap()
}

fn padding_item(subject: &str, q: usize) -> SuperWindow {
    SuperWindow {
        subject_id: subject.into(),
        windows: vec![0.0; q * WINDOW_SAMPLES],
        labels: vec![StageLabel::Unscored; q],
        valid: vec![false; q],
        source_indices: vec![-1; q],
    }
}

/// Largest change in loss, any gradient entry, or any metric caused by
/// injecting invalid positions, over several scenarios:
/// extra masked rows at the loss, an all-padding super-window, a
/// super-window of real signal scored Unscored, relabelled invalid rows,
/// and the same injections at evaluation time.
pub fn mask_neutrality(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;

    // Loss level: masked rows appended to the logits.
    let n = r.gen_range(2..12);
    let extra = r.gen_range(1..6);
    let logits = rand_tensor(&mut r, &[n, 4], 3.0);
    let targets: Vec<Option<usize>> = (0..n).map(|i| if i == 0 || r.gen_bool(0.8) { Some(r.gen_range(0..4)) } else { None }).collect();
    let mut padded = logits.data().to_vec();
    padded.extend(rand_tensor(&mut r, &[extra, 4], 3.0).data());
    let mut padded_targets = targets.clone();
    padded_targets.extend(std::iter::repeat(None).take(extra));
    let run = |data: Vec<f64>, t: &[Option<usize>]| {
        let mut tape = Tape::new();
        let rows = t.len();
        let x = tape.leaf(ppgstage::tensorcore::Tensor::new(vec![rows, 4], data).unwrap());
        let loss = tape.masked_softmax_ce(x, t).unwrap();
        let g = tape.backward(loss).unwrap().get(x).unwrap().data().to_vec();
        (tape.value(loss).data()[0], g)
    };
    let (l0, g0) = run(logits.data().to_vec(), &targets);
    let (l1, g1) = run(padded, &padded_targets);
    worst = worst.max((l0 - l1).abs());
    worst = worst.max(g0.iter().zip(&g1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    worst = worst.max(g1[n * 4..].iter().map(|v| v.abs()).fold(0.0, f64::max));

    // Model level.
    let spec = ModelSpec::reduced();
    let params: ParamStore<f64> = init_params(&spec, seed).unwrap();
    let q = 4;
    let grid = random_grid("m", r.gen_range(5..11), &mut r);
    let set = build_contiguous(&grid, q).unwrap();
    let base: Vec<&SuperWindow> = set.items.iter().collect();
    let (l0, g0) = loss_grads(&params, &spec, &base);

    let pad = padding_item("m", q);
    let mut unscored = set.items[0].clone();
    unscored.labels = vec![StageLabel::Unscored; q];
    unscored.valid = vec![false; q];
    let mut relabelled = set.items.clone();
    for sw in &mut relabelled {
        for (l, v) in sw.labels.iter_mut().zip(&sw.valid) {
            if !v {
                *l = StageLabel::Deep;
            }
        }
    }

    let mut with_pad = base.clone();
    with_pad.push(&pad);
    let mut with_unscored = base.clone();
    with_unscored.insert(0, &unscored);
    let relabelled_refs: Vec<&SuperWindow> = relabelled.iter().collect();
    for items in [with_pad, with_unscored, relabelled_refs] {
        let (l1, g1) = loss_grads(&params, &spec, &items);
        worst = worst.max((l0 - l1).abs()).max(grad_diff(&g0, &g1));
    }

    // Evaluation level.
    let m0 = evaluate(&params, &spec, &set).unwrap();
    let mut injected = SuperWindowSet {
        spec: set.spec,
        items: set.items.clone(),
    };
    injected.items.push(pad);
    injected.items.insert(0, unscored);
    injected.items.extend(relabelled.into_iter().map(|mut sw| {
        sw.valid = vec![false; q];
        sw
    }));
    let m1 = evaluate(&params, &spec, &injected).unwrap();
    assert_eq!(m0.confusion, m1.confusion);
    for (a, b) in m0.metrics.as_array().iter().zip(m1.metrics.as_array()) {
        worst = worst.max((a - b).abs());
    }
    worst
}
