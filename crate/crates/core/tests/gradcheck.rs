//! Model gradients against central finite differences.

use slotie_core::matching::{loss_and_gradient, loss_with_assignment, Assignment};
use slotie_core::nn::{EncoderConfig, Graph, ModelConfig, ParamId, Tagger, Vocab};
use slotie_core::{LabelGrid, LossConfig, TokenClass::*, TokenSequence, TripletMask};

const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-6;

fn toy(seed: u64) -> (Tagger, TokenSequence, LabelGrid) {
    let seq = TokenSequence::from_tokens(["Einstein", "is", "physicist"]);
    let vocab = Vocab::build([&seq]);
    let encoder = EncoderConfig { hidden: 8, blocks: 2, ff_hidden: 16, max_len: 8, ..EncoderConfig::default() };
    let model = Tagger::new(&ModelConfig { encoder, slots: 4, seed }, vocab).unwrap();
    let gold = LabelGrid::new(
        3,
        vec![TripletMask::new(vec![Subject, Relation, Object]), TripletMask::new(vec![Object, Relation, Background])],
    )
    .unwrap();
    (model, seq, gold)
}

fn fixed_loss(model: &Tagger, seq: &TokenSequence, gold: &LabelGrid, a: &Assignment) -> f64 {
    let p = model.forward(seq).unwrap();
    loss_with_assignment(&p, gold, a, &LossConfig::default()).unwrap()
}

/// Largest relative error over every parameter scalar.
pub fn max_relative_error(seed: u64) -> f64 {
    let (mut model, seq, gold) = toy(seed);
    let mut g = Graph::new();
    let probs = model.forward_graph(&mut g, &seq).unwrap();
    let p = model.forward(&seq).unwrap();
    assert_eq!(p.as_slice(), g.value(probs));
    let (out, grad) = loss_and_gradient(&p, &gold, &LossConfig::default()).unwrap();
    let node = g.external_loss(probs, out.loss, grad);
    g.backward(node, model.params_mut()).unwrap();
    let ids: Vec<ParamId> = model.params().ids().collect();
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| model.params().get(id).grad.clone().unwrap_or_else(|| vec![0.0; model.params().get(id).len()]))
        .collect();
    model.params_mut().zero_grad();

    let mut worst: f64 = 0.0;
    for (k, &id) in ids.iter().enumerate() {
        for i in 0..model.params().get(id).len() {
            let orig = model.params().get(id).data[i];
            model.params_mut().get_mut(id).data[i] = orig + STEP;
            let up = fixed_loss(&model, &seq, &gold, &out.assignment);
            model.params_mut().get_mut(id).data[i] = orig - STEP;
            let down = fixed_loss(&model, &seq, &gold, &out.assignment);
            model.params_mut().get_mut(id).data[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[k][i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..10 {
        let err = max_relative_error(seed);
        assert!(err < 1e-3, "seed {seed}: max relative error {err:e}");
    }
}
