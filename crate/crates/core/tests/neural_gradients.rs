use editdiff::model::neural::{NeuralConfig, NeuralModel, StepExample};
use editdiff::rng::{seeded, stream};
use editdiff::tasks::{synthesize, task_vocab, Task};
use editdiff::{CorruptionConfig, Corruptor};
use rand::seq::SliceRandom;

/// Analytic gradients against central differences on 100 parameters per
/// input, half from each network, for three corrupted inputs.
#[test]
fn analytic_gradients_match_finite_differences() {
    let vocab = task_vocab();
    let mut model = NeuralModel::new(vocab.len(), NeuralConfig::default()).unwrap();
    let corruptor = Corruptor::new(CorruptionConfig::default(), &vocab).unwrap();
    let records = synthesize(Task::Substitute, 3, 5);
    let mut worst: f64 = 0.0;
    for (i, r) in records.iter().enumerate() {
        let ex = corruptor.make_training_example(&r.target, &mut stream(21, i as u64)).unwrap();
        let step = StepExample { x: &ex.input, source: Some(&r.source), tags: &ex.tags, payloads: &ex.payloads };
        let g = model.gradients(&step, 1.0, 1.0).unwrap();
        let mut rng = seeded(i as u64);
        for (generator, grads) in [(false, &g.tagger), (true, &g.generator)] {
            let mut live: Vec<usize> = (0..grads.len()).filter(|&k| grads[k].abs() >= 1e-4).collect();
            assert!(live.len() >= 50, "only {} live parameters", live.len());
            live.shuffle(&mut rng);
            for &k in &live[..50] {
                let numeric = model.numeric_gradient(&step, generator, k, 1e-5, (1.0, 1.0)).unwrap();
                let rel = (grads[k] - numeric).abs() / grads[k].abs().max(numeric.abs());
                worst = worst.max(rel);
                assert!(rel <= 1e-4, "input {i} generator={generator} param {k}: {} vs {numeric}", grads[k]);
            }
        }
    }
    println!("worst relative error {worst:.2e}");
}
