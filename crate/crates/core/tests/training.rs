use editdiff::decoding::{DecodeConfig, Decoder, Strategy};
use editdiff::model::loglinear::{LogLinearConfig, LogLinearModel};
use editdiff::model::neural::{NeuralConfig, NeuralModel};
use editdiff::model::{step_log_likelihood, train, Checkpoint, Family, GenQuery, Model, TrainConfig, TrainPair};
use editdiff::rng::{seeded, stream};
use editdiff::tasks::{synthesize, task_vocab, Split, Task};
use editdiff::{CorruptionConfig, Corruptor, EditOp, EditScript, EditTag, Error, TokenId, Vocab};
use rand::Rng;

/// Train and test pairs of `task`, `n` training pairs.
fn pairs(task: Task, n: usize) -> (Vec<TrainPair>, Vec<TrainPair>) {
    let records = synthesize(task, n * 5 / 4 + 400, 1);
    let to_pair = |r: &editdiff::tasks::Record| TrainPair { source: Some(r.source.clone()), target: r.target.clone() };
    let train = records.iter().filter(|r| r.split == Split::Train).take(n).map(to_pair).collect();
    let test = records.iter().filter(|r| r.split == Split::Test).take(200).map(to_pair).collect();
    (train, test)
}

fn one_step(vocab: &Vocab) -> Corruptor {
    Corruptor::new(CorruptionConfig { max_steps: 1, ..Default::default() }, vocab).unwrap()
}

fn fit(family: Family, data: &[TrainPair], vocab: &Vocab) -> Checkpoint {
    let cfg = TrainConfig { family, ..Default::default() };
    train(data, vocab, &one_step(vocab), &cfg, serde_json::Value::Null).unwrap().checkpoint
}

/// Every score the model produces on a small fixed batch.
fn probe(model: &Model) -> Vec<u64> {
    let src: &[TokenId] = &[7, 9, 11, 7];
    let mut out = Vec::new();
    for x in [&[][..], &[7, 9][..], &[12, 7, 9, 30, 11][..]] {
        for d in model.tagger().score_tags(x, Some(src)) {
            out.extend(d.iter().map(|p| p.to_bits()));
        }
    }
    for kind in [EditTag::Insert, EditTag::Replace] {
        let q = GenQuery { kind, left: &[7], prefix: &[9], right: &[11], replaced: &[30], source: Some(src) };
        out.extend(model.generator().next_token_dist(&q).iter().map(|p| p.to_bits()));
    }
    out
}

#[test]
fn loss_falls_on_every_task() {
    let vocab = task_vocab();
    for task in Task::ALL {
        let (data, _) = pairs(task, 4000);
        let out = train(&data, &vocab, &one_step(&vocab), &TrainConfig::default(), serde_json::Value::Null).unwrap();
        let (first, last) = train::loss_ends(&out.losses, 0.1);
        assert!(last < first, "{task}: {first} -> {last}");
    }
    let (data, _) = pairs(Task::Copy, 600);
    let cfg = TrainConfig { family: Family::Neural, ..Default::default() };
    let out = train(&data, &vocab, &one_step(&vocab), &cfg, serde_json::Value::Null).unwrap();
    let (first, last) = train::loss_ends(&out.losses, 0.1);
    assert!(last < first, "neural: {first} -> {last}");
}

#[test]
fn copy_tagger_puts_majority_mass_on_gold_tags() {
    let vocab = task_vocab();
    let (data, test) = pairs(Task::Copy, 20_000);
    let ckpt = fit(Family::LogLinear, &data, &vocab);
    let c = one_step(&vocab);
    let (mut hit, mut total) = (0, 0);
    for (i, p) in test.iter().enumerate() {
        let ex = c.make_training_example(&p.target, &mut stream(99, i as u64)).unwrap();
        let dists = ckpt.model.tagger().score_tags(&ex.input, p.source.as_deref());
        for (d, tag) in dists.iter().zip(&ex.tags) {
            hit += usize::from(d[tag.index()] > 0.5);
            total += 1;
        }
    }
    let rate = hit as f64 / total as f64;
    assert!(rate >= 0.95, "{rate}");
}

/// A random script that applies to a sequence of length `n`.
fn random_script(n: usize, vocab: &Vocab, rng: &mut impl Rng) -> EditScript {
    let ids = vocab.content_ids();
    let mut ops = Vec::new();
    let mut pos = 0;
    while pos < n || rng.gen_bool(0.2) {
        let payload: Vec<TokenId> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(ids.clone())).collect();
        let op = match (rng.gen_range(0..4), n - pos) {
            (0, left) if left > 0 => EditOp::keep(),
            (1, left) if left > 0 => EditOp::delete(1),
            (2, left) if left > 0 => EditOp::replace(1, payload),
            _ => EditOp::insert(payload),
        };
        pos += op.consume;
        ops.push(op);
    }
    EditScript::new(ops)
}

#[test]
fn gold_scripts_outscore_random_scripts() {
    let vocab = task_vocab();
    let (data, test) = pairs(Task::Copy, 5000);
    let ckpt = fit(Family::LogLinear, &data, &vocab);
    let (t, g) = (ckpt.model.tagger(), ckpt.model.generator());
    let c = one_step(&vocab);
    let mut wins = 0;
    for (i, p) in test.iter().enumerate() {
        let mut rng = stream(98, i as u64);
        let ex = c.make_training_example(&p.target, &mut rng).unwrap();
        let src = p.source.as_deref();
        let gold = step_log_likelihood(&ex.input, &ex.script, t, g, src).unwrap().total();
        let other = random_script(ex.input.len(), &vocab, &mut rng);
        let random = step_log_likelihood(&ex.input, &other, t, g, src).unwrap().total();
        wins += usize::from(gold > random);
    }
    assert!(wins as f64 >= 0.9 * test.len() as f64, "{wins}/{}", test.len());
}

#[test]
fn autoregressive_copy_reproduces_the_source() {
    let vocab = task_vocab();
    let (data, test) = pairs(Task::Copy, 20_000);
    let ckpt = fit(Family::LogLinear, &data, &vocab);
    let d = Decoder::new(ckpt.model.tagger(), ckpt.model.generator(), &vocab, DecodeConfig::default()).unwrap();
    let exact = test
        .iter()
        .filter(|p| {
            let src = p.source.as_deref();
            d.ar_generate(src, Strategy::Greedy, &mut seeded(0)).unwrap() == p.target
        })
        .count();
    assert!(exact as f64 >= 0.9 * test.len() as f64, "{exact}/{}", test.len());
}

#[test]
fn training_is_deterministic_given_the_seed() {
    let vocab = task_vocab();
    let (data, test) = pairs(Task::Substitute, 300);
    for family in [Family::LogLinear, Family::Neural] {
        let a = fit(family, &data, &vocab);
        let b = fit(family, &data, &vocab);
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = one_step(&vocab);
        let held_out = |ck: &Checkpoint| -> f64 {
            test.iter()
                .enumerate()
                .map(|(i, p)| {
                    let ex = c.make_training_example(&p.target, &mut stream(97, i as u64)).unwrap();
                    let (t, g) = (ck.model.tagger(), ck.model.generator());
                    step_log_likelihood(&ex.input, &ex.script, t, g, p.source.as_deref()).unwrap().total()
                })
                .sum()
        };
        assert_eq!(held_out(&a).to_bits(), held_out(&b).to_bits());
    }
}

#[test]
fn zero_epochs_keep_the_initial_scores() {
    let vocab = task_vocab();
    let (data, _) = pairs(Task::Copy, 50);
    for family in [Family::LogLinear, Family::Neural] {
        let cfg = TrainConfig { family, epochs: 0, ..Default::default() };
        let out = train(&data, &vocab, &one_step(&vocab), &cfg, serde_json::Value::Null).unwrap();
        assert!(out.losses.is_empty());
        let init = match family {
            Family::LogLinear => Model::LogLinear(LogLinearModel::new(vocab.len(), LogLinearConfig::default())),
            Family::Neural => Model::Neural(NeuralModel::new(vocab.len(), NeuralConfig::default()).unwrap()),
        };
        assert_eq!(probe(&out.checkpoint.model), probe(&init), "{family:?}");
    }
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let vocab = task_vocab();
    let (data, _) = pairs(Task::Reverse, 300);
    let dir = std::env::temp_dir().join(format!("editdiff-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for family in [Family::LogLinear, Family::Neural] {
        let ckpt = fit(family, &data, &vocab);
        let path = dir.join("model.ckpt");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path, &vocab).unwrap();
        assert_eq!(loaded.header, ckpt.header);
        assert_eq!(probe(&loaded.model), probe(&ckpt.model));
        assert_eq!(loaded.to_bytes(), ckpt.to_bytes());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn checkpoints_reject_foreign_vocabularies_and_damage() {
    let vocab = task_vocab();
    let (data, _) = pairs(Task::Copy, 100);
    let bytes = fit(Family::LogLinear, &data, &vocab).to_bytes();
    let other = Vocab::from_content(["only", "two"]).unwrap();
    assert!(matches!(Checkpoint::from_bytes(&bytes, &other), Err(Error::VocabHashMismatch { .. })));
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(matches!(Checkpoint::from_bytes(&longer, &vocab), Err(Error::Checkpoint(_))));
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3], &vocab), Err(Error::Checkpoint(_))));
    assert!(matches!(Checkpoint::from_bytes(b"not a model", &vocab), Err(Error::Checkpoint(_))));
}

#[test]
fn training_rejects_bad_input() {
    let vocab = task_vocab();
    let bad = [TrainPair { source: None, target: vec![vocab.len() as TokenId] }];
    assert!(train(&bad, &vocab, &one_step(&vocab), &TrainConfig::default(), serde_json::Value::Null).is_err());
    let (data, _) = pairs(Task::Copy, 20);
    let neural = NeuralConfig { learning_rate: 1e200, ..Default::default() };
    let cfg = TrainConfig { family: Family::Neural, neural, ..Default::default() };
    match train(&data, &vocab, &one_step(&vocab), &cfg, serde_json::Value::Null) {
        Err(Error::NonFiniteLoss { step, loss }) => assert!(step > 0 && !loss.is_finite()),
        other => panic!("expected a non-finite loss, got {:?}", other.map(|o| o.losses)),
    }
}
