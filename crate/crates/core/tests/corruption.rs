use editdiff::corruption::LengthDist;
use editdiff::model::chain_log_likelihood;
use editdiff::model::toy::{HashedGenerator, HashedTagger};
use editdiff::rng::{seeded, stream};
use editdiff::{edit_distance, AlignmentCosts, CorruptionConfig, Corruptor, EditTag, RevisionChain, TokenId, Vocab};
use rand::Rng;

fn vocab() -> Vocab {
    Vocab::from_content((0..30).map(|i| format!("w{i}"))).unwrap()
}

fn clean(v: &Vocab, rng: &mut impl Rng) -> Vec<TokenId> {
    let ids = v.content_ids();
    (0..rng.gen_range(1..=15)).map(|_| rng.gen_range(ids.clone())).collect()
}

#[test]
fn edit_type_frequencies_match_configuration() {
    let v = vocab();
    let c = Corruptor::new(CorruptionConfig::default(), &v).unwrap();
    let mut rng = seeded(11);
    let mut counts = [0usize; 4];
    let mut total = 0;
    while total < 100_000 {
        let x = clean(&v, &mut rng);
        for d in c.corrupt_step(&x, &mut rng).unwrap().draws {
            counts[d.tag.index()] += 1;
            total += 1;
        }
    }
    let freq = |t: EditTag| counts[t.index()] as f64 / total as f64;
    for (tag, want) in [(EditTag::Keep, 0.6), (EditTag::Replace, 0.2), (EditTag::Insert, 0.1), (EditTag::Delete, 0.1)] {
        assert!((freq(tag) - want).abs() <= 0.01, "{tag}: {} vs {want}", freq(tag));
    }
}

#[test]
fn span_lengths_follow_zero_truncated_poisson() {
    let c = Corruptor::new(CorruptionConfig::default(), &vocab()).unwrap();
    let mut rng = seeded(12);
    let n = 100_000;
    let mean = (0..n).map(|_| c.sample_length(&mut rng) as f64).sum::<f64>() / n as f64;
    let lambda: f64 = 3.0;
    let expected = lambda / (1.0 - (-lambda).exp());
    assert!((expected - 3.1572).abs() < 1e-4);
    assert_eq!(LengthDist::default().mean(), expected);
    assert!((mean - expected).abs() <= 0.05, "{mean} vs {expected}");
}

#[test]
fn inverse_chains_replay_to_the_clean_sequence() {
    let v = vocab();
    let c = Corruptor::new(CorruptionConfig::default(), &v).unwrap();
    for i in 0..1000 {
        let mut rng = stream(13, i);
        let x0 = clean(&v, &mut rng);
        let steps = rng.gen_range(1..=12);
        let chain = c.corrupt_chain(&x0, steps, &mut rng).unwrap();
        assert_eq!(chain.step_count(), steps);
        let replayed = RevisionChain::replay(chain.first().to_vec(), chain.scripts.clone()).unwrap();
        assert_eq!(replayed.revisions, chain.revisions);
        assert_eq!(replayed.last(), &x0[..]);
    }
}

#[test]
fn same_seed_same_chain() {
    let v = vocab();
    let c = Corruptor::new(CorruptionConfig::default(), &v).unwrap();
    let x0 = clean(&v, &mut seeded(1));
    let a = c.corrupt_chain(&x0, 12, &mut seeded(5)).unwrap();
    assert_eq!(a, c.corrupt_chain(&x0, 12, &mut seeded(5)).unwrap());
    assert_ne!(a, c.corrupt_chain(&x0, 12, &mut seeded(6)).unwrap());
}

#[test]
fn corruption_drifts_away_from_the_clean_sequence() {
    let v = vocab();
    let c = Corruptor::new(CorruptionConfig::default(), &v).unwrap();
    let mut sums = [0.0; 12];
    for i in 0..1000 {
        let mut rng = stream(14, i);
        let x0 = clean(&v, &mut rng);
        for (t, rec) in c.corrupt_records(&x0, 12, &mut rng).unwrap().iter().enumerate() {
            sums[t] += edit_distance(&rec.after, &x0, &AlignmentCosts::UNIT);
        }
    }
    assert!(sums.windows(2).all(|w| w[1] >= w[0]), "{sums:?}");
}

#[test]
fn chain_likelihood_adds_over_concatenation() {
    let v = vocab();
    let c = Corruptor::new(CorruptionConfig::default(), &v).unwrap();
    let tagger = HashedTagger { vocab_size: v.len(), seed: 3, sharpness: 2.0 };
    let generator = HashedGenerator { vocab_size: v.len(), content: v.content_ids(), seed: 4, sharpness: 2.0 };
    for i in 0..50 {
        let mut rng = stream(15, i);
        let x0 = clean(&v, &mut rng);
        let chain = c.corrupt_chain(&x0, 6, &mut rng).unwrap();
        let k = rng.gen_range(0..=6);
        let head = RevisionChain::new(chain.revisions[..=k].to_vec(), chain.scripts[..k].to_vec()).unwrap();
        let tail = RevisionChain::new(chain.revisions[k..].to_vec(), chain.scripts[k..].to_vec()).unwrap();
        assert_eq!(head.concat(&tail).unwrap(), chain);
        let whole = chain_log_likelihood(&chain, &tagger, &generator, None).unwrap();
        let parts = chain_log_likelihood(&head, &tagger, &generator, None).unwrap()
            + chain_log_likelihood(&tail, &tagger, &generator, None).unwrap();
        assert!((whole - parts).abs() < 1e-9);
    }
}
