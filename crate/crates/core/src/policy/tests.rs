use proptest::prelude::*;

use super::*;
use crate::autodiff::{AdamW, AdamWConfig, Tensor};
use crate::labeler::VqaFormulation;
use crate::prompting::{PromptLayout, Vocabulary};
use crate::sim::Lexicon;

fn vocab() -> Vocabulary {
    Vocabulary::build(6, &Lexicon::default()).unwrap()
}

fn small(vocab_size: usize, seed: u64) -> ModelConfig {
    ModelConfig { layers: 2, heads: 2, d_model: 16, context_len: 48, vocab_size, seed }
}

#[test]
fn parameter_count_matches_enumeration() {
    for cfg in [ModelConfig::default().with_vocab(157), small(40, 0), ModelConfig { layers: 3, heads: 1, d_model: 8, context_len: 5, vocab_size: 7, seed: 0 }] {
        let w = TransformerWeights::init(cfg).unwrap();
        assert_eq!(w.num_parameters(), cfg.parameter_count());
    }
}

#[test]
fn init_is_seeded() {
    let a = TransformerWeights::init(small(30, 1)).unwrap();
    let b = TransformerWeights::init(small(30, 1)).unwrap();
    let c = TransformerWeights::init(small(30, 2)).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_ne!(a.to_bytes(), c.to_bytes());
    let gain = a.store.get(a.layers[0].ln1_gain);
    assert!(gain.data().iter().all(|&g| g == 1.0));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(TransformerWeights::init(ModelConfig { d_model: 10, heads: 4, ..small(20, 0) }).is_err());
    assert!(TransformerWeights::init(ModelConfig::default()).is_err());
}

#[test]
fn checkpoint_round_trip_and_validation() {
    let w = TransformerWeights::init(small(30, 3)).unwrap();
    let bytes = w.to_bytes();
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
    let back = TransformerWeights::from_bytes(&bytes).unwrap();
    assert_eq!(back.config, w.config);
    assert_eq!(back.to_bytes(), bytes);
    assert!(TransformerWeights::from_bytes(&bytes[..bytes.len() - 4]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(TransformerWeights::from_bytes(&bad).is_err());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    w.save(&p).unwrap();
    assert_eq!(TransformerWeights::load(&p).unwrap().to_bytes(), bytes);
}

#[test]
fn single_token_gives_one_row() {
    let w = TransformerWeights::init(small(30, 0)).unwrap();
    let (logits, rec) = forward(&w, &[4]).unwrap();
    assert_eq!(logits.shape(), &[1, 30]);
    assert_eq!(rec.layers.len(), 2);
    assert!(forward(&w, &[30]).is_err());
    assert!(forward(&w, &[]).is_err());
    assert!(forward(&w, &vec![1; 49]).is_err());
}

#[test]
fn attention_rows_are_causal_distributions() {
    let w = TransformerWeights::init(small(30, 0)).unwrap();
    let (_, rec) = forward(&w, &[1, 5, 9, 2, 7, 7]).unwrap();
    for layer in &rec.layers {
        for a in layer {
            for i in 0..6 {
                let s: f32 = a.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-5);
                assert!(a.row(i)[i + 1..].iter().all(|&p| p == 0.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn logits_ignore_future_tokens(
        tokens in prop::collection::vec(0u32..30, 2..20),
        pos in 0usize..19,
        replacement in 0u32..30,
    ) {
        let pos = pos % tokens.len();
        let w = TransformerWeights::init(small(30, 7)).unwrap();
        let (a, _) = forward(&w, &tokens).unwrap();
        let mut changed = tokens.clone();
        changed[pos] = replacement;
        let (b, _) = forward(&w, &changed).unwrap();
        for t in 0..pos {
            prop_assert_eq!(a.row(t), b.row(t));
        }
    }
}

#[test]
fn attention_mass_properties() {
    let w = TransformerWeights::init(small(30, 0)).unwrap();
    let (_, rec) = forward(&w, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
    let full = attention_mass_on_span(&rec, 7..8, 0..8).unwrap();
    assert!((full - 1.0).abs() < 1e-5);
    let a = attention_mass_on_span(&rec, 4..8, 0..3).unwrap();
    let b = attention_mass_on_span(&rec, 4..8, 3..5).unwrap();
    let ab = attention_mass_on_span(&rec, 4..8, 0..5).unwrap();
    assert!((a + b - ab).abs() < 1e-9);
    assert!(attention_mass_on_span(&rec, 4..4, 0..3).is_err());
    assert!(attention_mass_on_span(&rec, 4..9, 0..3).is_err());

    // uniform synthetic record over 4 keys
    let uniform = Tensor::filled(&[4, 4], 0.25);
    let rec = AttentionRecord { layers: vec![vec![uniform.clone(), uniform]] };
    assert!((attention_mass_on_span(&rec, 3..4, 0..2).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn gradients_match_reference_on_default_model() {
    let model = ModelConfig::default().with_vocab(vocab().len());
    let report = gradcheck(model, GradcheckConfig::default()).unwrap();
    assert_eq!(report.tensors.len(), 6 + 12 * model.layers);
    assert!(report.passed, "max rel err {}: {:?}", report.max_rel_err, report.tensors);
}

#[test]
fn reference_loss_agrees_with_tape_loss() {
    let w = TransformerWeights::init(small(30, 4)).unwrap();
    let tokens = [1, 5, 9, 2, 7, 7, 3];
    let mask = [0, 0, 1, 0, 1, 1, 1];
    let tape_loss = evaluate_sequence(&w, &tokens, &mask).unwrap().loss;
    let r = reference_loss(&w, &ReferenceParams::from_weights(&w), &tokens, &mask);
    assert!((f64::from(tape_loss) - r).abs() < 1e-5);
    assert!((r - 30f64.ln()).abs() < 0.05 * 30f64.ln());
}

#[test]
fn constrained_distribution_is_zero_off_block() {
    let row = [3.0, -1.0, 0.5, 8.0];
    let p = constrained_distribution(&row, &[1, 2]);
    assert_eq!(p[0], 0.0);
    assert_eq!(p[3], 0.0);
    assert!((p[1] + p[2] - 1.0).abs() < 1e-6);
}

fn prompt(v: &Vocabulary) -> DecodePrompt {
    let obs = v.encode(&["x0", "y1", "z2", "open", "cube", "red", "x3", "y1", "z0"]).unwrap();
    let q = crate::prompting::render_question(v, &Lexicon::default(), VqaFormulation::Direction1D, "red cube").unwrap();
    let instr = v.encode(&"pick up the red cube and lift it".split(' ').collect::<Vec<_>>()).unwrap();
    DecodePrompt { obs, questions: vec![q], instruction: instr }
}

#[test]
fn baseline_decode_returns_only_actions() {
    let v = vocab();
    let w = TransformerWeights::init(ModelConfig { context_len: 64, ..small(v.len(), 0) }).unwrap();
    let p = prompt(&v);
    let d = decode_two_step(&w, &v, &p, VqaFormulation::None, PromptLayout::VqaFirst, 5).unwrap();
    assert!(d.answers.is_empty());
    assert_eq!(d.actions.len(), 5);
    assert!(d.actions.iter().all(|&a| v.action_of(a).is_some() || a == v.action_pad()));
    let again = decode_two_step(&w, &v, &p, VqaFormulation::None, PromptLayout::VqaFirst, 5).unwrap();
    assert_eq!(d.sequence, again.sequence);
}

#[test]
fn untrained_decode_still_yields_valid_answers() {
    let v = vocab();
    for (seed, f) in [(0, VqaFormulation::Location3D), (1, VqaFormulation::Direction3D), (2, VqaFormulation::Distance)] {
        let w = TransformerWeights::init(ModelConfig { context_len: 96, ..small(v.len(), seed) }).unwrap();
        let mut p = prompt(&v);
        p.questions = vec![crate::prompting::render_question(&v, &Lexicon::default(), f, "red cube").unwrap()];
        for layout in PromptLayout::ALL {
            let d = decode_two_step(&w, &v, &p, f, layout, 3).unwrap();
            let words = v.decode(&d.answers[0]);
            assert!(crate::labeler::Answer::from_words(f, &words).is_some(), "{words:?}");
        }
    }
}

#[test]
fn overfit_single_demonstration_is_reproduced() {
    let v = vocab();
    let p = prompt(&v);
    let answer = v.encode(&["right"]).unwrap();
    let actions = v.encode(&["movexpos", "movexpos", "movexpos", "<apad>", "<apad>"]).unwrap();
    let qa = crate::prompting::QaPair { object: "red cube".into(), question: p.questions[0].clone(), answer: answer.clone() };
    let seq = crate::prompting::assemble_sequence(
        &v, &p.obs, &[qa], &p.instruction, &actions, PromptLayout::VqaFirst, VqaFormulation::Direction1D, 64,
    )
    .unwrap();
    let mut w = TransformerWeights::init(ModelConfig { context_len: 64, ..small(v.len(), 5) }).unwrap();
    let mut opt = AdamW::new(AdamWConfig { lr: 1e-2, ..Default::default() }, &w.store).unwrap();
    for _ in 0..150 {
        let mut g = w.store.zero_grads();
        accumulate_sequence_gradients(&w, &seq.tokens, &seq.loss_mask, 1.0, &mut g).unwrap();
        opt.step(&mut w.store, &g).unwrap();
    }
    let d = decode_two_step(&w, &v, &p, VqaFormulation::Direction1D, PromptLayout::VqaFirst, 5).unwrap();
    assert_eq!(d.answers, vec![answer]);
    assert_eq!(d.actions, actions);
    assert_eq!(&d.sequence.tokens[..], &seq.tokens[..seq.tokens.len() - 1]);
}
