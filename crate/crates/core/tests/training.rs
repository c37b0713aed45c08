use srlprune::conll::Sentence;
use srlprune::model::embed::ContextualEmbeddings;
use srlprune::model::{Mode, ModelError, PruneMode, RunConfig, SrlModel, Trainer};
use srlprune::synth::{synth_corpus, SynthConfig};
use srlprune::score;

fn corpus(seed: u64, n: usize) -> Vec<Sentence> {
    synth_corpus(&SynthConfig {
        seed,
        n_sentences: n,
        ..SynthConfig::default()
    })
    .unwrap()
    .corpus
}

fn small(mode: Mode) -> RunConfig {
    RunConfig {
        mode,
        prune: PruneMode::None,
        word_dim: 24,
        lemma_dim: 16,
        pos_dim: 16,
        indicator_dim: 8,
        lstm_layers: 2,
        lstm_hidden: 32,
        mlp_dim: 48,
        batch_size: 4,
        seed: 2,
        ..RunConfig::default()
    }
}

fn loss_curve(config: RunConfig, data: &[Sentence], epochs: usize) -> Vec<f64> {
    let model = SrlModel::new(config, data, None, None).unwrap();
    let mut trainer = Trainer::new(model, data, None).unwrap();
    let mut curve = vec![trainer.training_loss().unwrap()];
    for _ in 0..epochs {
        trainer.run_epoch().unwrap();
        curve.push(trainer.training_loss().unwrap());
    }
    curve
}

#[test]
fn loss_decreases_over_the_first_ten_epochs() {
    let data = corpus(1, 50);
    let config = RunConfig {
        lstm_hidden: 100,
        prune: PruneMode::None,
        batch_size: 8,
        seed: 1,
        ..RunConfig::default()
    };
    let curve = loss_curve(config, &data, 10);
    for (epoch, w) in curve.windows(2).enumerate() {
        assert!(w[1] < w[0], "epoch {}: {curve:?}", epoch + 1);
    }
}

#[test]
fn same_seed_gives_identical_loss_curves() {
    let data = corpus(4, 20);
    let a = loss_curve(small(Mode::RoleOnly), &data, 3);
    let b = loss_curve(small(Mode::RoleOnly), &data, 3);
    assert_eq!(a, b);
    let other = RunConfig {
        seed: 3,
        ..small(Mode::RoleOnly)
    };
    assert_ne!(a, loss_curve(other, &data, 3));
}

#[test]
fn ablated_models_still_train() {
    let data = corpus(5, 20);
    for (pos, lemma) in [(false, true), (true, false), (false, false)] {
        let config = RunConfig {
            use_pos: pos,
            use_lemma: lemma,
            ..small(Mode::RoleOnly)
        };
        let curve = loss_curve(config, &data, 3);
        assert!(curve[3] < curve[0], "pos={pos} lemma={lemma}: {curve:?}");
    }
}

#[test]
fn joint_training_learns_all_senses() {
    let data = synth_corpus(&SynthConfig {
        seed: 6,
        n_sentences: 20,
        senses: vec!["01".into(), "02".into(), "03".into()],
        ..SynthConfig::default()
    })
    .unwrap()
    .corpus;
    let model = SrlModel::new(small(Mode::EndToEnd), &data, None, None).unwrap();
    let mut trainer = Trainer::new(model, &data, None).unwrap();
    let mut pd = 0.0;
    for _ in 0..30 {
        for _ in 0..5 {
            trainer.run_epoch().unwrap();
        }
        let predicted = trainer.model().predict(&data, None).unwrap();
        pd = score(&data, &predicted, true).unwrap().pd_accuracy.unwrap();
        if pd == 1.0 {
            break;
        }
    }
    assert_eq!(pd, 1.0, "after {} epochs", trainer.epoch());
}

#[test]
fn non_finite_loss_aborts_with_diagnostics() {
    let data = corpus(7, 12);
    let config = RunConfig {
        lr: 1e200,
        ..small(Mode::RoleOnly)
    };
    let model = SrlModel::new(config, &data, None, None).unwrap();
    let mut trainer = Trainer::new(model, &data, None).unwrap();
    let err = (0..5)
        .find_map(|_| trainer.run_epoch().err())
        .expect("training diverges");
    match &err {
        ModelError::Diverged { epoch, step, .. } => assert!(*epoch >= 1 && *step >= 1, "{err}"),
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("epoch"));
}

/// Contextual vectors with one channel per role (plus one for "not an
/// argument") of the sentence's only predicate.
fn role_channel(data: &[Sentence], roles: &[&str]) -> ContextualEmbeddings {
    let dim = roles.len() + 1;
    let sentences = data
        .iter()
        .map(|s| {
            s.tokens()
                .iter()
                .map(|t| {
                    let mut v = vec![0.0; dim];
                    let slot = match &t.apreds[0] {
                        Some(r) => 1 + roles.iter().position(|x| x == r).unwrap(),
                        None => 0,
                    };
                    v[slot] = 1.0;
                    v
                })
                .collect()
        })
        .collect();
    ContextualEmbeddings { dim, sentences }
}

#[test]
fn a_role_revealing_contextual_channel_is_exploited() {
    let roles = ["A0", "A1", "A2", "AM-TMP"];
    let data = synth_corpus(&SynthConfig {
        seed: 8,
        n_sentences: 40,
        max_predicates: 1,
        roles: roles.map(String::from).to_vec(),
        ..SynthConfig::default()
    })
    .unwrap()
    .corpus;
    let signal = role_channel(&data, &roles);
    let zeros = ContextualEmbeddings {
        dim: signal.dim,
        sentences: signal
            .sentences
            .iter()
            .map(|s| s.iter().map(|v| vec![0.0; v.len()]).collect())
            .collect(),
    };
    let f1_with = |ctx: &ContextualEmbeddings| {
        let config = RunConfig {
            contextual_dim: ctx.dim,
            ..small(Mode::RoleOnly)
        };
        let model = SrlModel::new(config, &data, None, None).unwrap();
        let mut trainer = Trainer::new(model, &data, Some(ctx)).unwrap();
        for _ in 0..12 {
            trainer.run_epoch().unwrap();
        }
        let predicted = trainer.model().predict(&data, Some(ctx)).unwrap();
        score(&data, &predicted, false).unwrap().f1
    };
    let (with_signal, control) = (f1_with(&signal), f1_with(&zeros));
    assert!(
        with_signal > control + 0.2,
        "signal {with_signal:.3} vs control {control:.3}"
    );
}
