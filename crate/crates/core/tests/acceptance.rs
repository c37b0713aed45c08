//! Acceptance criteria, run in order with one PASS/FAIL/SKIP line each.
//!
//! Criteria run sequentially inside one test so that the timed ones are not
//! competing with each other for cores. `SRLPRUNE_ACCEPTANCE_ONLY=3,7` limits
//! the run to the listed criteria (the rest report SKIP).

use std::collections::{BTreeMap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srlprune::conll::{parse_conll09, Sentence, Token};
use srlprune::deptree::{DepTree, DistanceTuple, SyntaxSource};
use srlprune::eval::score;
use srlprune::model::{train, Mode, PruneMode, RunConfig, SrlModel, Trainer};
use srlprune::neural::{Biaffine, ParamStore};
use srlprune::prune::{prune, prune_stats, Pruning};
use srlprune::rules::{coverage, mine_rules, sweep, ActiveRule, RuleSet};
use srlprune::synth::{synth_corpus, SynthConfig, SynthError};

type Check = Result<String, String>;
type Criterion = (usize, &'static str, Box<dyn Fn() -> Option<Check>>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Random head vector over `n` tokens: a random visiting order where each
/// token attaches to an earlier one. With `forest`, some tokens attach to the
/// artificial root as well.
fn random_heads(rng: &mut ChaCha8Rng, n: usize, forest: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        let node = order[k];
        heads[node - 1] = if forest && rng.gen_bool(0.1) {
            0
        } else {
            order[rng.gen_range(0..k)]
        };
    }
    heads
}

/// `node, parent(node), ..., 0`.
fn ancestor_chain(heads: &[usize], mut node: usize) -> Vec<usize> {
    let mut chain = vec![node];
    while node != 0 {
        node = heads[node - 1];
        chain.push(node);
    }
    chain
}

/// (ancestor, tuple) by intersecting ancestor chains.
fn oracle_tuple(heads: &[usize], pred: usize, arg: usize) -> (usize, DistanceTuple) {
    let cp = ancestor_chain(heads, pred);
    let ca = ancestor_chain(heads, arg);
    let in_arg: HashSet<usize> = ca.iter().copied().collect();
    let dp = cp.iter().position(|x| in_arg.contains(x)).expect("chains meet at 0");
    let anc = cp[dp];
    let da = ca.iter().position(|&x| x == anc).unwrap();
    (anc, DistanceTuple::new(dp, da))
}

fn naive_biaffine(w1: &[f64], w2: &[f64], b: &[f64], hp: &[f64], ha: &[f64]) -> Vec<f64> {
    let d = hp.len();
    (0..b.len())
        .map(|r| {
            let mut s = b[r];
            for i in 0..d {
                for j in 0..d {
                    s += hp[i] * w1[r * d * d + i * d + j] * ha[j];
                }
            }
            for i in 0..d {
                s += w2[r * 2 * d + i] * hp[i];
                s += w2[r * 2 * d + d + i] * ha[i];
            }
            s
        })
        .collect()
}

fn synth(config: SynthConfig) -> Vec<Sentence> {
    synth_corpus(&config).expect("synthetic corpus").corpus
}

/// A synthetic sentence of exactly `n` tokens, moving to the next seed when
/// the drawn frames do not fit.
fn sentence_of_len(n: usize, seed: u64, base: &SynthConfig) -> Sentence {
    for attempt in 0..200 {
        let c = SynthConfig {
            seed: seed * 1000 + attempt,
            n_sentences: 1,
            min_len: n,
            max_len: n,
            max_retries: 50,
            ..base.clone()
        };
        match synth_corpus(&c) {
            Ok(mut out) => return out.corpus.remove(0),
            Err(SynthError::Unsatisfiable { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
    }
    panic!("no {n}-token sentence for seed {seed}");
}

// ---------------------------------------------------------------------------
// Criteria

fn c1_tree_oracle() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut pairs = 0u64;
    for tree_no in 0..1000 {
        let n = rng.gen_range(1..=50);
        let heads = random_heads(&mut rng, n, tree_no % 4 == 3);
        let tree = ok(DepTree::from_heads(&heads))?;
        for p in 1..=n {
            for a in 1..=n {
                let (anc, want) = oracle_tuple(&heads, p, a);
                let got = tree.distance_tuple(p, a);
                ensure(tree.nca(p, a) == anc && got == want, || {
                    format!("tree {tree_no} heads {heads:?} pair ({p},{a}): got {got:?}, oracle {want:?}")
                })?;
                pairs += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("1000 trees, {pairs} pairs exact, {secs:.2} s"))
}

fn c2_rule_mining() -> Check {
    let dists: [&[((usize, usize), f64)]; 3] = [
        &[((0, 1), 0.5), ((1, 1), 0.2), ((1, 2), 0.2), ((2, 0), 0.1)],
        &[((0, 1), 0.7), ((1, 1), 0.15), ((1, 2), 0.1), ((0, 2), 0.05)],
        &[((0, 1), 0.3), ((0, 2), 0.3), ((1, 0), 0.2), ((2, 1), 0.1), ((1, 3), 0.1)],
    ];
    let mut corpora = 0;
    for (d, dist) in dists.iter().enumerate() {
        for seed in 0..5u64 {
            let config = SynthConfig {
                seed: seed + 10 * d as u64,
                n_sentences: 150,
                max_len: 16,
                tuples: dist.iter().map(|&((p, a), w)| (DistanceTuple::new(p, a), w)).collect(),
                ..SynthConfig::default()
            };
            let out = ok(synth_corpus(&config))?;
            let rules = ok(mine_rules(&out.corpus, SyntaxSource::Predicted, "en"))?;
            let mined: BTreeMap<DistanceTuple, u64> =
                rules.entries().iter().map(|e| (e.tuple, e.count)).collect();
            ensure(mined == out.truth.tuple_counts, || {
                format!("seed {seed}: mined {mined:?} vs generator {:?}", out.truth.tuple_counts)
            })?;

            let ks: Vec<usize> = (0..=rules.len()).collect();
            let rows = ok(sweep(&rules, &out.corpus, SyntaxSource::Predicted, &ks))?;
            ensure(rows.windows(2).all(|w| w[0].coverage <= w[1].coverage), || {
                format!("coverage not monotone: {rows:?}")
            })?;
            let last = rows.last().unwrap().coverage;
            ensure(last == 1.0, || format!("full-k coverage {last}"))?;

            let mut shuffled = out.corpus.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let again = ok(mine_rules(&shuffled, SyntaxSource::Predicted, "en"))?;
            ensure(again.to_text() == rules.to_text(), || "shuffling changed the rule set".into())?;
            corpora += 1;
        }
    }
    Ok(format!("{corpora} corpora: counts exact, coverage monotone to 1.0, shuffle-invariant"))
}

fn c3_coverage_selection() -> Check {
    let expected = [((0, 1), 0.5), ((1, 2), 0.3), ((0, 2), 0.2)];
    let config = SynthConfig {
        seed: 33,
        n_sentences: 4000,
        max_len: 16,
        tuples: expected.iter().map(|&((p, a), w)| (DistanceTuple::new(p, a), w)).collect(),
        ..SynthConfig::default()
    };
    let corpus = synth(config);
    let rules = ok(mine_rules(&corpus, SyntaxSource::Predicted, "en"))?;
    let total = rules.total() as f64;
    for &((p, a), w) in &expected {
        let count = rules
            .entries()
            .iter()
            .find(|e| e.tuple == DistanceTuple::new(p, a))
            .map_or(0, |e| e.count);
        let freq = count as f64 / total;
        ensure((freq - w).abs() <= 0.02, || format!("({p},{a}) frequency {freq:.4} vs {w}"))?;
    }
    let selected = ok(rules.clone().select_by_coverage(0.99))?;
    let k = selected.k().unwrap();
    ensure(k == 3, || format!("k = {k}"))?;
    let cov = ok(coverage(&ok(selected.active())?, &corpus, SyntaxSource::Predicted))?.coverage();
    ensure((0.99..=1.0).contains(&cov), || format!("coverage {cov}"))?;

    // Cumulative-sum oracle for a 0.9 target and the per-k coverage column.
    let counts: Vec<u64> = rules.entries().iter().map(|e| e.count).collect();
    let mut running = 0u64;
    let oracle_k = counts
        .iter()
        .position(|&c| {
            running += c;
            running as f64 >= 0.9 * total
        })
        .unwrap()
        + 1;
    let k90 = ok(rules.clone().select_by_coverage(0.9))?.k().unwrap();
    ensure(k90 == oracle_k, || format!("target 0.9: k {k90}, oracle {oracle_k}"))?;
    let rows = ok(sweep(&rules, &corpus, SyntaxSource::Predicted, &[1, 2, 3]))?;
    for (row, want) in rows.iter().zip([0.5, 0.8, 1.0]) {
        ensure((row.coverage - want).abs() <= 0.02, || {
            format!("k={} coverage {:.4} vs {want}", row.k, row.coverage)
        })?;
    }
    Ok(format!(
        "k=3, coverage {cov:.4}, k(0.9)={k90} matches cumulative sum, {} arguments",
        rules.total()
    ))
}

fn keep_sentence_tree() -> (Vec<&'static str>, DepTree) {
    let words = vec!["Keep", "your", "heart", "and", "mind", "open"];
    (words, DepTree::from_heads(&[0, 3, 1, 3, 4, 1]).unwrap())
}

fn c4_pruning() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for inst in 0..1000 {
        let n = rng.gen_range(1..=40);
        let heads = random_heads(&mut rng, n, inst % 5 == 4);
        let tree = ok(DepTree::from_heads(&heads))?;
        let tuples: Vec<DistanceTuple> = (0..rng.gen_range(0..6))
            .map(|_| DistanceTuple::new(rng.gen_range(0..4), rng.gen_range(0..4)))
            .collect();
        let rule = ActiveRule::new(tuples.iter().copied());
        let pred = rng.gen_range(1..=n);
        let set: HashSet<DistanceTuple> = tuples.into_iter().collect();
        let want: Vec<usize> = (1..=n)
            .filter(|&a| a == pred || set.contains(&oracle_tuple(&heads, pred, a).1))
            .collect();
        let got = prune(&tree, pred, &rule).retained;
        ensure(got == want, || {
            format!("instance {inst} heads {heads:?} pred {pred} rule {set:?}: {got:?} vs {want:?}")
        })?;
    }
    let (words, tree) = keep_sentence_tree();
    let mask = prune(&tree, 1, &ActiveRule::new([DistanceTuple::new(0, 1)]));
    let pruned: Vec<&str> = (1..=6).filter(|&t| !mask.contains(t)).map(|t| words[t - 1]).collect();
    ensure(pruned == ["your", "and", "mind"], || format!("pruned {pruned:?}"))?;
    ensure(mask.contains(1), || "predicate dropped".into())?;
    Ok(format!("1000 instances exact; Keep example prunes {pruned:?}, keeps Keep"))
}

fn c5_biaffine() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let bi = Biaffine::init(&mut store, "h", 1, 1, &mut rng);
    let set = |store: &mut ParamStore, name: &str, v: &[f64]| {
        let id = store.find(name).unwrap();
        store.get_mut(id).data_mut().copy_from_slice(v);
    };
    set(&mut store, "h.w1", &[3.0]);
    set(&mut store, "h.w2", &[0.5, 0.25]);
    set(&mut store, "h.b", &[0.1]);
    let s = ok(bi.score(&store, &[1.0], &[2.0]))?;
    ensure(s == [7.1], || format!("hand case gave {s:?}"))?;

    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let d = rng.gen_range(1..12);
        let labels = rng.gen_range(1..8);
        let mut store = ParamStore::new();
        let bi = Biaffine::init(&mut store, "h", d, labels, &mut rng);
        for name in ["h.w1", "h.w2", "h.b"] {
            let id = store.find(name).unwrap();
            for v in store.get_mut(id).data_mut() {
                *v = rng.gen_range(-2.0..2.0);
            }
        }
        let vec = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
        let hp = vec(&mut rng);
        let has: Vec<Vec<f64>> = (0..4).map(|_| vec(&mut rng)).collect();
        let (many, _) = bi.score_many(&store, &hp, &has);
        let data = |name: &str| store.get(store.find(name).unwrap()).data().to_vec();
        let (w1, w2, b) = (data("h.w1"), data("h.w2"), data("h.b"));
        for (ha, got) in has.iter().zip(&many) {
            let want = naive_biaffine(&w1, &w2, &b, &hp, ha);
            for (g, w) in got.iter().zip(&want) {
                let rel = (g - w).abs() / w.abs().max(1.0);
                worst = worst.max(rel);
                ensure(rel < 1e-12, || format!("trial {trial}: {g} vs {w}"))?;
            }
        }
    }
    Ok(format!("hand case scores 7.1 exactly; 200 random scorers, max rel err {worst:.1e}"))
}

fn c6_gradients() -> Check {
    let t0 = Instant::now();
    let base = SynthConfig {
        tuples: vec![(DistanceTuple::new(0, 1), 0.6), (DistanceTuple::new(1, 1), 0.4)],
        max_arguments: 2,
        ..SynthConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut kinks = 0;
    let trials = 24;
    for trial in 0..trials {
        let sentence = sentence_of_len(5, trial, &base);
        let one = std::slice::from_ref(&sentence);
        let (prune_mode, rules) = match trial % 3 {
            0 => (PruneMode::None, None),
            1 => {
                let r = ok(ok(mine_rules(one, SyntaxSource::Predicted, "en"))?.select_top_k(1))?;
                (PruneMode::Rule, Some(r))
            }
            _ => (PruneMode::KOrder, None),
        };
        let config = RunConfig {
            mode: if trial % 2 == 0 { Mode::RoleOnly } else { Mode::EndToEnd },
            prune: prune_mode,
            korder_k: 1,
            word_dim: 20,
            lemma_dim: 10,
            pos_dim: 10,
            indicator_dim: 8,
            lstm_layers: 3,
            lstm_hidden: 30,
            mlp_dim: 24,
            seed: trial,
            ..RunConfig::default()
        };
        let mut model = ok(SrlModel::new(config, one, rules, None))?;
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        for slot in 0..sentence.predicates().len() {
            let r = ok(model.grad_check(&sentence, slot, None, 80, 1e-5, &mut rng))?;
            worst = worst.max(r.max_rel_error);
            kinks += r.kinks;
            checks += 1;
            ensure(r.max_rel_error < 1e-4, || format!("trial {trial} slot {slot}: {r:?}"))?;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{trials} trials ({checks} predicates, 3-layer BiLSTM, 5 tokens), max rel err {worst:.2e}, {kinks} kink coordinates redrawn, {secs:.1} s"
    ))
}

fn overfit_config(mode: Mode) -> RunConfig {
    RunConfig {
        mode,
        lstm_hidden: 100,
        prune: PruneMode::None,
        epochs: 200,
        batch_size: 8,
        eval_every: 5,
        stop_f1: Some(0.99),
        seed: 1,
        ..RunConfig::default()
    }
}

fn c7_overfit() -> Check {
    let t0 = Instant::now();
    let corpus = synth(SynthConfig {
        seed: 1,
        n_sentences: 50,
        ..SynthConfig::default()
    });
    let mut parts = Vec::new();
    for mode in [Mode::RoleOnly, Mode::EndToEnd] {
        let model = ok(SrlModel::new(overfit_config(mode), &corpus, None, None))?;
        let out = ok(train(model, &corpus, None, Some((&corpus, None)), &mut |_| {}))?;
        let predicted = ok(out.model.predict(&corpus, None))?;
        let report = ok(score(&corpus, &predicted, false))?;
        match mode {
            Mode::RoleOnly => {
                ensure(report.f1 >= 0.99, || format!("role-only F1 {:.4}", report.f1))?;
                parts.push(format!("role-only F1 {:.4} after {} epochs", report.f1, out.epochs_run));
            }
            Mode::EndToEnd => {
                let pd = report.pd_accuracy.unwrap_or(0.0);
                ensure(pd >= 0.95, || format!("sense accuracy {pd:.4}"))?;
                parts.push(format!("end-to-end sense acc {pd:.4} after {} epochs", out.epochs_run));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 600.0, || format!("took {secs:.0} s"))?;
    Ok(format!("{}, {secs:.0} s", parts.join(", ")))
}

/// Steps needed until the evaluation-mode loss per predicate drops to
/// `target`; pruned candidates are certain non-arguments and add nothing.
fn steps_to(model: SrlModel, corpus: &[Sentence], target: f64, max_epochs: usize) -> Result<Option<u64>, String> {
    let mut trainer = ok(Trainer::new(model, corpus, None))?;
    for _ in 0..max_epochs {
        ok(trainer.run_epoch())?;
        if ok(trainer.training_loss())? <= target {
            return Ok(Some(trainer.steps()));
        }
    }
    Ok(None)
}

fn c8_pruning_benefit() -> Check {
    let corpus = synth(SynthConfig {
        seed: 21,
        n_sentences: 60,
        min_len: 10,
        max_len: 25,
        tuples: vec![(DistanceTuple::new(0, 1), 0.8), (DistanceTuple::new(1, 1), 0.2)],
        ..SynthConfig::default()
    });
    let rules = ok(ok(mine_rules(&corpus, SyntaxSource::Predicted, "en"))?.select_by_coverage(1.0))?;
    let active = ok(rules.active())?;
    let report = ok(prune_stats(&corpus, &Pruning::Rule(active.clone()), SyntaxSource::Predicted))?;
    ensure(report.gold_retained == report.gold_arguments, || "rule loses arguments".into())?;

    // Reduction recomputed from the masks themselves.
    let (mut all, mut kept) = (0u64, 0u64);
    for s in &corpus {
        let tree = ok(DepTree::from_sentence(s, SyntaxSource::Predicted))?;
        for &p in s.predicates() {
            all += s.len() as u64;
            kept += prune(&tree, p, &active).retained.len() as u64;
        }
    }
    ensure(all == report.candidate_pairs && kept == report.retained_pairs, || {
        format!("mask recount {kept}/{all} vs report {}/{}", report.retained_pairs, report.candidate_pairs)
    })?;
    let reduction = 1.0 - kept as f64 / all as f64;
    ensure((reduction - report.reduction()).abs() < 1e-15, || "reduction arithmetic".into())?;
    ensure(reduction >= 0.6, || format!("reduction {reduction:.4}"))?;

    let config = |prune: PruneMode| RunConfig {
        prune,
        word_dim: 32,
        lemma_dim: 32,
        pos_dim: 32,
        lstm_layers: 2,
        lstm_hidden: 32,
        mlp_dim: 64,
        batch_size: 8,
        seed: 4,
        ..RunConfig::default()
    };
    let baseline = ok(SrlModel::new(config(PruneMode::None), &corpus, None, None))?;
    let pruned = ok(SrlModel::new(config(PruneMode::Rule), &corpus, Some(rules), None))?;
    let start = ok(baseline.mean_loss(&corpus, None))?;
    let target = L_STAR_FRACTION * start;
    let max_epochs = 60;
    let base_steps = steps_to(baseline, &corpus, target, max_epochs)?
        .ok_or_else(|| format!("baseline never reached L* = {target:.4}"))?;
    let rule_steps = steps_to(pruned, &corpus, target, max_epochs)?
        .ok_or_else(|| format!("pruned model never reached L* = {target:.4}"))?;
    ensure(rule_steps <= base_steps, || format!("pruned {rule_steps} steps > baseline {base_steps}"))?;
    Ok(format!(
        "reduction {:.1}% ({kept}/{all} pairs kept), L* = {target:.3}: pruned {rule_steps} steps, baseline {base_steps}",
        100.0 * reduction
    ))
}

/// L* as a fraction of the untrained baseline's loss per predicate.
const L_STAR_FRACTION: f64 = 0.05;

fn sentence_with(args: &[(usize, &str)], sense: &str) -> Sentence {
    let tokens = (1..=5)
        .map(|i| {
            let mut t = Token::new(i, &format!("w{i}"), &format!("l{i}"), "X", if i == 1 { 0 } else { 1 }, "DEP");
            t.apreds = vec![args.iter().find(|(id, _)| *id == i).map(|(_, r)| r.to_string())];
            if i == 1 {
                t.fillpred = true;
                t.pred_sense = Some(sense.to_owned());
            }
            t
        })
        .collect();
    Sentence::new(tokens)
}

fn c9_scorer() -> Check {
    let gold = vec![sentence_with(&[(2, "A0"), (3, "A1"), (5, "A2")], "l1.01")];
    let pred = vec![sentence_with(&[(2, "A0"), (3, "A2"), (4, "A1")], "l1.01")];
    let r = ok(score(&gold, &pred, false))?;
    ensure(r.correct == 1 && r.predicted == 3 && r.gold == 3, || format!("{r:?}"))?;
    ensure(r.precision == 1.0 / 3.0 && r.recall == 1.0 / 3.0 && r.f1 == 1.0 / 3.0, || format!("{r:?}"))?;
    let r = ok(score(&gold, &pred, true))?;
    ensure(r.correct == 2 && r.predicted == 4 && r.gold == 4 && r.f1 == 0.5, || format!("{r:?}"))?;
    let pred2 = vec![sentence_with(&[(2, "A0"), (3, "A1")], "l1.02")];
    let r = ok(score(&gold, &pred2, true))?;
    ensure(r.precision == 2.0 / 3.0 && r.recall == 0.5 && r.pd_accuracy == Some(0.0), || format!("{r:?}"))?;

    let corpus = synth(SynthConfig { seed: 9, n_sentences: 40, ..SynthConfig::default() });
    let perfect = ok(score(&corpus, &corpus, true))?;
    ensure(perfect.f1 == 1.0 && perfect.pd_accuracy == Some(1.0), || format!("{perfect:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..100 {
        // A random starting prediction, then one spurious arc on an empty cell.
        let mut pred: Vec<Sentence> = corpus.clone();
        for s in pred.iter_mut() {
            for t in s.tokens_mut() {
                for cell in t.apreds.iter_mut() {
                    if rng.gen_bool(0.2) {
                        *cell = if cell.is_some() { None } else { Some("A1".into()) };
                    }
                }
            }
        }
        let before = ok(score(&corpus, &pred, false))?;
        let empty: Vec<(usize, usize, usize)> = corpus
            .iter()
            .enumerate()
            .flat_map(|(si, s)| {
                let pred = &pred;
                s.tokens().iter().enumerate().flat_map(move |(ti, t)| {
                    (0..t.apreds.len())
                        .filter(move |&k| t.apreds[k].is_none() && pred[si].tokens()[ti].apreds[k].is_none())
                        .map(move |k| (si, ti, k))
                })
            })
            .collect();
        let &(si, ti, k) = empty.choose(&mut rng).expect("an empty cell");
        pred[si].tokens_mut()[ti].apreds[k] = Some("A0".into());
        let after = ok(score(&corpus, &pred, false))?;
        ensure(
            after.precision <= before.precision && after.recall == before.recall && after.f1 <= before.f1,
            || format!("trial {trial}: {before:?} -> {after:?}"),
        )?;
    }
    Ok("hand cases exact (1/3, 1/2, 2/3), perfect F1 = 1.0, 100 spurious-arc perturbations monotone".into())
}

fn small_config() -> RunConfig {
    RunConfig {
        word_dim: 12,
        lemma_dim: 8,
        pos_dim: 8,
        indicator_dim: 4,
        lstm_layers: 2,
        lstm_hidden: 16,
        mlp_dim: 16,
        batch_size: 8,
        epochs: 4,
        seed: 77,
        ..RunConfig::default()
    }
}

fn run_once(corpus: &[Sentence]) -> Result<(Vec<u8>, String), String> {
    let config = small_config();
    let rules = ok(ok(mine_rules(corpus, config.syntax, &config.language))?.select_by_coverage(config.rule_coverage))?;
    let model = ok(SrlModel::new(config, corpus, Some(rules), None))?;
    let out = ok(train(model, corpus, None, Some((corpus, None)), &mut |_| {}))?;
    let predicted = ok(out.model.predict(corpus, None))?;
    let report = ok(score(corpus, &predicted, false))?;
    Ok((out.model.to_checkpoint().to_bytes(), format!("{}\n{report}", report.line())))
}

fn c10_reproducibility() -> Check {
    let corpus = synth(SynthConfig { seed: 10, n_sentences: 30, ..SynthConfig::default() });
    let (ck_a, rep_a) = run_once(&corpus)?;
    let pool = ok(rayon::ThreadPoolBuilder::new().num_threads(3).build())?;
    let (ck_b, rep_b) = pool.install(|| run_once(&corpus))?;
    ensure(ck_a == ck_b, || "checkpoints differ".into())?;
    ensure(rep_a == rep_b, || format!("reports differ:\n{rep_a}\n{rep_b}"))?;
    Ok(format!("checkpoint ({} bytes) and report byte-identical across runs and thread counts", ck_a.len()))
}

const CONLL_ENV: &str = "CONLL09_EN_TRAIN";

fn c11_conll_english() -> Option<Check> {
    let path = std::env::var(CONLL_ENV).ok()?;
    Some((|| {
        let text = ok(std::fs::read_to_string(&path))?;
        let corpus = ok(parse_conll09(&text))?;
        let rules: RuleSet = ok(mine_rules(&corpus, SyntaxSource::Gold, "en"))?;
        let top = rules.entries()[0].tuple;
        ensure(top == DistanceTuple::new(0, 1), || format!("top tuple {top}"))?;
        let k = ok(rules.select_by_coverage(0.99))?.k().unwrap();
        ensure(k <= 20, || format!("k = {k}"))?;
        let stats = ok(prune_stats(&corpus, &Pruning::Off, SyntaxSource::Gold))?;
        let rate = stats.positive_rate();
        ensure(rate < 0.10, || format!("positive rate {rate:.4}"))?;
        Ok(format!("top tuple (0,1), k(0.99) = {k}, unpruned positive rate {:.2}%", 100.0 * rate))
    })())
}

fn main() {
    // A name filter from `cargo test <filter>` that does not match this target skips it.
    if let Some(filter) = std::env::args().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }
    let only: Option<HashSet<usize>> = std::env::var("SRLPRUNE_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: Vec<Criterion> = vec![
        (1, "distance tuples vs ancestor-chain oracle", Box::new(|| Some(c1_tree_oracle()))),
        (2, "rule mining counts, monotone coverage, shuffle invariance", Box::new(|| Some(c2_rule_mining()))),
        (3, "coverage-target selection", Box::new(|| Some(c3_coverage_selection()))),
        (4, "pruning vs brute force and the Keep example", Box::new(|| Some(c4_pruning()))),
        (5, "biaffine hand case and triple-loop oracle", Box::new(|| Some(c5_biaffine()))),
        (6, "full-pipeline gradients vs central differences", Box::new(|| Some(c6_gradients()))),
        (7, "overfit a 50-sentence corpus", Box::new(|| Some(c7_overfit()))),
        (8, "rule pruning speeds up training", Box::new(|| Some(c8_pruning_benefit()))),
        (9, "scorer hand cases and spurious-arc monotonicity", Box::new(|| Some(c9_scorer()))),
        (10, "byte-identical checkpoints and reports", Box::new(|| Some(c10_reproducibility()))),
        (11, "CoNLL-2009 English rule statistics (non-gating)", Box::new(c11_conll_english)),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            println!("SKIP [{id}] {name}: not selected");
            continue;
        }
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Some(Err(format!("panicked: {msg}")))
            });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            None => println!("SKIP [{id}] {name}: set {CONLL_ENV} to a CoNLL-2009 English training file"),
            Some(Ok(detail)) => println!("PASS [{id}] {name}: {detail} ({secs:.1} s)"),
            Some(Err(why)) => {
                println!("FAIL [{id}] {name}: {why}");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
