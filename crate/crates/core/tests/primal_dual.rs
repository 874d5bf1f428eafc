use ddg::data::{generate_glyphs, Dataset, DatasetConfig, Example};
use ddg::eval::accuracy;
use ddg::model::{Model, ParamGroup};
use ddg::trainer::*;
use ddg::{Error, Graph};

fn tiny() -> Dataset {
    generate_glyphs(&DatasetConfig {
        n_per_domain: 24,
        image_size: 8,
        glyph_classes: 3,
        angles: vec![0.0, 45.0],
        ..Default::default()
    })
    .unwrap()
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        epochs: 2,
        s_dim: 4,
        v_dim: 3,
        hidden: 12,
        ..Default::default()
    }
}

fn trainer(cfg: TrainConfig, ds: &Dataset, gamma: f64) -> Trainer {
    Trainer::new(
        cfg.clone(),
        model_dims(&cfg, ds.image_size, ds.num_classes),
        gamma,
    )
    .unwrap()
}

fn batch(ds: &Dataset, n: usize) -> Vec<&Example> {
    ds.examples.iter().step_by(3).take(n).collect()
}

fn group_values(t: &Trainer, group: ParamGroup) -> Vec<Vec<f64>> {
    t.model
        .params()
        .into_iter()
        .filter(|(g, _)| *g == group)
        .map(|(_, p)| p.value.data().to_vec())
        .collect()
}

#[test]
fn zero_multiplier_theta_step_is_an_erm_step() {
    let ds = tiny();
    let b = batch(&ds, 8);
    let mut ddg = trainer(
        TrainConfig {
            lambda0: 0.0,
            ..small_cfg()
        },
        &ds,
        1.0,
    );
    let mut erm = trainer(
        TrainConfig {
            mode: Mode::Erm,
            ..small_cfg()
        },
        &ds,
        1.0,
    );
    ddg.primal_step(&b).unwrap();
    erm.primal_step(&b).unwrap();
    assert_eq!(
        group_values(&ddg, ParamGroup::Theta),
        group_values(&erm, ParamGroup::Theta)
    );
}

#[test]
fn erm_mode_updates_only_theta_and_still_reports_constraint() {
    let ds = tiny();
    let b = batch(&ds, 8);
    let mut t = trainer(
        TrainConfig {
            mode: Mode::Erm,
            ..small_cfg()
        },
        &ds,
        0.5,
    );
    let before: Vec<_> = [ParamGroup::Theta, ParamGroup::Phi, ParamGroup::Psi]
        .iter()
        .map(|&g| group_values(&t, g))
        .collect();
    let r = t.primal_step(&b).unwrap();
    assert!(r.l_con > 0.0);
    assert_eq!(r.lagrangian, r.l_erm);
    assert_ne!(group_values(&t, ParamGroup::Theta), before[0]);
    assert_eq!(group_values(&t, ParamGroup::Phi), before[1]);
    assert_eq!(group_values(&t, ParamGroup::Psi), before[2]);
}

#[test]
fn small_primal_step_decreases_batch_lagrangian() {
    let ds = tiny();
    let b = batch(&ds, 8);
    for augment in [false, true] {
        let cfg = TrainConfig {
            eta1: 1e-4,
            lambda0: 0.5,
            augment,
            ..small_cfg()
        };
        let mut t = trainer(cfg, &ds, 1.0);
        let before = t.evaluate_batch(&b).unwrap().lagrangian;
        let reported = t.primal_step(&b).unwrap().lagrangian;
        let after = t.evaluate_batch(&b).unwrap().lagrangian;
        assert_eq!(before, reported);
        assert!(after < before, "augment={augment}: {after} >= {before}");
    }
}

#[test]
fn reported_lagrangian_matches_graph_value() {
    let ds = tiny();
    let b = batch(&ds, 8);
    let cfg = TrainConfig {
        augment: true,
        cycle: true,
        lambda0: 0.37,
        ..small_cfg()
    };
    let t = trainer(cfg, &ds, 2.0);
    let r = t.evaluate_batch(&b).unwrap();
    let identity = r.l_erm + 0.37 * r.l_con + r.l_aug + CYCLE_WEIGHT * r.l_cyc;
    assert!((r.lagrangian - identity).abs() <= 1e-12);

    let mut g = Graph::new();
    let net = t.model.bind_params(&mut g).unwrap();
    let imgs: Vec<_> = b.iter().map(|e| &e.image).collect();
    let x = g.constant(t.model.batch(&imgs).unwrap()).unwrap();
    let labels: Vec<usize> = b.iter().map(|e| e.label).collect();
    let opts = TermOptions {
        gamma: 2.0,
        mode: ConstraintMode::Hinge,
        augment: true,
        cycle: true,
    };
    let pairs = PairIndex::new(8, Pairing::Shift).unwrap();
    let m = batch_terms(&net, &mut g, x, &labels, &pairs, &opts)
        .unwrap()
        .means(&mut g)
        .unwrap();
    let lag = m.lagrangian(&mut g, 0.37).unwrap();
    assert!((g.value(lag).data()[0] - r.lagrangian).abs() <= 1e-12);
}

#[test]
fn augmentation_loss_leaves_generator_gradients_at_zero() {
    let ds = tiny();
    let b = batch(&ds, 8);
    let t = trainer(small_cfg(), &ds, 1.0);
    let mut g = Graph::new();
    let net = t.model.bind_params(&mut g).unwrap();
    let vars = net.param_vars();
    let imgs: Vec<_> = b.iter().map(|e| &e.image).collect();
    let x = g.constant(t.model.batch(&imgs).unwrap()).unwrap();
    let labels: Vec<usize> = b.iter().map(|e| e.label).collect();
    let opts = TermOptions {
        gamma: 1.0,
        mode: ConstraintMode::Hinge,
        augment: true,
        cycle: false,
    };
    let pairs = PairIndex::new(8, Pairing::Shift).unwrap();
    let terms = batch_terms(&net, &mut g, x, &labels, &pairs, &opts).unwrap();
    let aug = g.mean(terms.aug.unwrap()).unwrap();
    let grads = g.backward(aug).unwrap();
    for ((group, p), v) in t.model.params().into_iter().zip(vars) {
        let norm: f64 = grads.get(v).unwrap().data().iter().map(|x| x.abs()).sum();
        match group {
            ParamGroup::Phi | ParamGroup::Psi => assert_eq!(norm, 0.0, "{}", p.name),
            ParamGroup::Theta => assert!(norm > 0.0, "{}", p.name),
        }
    }
}

#[test]
fn all_pairs_equals_shift_for_two_examples() {
    let ds = tiny();
    let b = batch(&ds, 2);
    let run = |pairing| {
        let mut t = trainer(
            TrainConfig {
                batch_size: 2,
                pairing,
                ..small_cfg()
            },
            &ds,
            0.5,
        );
        let r = t.primal_step(&b).unwrap();
        (r, t.model)
    };
    let (ra, ma) = run(Pairing::AllPairs);
    let (rs, ms) = run(Pairing::Shift);
    assert_eq!(ra, rs);
    assert_eq!(ma, ms);
}

#[test]
fn log_shape_and_determinism() {
    let ds = tiny();
    let cfg = small_cfg();
    let a = train(&cfg, &ds, &ds.domain(1)).unwrap();
    let b = train(&cfg, &ds, &ds.domain(1)).unwrap();
    let per_epoch = ds.len() / cfg.batch_size;
    assert_eq!(a.metrics.len(), cfg.epochs * per_epoch);
    for (i, r) in a.metrics.iter().enumerate() {
        assert_eq!(r.step, i as u64);
        assert_eq!(r.val_acc.is_some(), (i + 1) % per_epoch == 0);
    }
    assert_eq!(metrics_to_csv(&a.metrics), metrics_to_csv(&b.metrics));
    assert_eq!(a.model, b.model);
}

#[test]
fn hinge_multiplier_is_nonnegative_and_nondecreasing() {
    let ds = tiny();
    let out = train(&small_cfg(), &ds, &ds.domain(0)).unwrap();
    let lambdas: Vec<f64> = out.metrics.iter().map(|r| r.lambda).collect();
    assert!(lambdas.iter().all(|&l| l >= 0.0));
    assert!(lambdas.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(out.dual.history.len(), out.metrics.len());
    for (rec, h) in out.metrics.iter().zip(&out.dual.history) {
        assert!((h.lambda - (rec.lambda + 0.01 * rec.l_con).max(0.0)).abs() < 1e-12);
    }
}

#[test]
fn raw_mode_with_slack_drives_multiplier_to_zero() {
    let ds = tiny();
    let cfg = TrainConfig {
        constraint_mode: ConstraintMode::Raw,
        gamma: Gamma::Fixed(1e3),
        ..small_cfg()
    };
    let out = train(&cfg, &ds, &ds.domain(0)).unwrap();
    assert!(out.metrics.iter().any(|r| r.l_con < 0.0));
    assert_eq!(out.dual.lambda, 0.0);
}

#[test]
fn erm_mode_never_moves_the_multiplier() {
    let ds = tiny();
    let out = train(
        &TrainConfig {
            mode: Mode::Erm,
            ..small_cfg()
        },
        &ds,
        &ds.domain(0),
    )
    .unwrap();
    assert!(out.metrics.iter().all(|r| r.lambda == 0.1));
    assert!(out.dual.history.is_empty());
}

#[test]
fn auto_gamma_is_a_quarter_of_mean_mass() {
    let ds = tiny();
    let expect = 0.25 * ds.examples.iter().map(|e| e.image.sum()).sum::<f64>() / ds.len() as f64;
    assert!((auto_gamma(&ds.examples).unwrap() - expect).abs() < 1e-12);
    let out = train(&small_cfg(), &ds, &ds.domain(0)).unwrap();
    assert_eq!(out.gamma, auto_gamma(&ds.examples).unwrap());
}

#[test]
fn batch_size_rules() {
    let ds = tiny();
    assert!(matches!(
        train(
            &TrainConfig {
                batch_size: 1,
                ..small_cfg()
            },
            &ds,
            &ds
        ),
        Err(Error::Config(_))
    ));
    assert!(PairIndex::new(1, Pairing::Shift).is_err());
    let mut t = trainer(small_cfg(), &ds, 1.0);
    assert!(matches!(
        t.primal_step(&batch(&ds, 5)),
        Err(Error::Config(_))
    ));
}

#[test]
fn divergence_is_reported_with_its_step() {
    let ds = tiny();
    let cfg = TrainConfig {
        eta1: 1e200,
        ..small_cfg()
    };
    match train(&cfg, &ds, &ds.domain(0)) {
        Err(Error::Numeric { op }) => assert!(op.contains("step"), "{op}"),
        other => panic!("expected a numeric error, got {other:?}"),
    }
}

#[test]
fn early_stopping_cuts_the_run_short() {
    let ds = tiny();
    let cfg = TrainConfig {
        epochs: 40,
        early_stop_patience: Some(1),
        ..small_cfg()
    };
    let out = train(&cfg, &ds, &ds.domain(0)).unwrap();
    assert!(out.metrics.len() < 40 * (ds.len() / 8));
}

#[test]
fn returned_model_is_the_best_validation_epoch() {
    let ds = tiny();
    let val = ds.domain(1);
    let cfg = TrainConfig {
        epochs: 6,
        ..small_cfg()
    };
    let out = train(&cfg, &ds, &val).unwrap();
    let accs: Vec<f64> = out.metrics.iter().filter_map(|r| r.val_acc).collect();
    let best = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = accs.iter().position(|&a| a == best).unwrap();
    assert_eq!(out.selected.epoch, first);
    assert_eq!(out.selected.val_acc, Some(best));
    assert_eq!(
        out.selected.step,
        (first as u64 + 1) * (ds.len() / 8) as u64
    );
    assert_eq!(
        out.selected.lambda,
        out.metrics[out.selected.step as usize - 1].lambda
            + 0.01 * out.metrics[out.selected.step as usize - 1].l_con
    );
    assert_eq!(accuracy(&out.model, &val).unwrap(), best);

    let no_val = train(&cfg, &ds, &ds.filter(|_| false)).unwrap();
    assert_eq!(no_val.selected.step, no_val.steps);
    assert_eq!(no_val.selected.val_acc, None);
}
