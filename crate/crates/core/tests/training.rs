use neurograph_core::dataset::{synth_cohort, SynthConfig};
use neurograph_core::encoding::EncodingConfig;
use neurograph_core::nn::{GatModel, GraphBatch, Mode, ModelConfig};
use neurograph_core::pipeline::prepare_samples;
use neurograph_core::rewire::RewireConfig;
use neurograph_core::train::{mae, run_cv, train_model, Adam, AdamConfig, Example, TrainConfig};

fn samples(n: usize, seed: u64) -> Vec<neurograph_core::train::Sample> {
    let cohort = synth_cohort(n, seed, &SynthConfig::default()).unwrap();
    prepare_samples(&cohort, &RewireConfig::default(), &EncodingConfig::default()).unwrap()
}

#[test]
fn loss_descends_on_a_fixed_batch() {
    let samples = samples(8, 42);
    let inputs: Vec<_> = samples.iter().map(|s| &s.input).collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let batch = GraphBatch::new(&inputs).unwrap();
    let train = TrainConfig::default();
    let mut model = GatModel::new(ModelConfig::default(), 42).unwrap();
    model.set_output_bias(targets.iter().sum::<f64>() / targets.len() as f64);
    let mut adam = Adam::new(AdamConfig { weight_decay: train.weight_decay, ..AdamConfig::default() });

    let mut losses = Vec::new();
    for _ in 0..=10 {
        let out = model.loss_and_grads(&batch, &targets, Mode::Train { seed: 7 }).unwrap();
        losses.push(out.loss);
        adam.step(model.params_mut(), &out.grads, train.lr).unwrap();
    }
    let increases = losses.windows(2).filter(|w| w[1] >= w[0]).count();
    assert!(increases < 2, "loss went up on {increases} of 10 epochs: {losses:?}");
}

#[test]
fn reported_validation_mae_belongs_to_the_returned_model() {
    let samples = samples(12, 3);
    let examples: Vec<Example> = samples.iter().map(|s| Example { input: &s.input, target: s.target }).collect();
    let (train, val) = examples.split_at(9);
    let cfg = TrainConfig { max_epochs: 12, early_stop_patience: 4, ..TrainConfig::default() };
    let mut history = Vec::new();
    let outcome = train_model(&ModelConfig::default(), &cfg, train, val, 5, |e| history.push(e.clone())).unwrap();

    let best = history.iter().map(|e| e.val_mae).fold(f64::INFINITY, f64::min);
    assert_eq!(outcome.best_val_mae, best);
    assert_eq!(history[outcome.best_epoch - 1].val_mae, best);
    let refs: Vec<_> = val.iter().map(|e| e.input).collect();
    let predictions = outcome.model.predict(&GraphBatch::new(&refs).unwrap()).unwrap();
    let targets: Vec<f64> = val.iter().map(|e| e.target).collect();
    assert!((mae(&predictions, &targets).unwrap() - best).abs() <= 1e-12);
}

#[test]
fn cross_validation_is_deterministic_and_covers_every_patient() {
    let samples = samples(10, 8);
    let cfg = TrainConfig { folds: 2, seeds: 2, max_epochs: 3, ..TrainConfig::default() };
    let a = run_cv(&samples, &ModelConfig::default(), &cfg, &|_| {}).unwrap();
    let b = run_cv(&samples, &ModelConfig::default(), &cfg, &|_| {}).unwrap();
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    assert_eq!(a.report.folds.len(), 4);
    for r in 0..2 {
        let mut tested: Vec<&str> = a
            .report
            .folds
            .iter()
            .filter(|f| f.replicate == r)
            .flat_map(|f| f.predictions.iter().map(|p| p.patient_id.as_str()))
            .collect();
        tested.sort_unstable();
        let mut all: Vec<&str> = samples.iter().map(|s| s.patient_id.as_str()).collect();
        all.sort_unstable();
        assert_eq!(tested, all);
    }
}
