mod common;

use gmc_core::featurize::Featurizer;
use gmc_core::mpnn::{
    backward, example_gradient, forward, init_model, Activation, Aggregation, Mode,
};
use gmc_core::{AblationMask, DatasetRecord, Label, MolGraph, TaskKind};

use common::oracles::{max_relative_error, MAX_REL};

fn graphs_for(names: &[&str], task: TaskKind) -> Vec<MolGraph> {
    let records: Vec<DatasetRecord> = names
        .iter()
        .map(|n| DatasetRecord {
            id: n.to_string(),
            label: match task {
                TaskKind::Classification => Label::Binary(n.len() % 2 == 0),
                TaskKind::Regression => Label::Real(-0.4),
            },
            molecule: common::molecule(n),
        })
        .collect();
    Featurizer::new(common::wcs_params(&records), AblationMask::empty()).featurize_all(&records)
}

fn check(task: TaskKind, activation: Activation, aggregation: Aggregation) {
    let mut config = common::tiny_config(task);
    config.message_hidden = 6;
    config.ffn_hidden = 5;
    config.ffn_layers = 3;
    config.activation = activation;
    config.aggregation = aggregation;
    for g in graphs_for(&["acetonitrile", "ethane", "thiophene"], task) {
        let model = init_model(&config, g.node_width(), 11);
        let (rel, at) = max_relative_error(&model, &g);
        assert!(
            rel < MAX_REL,
            "{task} {activation} {aggregation} on {}: {rel:e} at {at}",
            g.id
        );
    }
}

#[test]
fn gradients_classification_all_activations() {
    for act in Activation::ALL {
        check(TaskKind::Classification, act, Aggregation::Sum);
    }
}

#[test]
fn gradients_regression_all_aggregations() {
    for agg in [Aggregation::Sum, Aggregation::Mean, Aggregation::Norm] {
        check(TaskKind::Regression, Activation::Tanh, agg);
        check(TaskKind::Regression, Activation::Prelu, agg);
    }
}

#[test]
fn gradient_scales_linearly_with_upstream() {
    let g = &graphs_for(&["thiophene"], TaskKind::Regression)[0];
    let model = init_model(
        &common::tiny_config(TaskKind::Regression),
        g.node_width(),
        2,
    );
    let tape = forward(&model, g, Mode::Eval).unwrap();
    let one = backward(&model, &tape, 1.0);
    let two = backward(&model, &tape, 2.0);
    for ((_, a), (_, b)) in one.tensors().iter().zip(two.tensors().iter()) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(2.0 * x, *y);
        }
    }
}

#[test]
fn zero_loss_gives_zero_head_gradient() {
    let g = &graphs_for(&["ethane"], TaskKind::Regression)[0];
    let model = init_model(
        &common::tiny_config(TaskKind::Regression),
        g.node_width(),
        5,
    );
    let out = forward(&model, g, Mode::Eval).unwrap().output;
    let (l, grads) = example_gradient(&model, g, out, Mode::Eval).unwrap();
    assert_eq!(l, 0.0);
    for layer in &grads.ffn {
        assert!(layer.w.iter().chain(layer.b.iter()).all(|&v| v == 0.0));
    }
}
