mod common;

use common::gradchecks::{self, Errors, TOL};
use indepcam::matrix::Matrix;
use indepcam::nn::{Tape, Tensor};

fn within_tolerance(errs: Errors) {
    for (case, err) in errs {
        assert!(err <= TOL, "{case}: {err}");
    }
}

#[test]
fn conv1d_all_geometries() {
    within_tolerance(gradchecks::conv1d());
}

#[test]
fn residual_block_1x4x32() {
    within_tolerance(gradchecks::residual_block());
}

#[test]
fn pooling_and_activations() {
    within_tolerance(gradchecks::pooling_and_activations());
}

#[test]
fn dropout_with_fixed_mask() {
    within_tolerance(gradchecks::dropout());
}

#[test]
fn batchnorm_train_and_eval() {
    within_tolerance(gradchecks::batchnorm());
}

#[test]
fn linear_concat_cross_entropy() {
    within_tolerance(gradchecks::linear_head());
}

#[test]
fn elementwise_arithmetic() {
    within_tolerance(gradchecks::elementwise());
}

#[test]
fn hsic_loss_term_n6_d3() {
    within_tolerance(gradchecks::hsic_term());
}

#[test]
fn hsic_loss_term_batch_of_one_errors() {
    let f = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
    let mut tape = Tape::new();
    let g = tape.leaf(Tensor::zeros(&[1, 3]), true);
    assert!(tape.hsic(g, &f, 1.0, 1.0).is_err());
}
