//! Analytic backprop versus central finite differences on every layer kind
//! and activation.

mod common;

use common::{max_case_error, REL_TOL};
use hydragan_core::numcore::Activation;

#[test]
fn two_layer_symlog_seed_42() {
    assert!(max_case_error(false, Activation::Symlog, 42) < REL_TOL);
}

#[test]
fn every_kind_and_activation_matches_finite_differences() {
    for conv in [false, true] {
        for act in Activation::ALL {
            for seed in 0..100 {
                let err = max_case_error(conv, act, seed);
                assert!(
                    err < REL_TOL,
                    "conv={conv} act={act:?} seed={seed} rel err {err:e}"
                );
            }
        }
    }
}
