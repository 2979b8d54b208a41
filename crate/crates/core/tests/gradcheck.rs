mod common;

use common::gradcheck::{all_checks, check_network};
use texvc::nn::NetSpec;

#[test]
fn every_layer_matches_finite_differences() {
    for seed in 0..5 {
        for c in all_checks(seed) {
            assert!(c.checked > 0, "{}: nothing checked", c.name);
            assert!(c.max_rel < 1e-4, "seed {seed} {}: max relative error {:.3e}", c.name, c.max_rel);
        }
    }
}

#[test]
fn default_architecture_matches_finite_differences() {
    let c = check_network(&NetSpec::default(), 42, 6);
    assert!(c.checked > 40, "{c:?}");
    assert!(c.max_rel < 1e-4, "{c:?}");
}
