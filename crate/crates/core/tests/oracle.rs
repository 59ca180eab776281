//! Expected free energy against a brute-force oracle, plus randomized
//! properties of the inference and planning primitives.

mod common;

use common::*;

#[test]
fn efe_matches_path_enumeration_on_random_models() {
    let worst = oracle_max_error(200, 7);
    assert!(worst <= 1e-6, "max |engine - oracle| = {worst}");
}

#[test]
fn kl_is_nonnegative_and_zero_only_for_equal_distributions() {
    prop_kl(1000, 11).unwrap();
}

#[test]
fn information_gain_is_nonnegative() {
    prop_information_gain(1000, 12).unwrap();
}

#[test]
fn uniform_preferences_select_the_most_informative_policy() {
    prop_uniform_c(1000, 13).unwrap();
}

#[test]
fn delta_beliefs_carry_no_epistemic_value() {
    prop_delta_belief(1000, 14).unwrap();
}

#[test]
fn shifting_preferences_keeps_the_argmin() {
    prop_shift_c(1000, 15).unwrap();
}

#[test]
fn yellow_indicator_posterior() {
    let p = posterior_second([0.85, 0.15], [0.01, 0.95]);
    assert!((p - 0.944).abs() <= 0.005, "posterior = {p}");
}
