//! Randomized property suites.

mod support;

#[test]
fn quantizer_partition_idempotence_symmetry() {
    support::quantizer_partition(10_000).unwrap();
}

#[test]
fn psi_sums_to_one() {
    support::psi_closure(300).unwrap();
}

#[test]
fn truncated_moments_match_quadrature_oracle() {
    support::truncated_moments(1000).unwrap();
}

#[test]
fn gamp_pdq_gaussian_matches_direct_solve() {
    support::gamp_vs_direct(100).unwrap();
}

#[test]
fn generic_se_matches_closed_forms() {
    support::se_closed_forms(40).unwrap();
}

#[test]
fn qpsk_denoiser_matches_enumeration() {
    support::qpsk_denoiser(2000).unwrap();
}

#[test]
fn monte_carlo_is_identical_across_thread_counts() {
    support::thread_invariance().unwrap();
}
