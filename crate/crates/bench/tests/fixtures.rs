use scadboot_bench::logit_fixture;

#[test]
fn fixture_is_deterministic() {
    let (a, ma) = logit_fixture(200, 20, 1);
    let (b, _) = logit_fixture(200, 20, 1);
    assert_eq!(a, b);
    assert_eq!((ma.n_obs(), ma.dim()), (200, 20));
}
