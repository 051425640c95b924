use scalelab::DomainSpec;
use scalelab_bench::{ball_point, ball_state};

#[test]
fn fixtures_build() {
    let (x, _) = ball_point(3);
    assert!(DomainSpec::unit_ball(3).contains(&x));
    assert_eq!(ball_state(3, 4, 0.5).unwrap().stages.len(), 4);
}
