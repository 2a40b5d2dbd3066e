mod common;

#[test]
fn pontryagin_difference_matches_vertex_translates() {
    let t = common::pontryagin_oracle(50, 1000, 11);
    assert!(t.ok(), "{}", t.summary());
    assert!(t.samples > 40_000, "{}", t.summary());
}

#[test]
fn projection_is_sound_and_complete() {
    let t = common::projection_oracle(50, 1000, 12);
    assert!(t.ok(), "{}", t.summary());
}

#[test]
fn redundancy_removal_preserves_the_set_and_is_minimal() {
    let t = common::redundancy_oracle(50, 1000, 13);
    assert!(t.ok(), "{}", t.summary());
}
