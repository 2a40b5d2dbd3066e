mod common;

#[test]
fn lp_matches_basis_enumeration() {
    let t = common::lp_oracle(500, 21);
    assert!(t.ok(), "{}", t.summary());
}

#[test]
fn qp_matches_refined_grid_search() {
    let t = common::qp_oracle(500, 22);
    assert!(t.ok(), "{}", t.summary());
}
