mod common;

#[test]
fn special_functions_satisfy_identities_and_finite_differences() {
    let bad = common::special_function_violations();
    assert!(bad.is_empty(), "{} violations:\n{}", bad.len(), bad.join("\n"));
}

#[test]
fn trigamma_grid_has_enough_points() {
    let grid = common::log_grid(1e-2, 1e4, 200);
    assert!(grid.len() >= 100);
    assert!((grid[0] - 1e-2).abs() < 1e-15 && (grid[199] - 1e4).abs() < 1e-9);
}
