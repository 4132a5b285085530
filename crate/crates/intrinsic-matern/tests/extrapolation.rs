mod common;

use common::{ToyExtrapolation, TOY_MODELS};

#[test]
fn growth_of_the_variogram_orders_the_drift() {
    let toy = ToyExtrapolation::new();
    let far = 5.0 + 1e3;
    let drift: Vec<f64> = TOY_MODELS
        .iter()
        .map(|&(a, b)| toy.offset(&toy.fit(a, b), far).abs())
        .collect();
    // Proper models return to the mean.
    assert!(drift[0] < 1e-8 && drift[1] < 1e-8, "{drift:?}");
    assert!(drift[1] < drift[2] && drift[0] < drift[2]);
    assert!(drift[2] < drift[3] && drift[3] < drift[4], "{drift:?}");

    // Linear growth keeps a fixed offset.
    let linear = toy.fit(1.0, 1.0);
    let near = toy.offset(&linear, 105.0);
    let there = toy.offset(&linear, far);
    assert!((near - there).abs() < 1e-3 * near.abs().max(1e-3), "{near} {there}");
}
