//! Shared benchmark fixtures.

use jumphedge::{ClaimSpec, Curve, Interp, MarketModel};

/// Constant-coefficient market with a jump intensity of 0.3.
pub fn constants_market() -> MarketModel {
    MarketModel::constant(1.0, 100.0, 0.05, 0.2, -0.5, 0.3).expect("valid constants")
}

/// Same market with a three-piece intensity and a linear volatility.
pub fn curved_market() -> MarketModel {
    let lambda = Curve::new(&[(0.0, 0.2), (0.4, 0.6), (0.7, 0.1)], Interp::PiecewiseConstant).expect("valid curve");
    let sigma = Curve::new(&[(0.0, 0.15), (1.0, 0.3)], Interp::PiecewiseLinear).expect("valid curve");
    constants_market().with_lambda(lambda).and_then(|m| m.with_curve("sigma", sigma)).expect("valid market")
}

pub fn insurance() -> ClaimSpec {
    ClaimSpec::insurance(1.0, 0.8)
}

pub fn credit() -> ClaimSpec {
    ClaimSpec::credit(4, 0.03, 100.0, 1.0).expect("valid credit claim")
}
