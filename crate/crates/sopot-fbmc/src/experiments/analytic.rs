//! Closed-form reference curves for sanity-checking the Monte Carlo chain.
//! Nothing in the simulation path calls these.

/// Complementary error function, rational approximation with relative error
/// below 1.2e-7 everywhere (Numerical Recipes `erfcc`).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded 4-QAM bit error rate over AWGN at linear Eb/N0:
/// `Q(sqrt(2 Eb/N0))`.
pub fn qam4_ber(ebn0_linear: f64) -> f64 {
    q_function((2.0 * ebn0_linear).sqrt())
}
