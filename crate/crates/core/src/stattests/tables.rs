//! Built-in critical values.
//!
//! Asymptotic CvM(df) quantiles come from numerical inversion of the
//! characteristic function of `sum_n chi2_df / (pi n)^2`. The finite-sample
//! rows were produced by this crate's Monte Carlo harness on Gaussian white
//! noise (200 000 replications per sample size for RWD and IRW, 100 000 for
//! the seasonal statistics).

use super::CriticalValue;

/// Significance levels tabulated everywhere: 10%, 5%, 1%.
pub const LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

const CVM: [[f64; 3]; 12] = [
    [0.347, 0.461, 0.743],
    [0.607, 0.748, 1.074],
    [0.841, 1.000, 1.359],
    [1.063, 1.237, 1.623],
    [1.278, 1.465, 1.874],
    [1.487, 1.686, 2.117],
    [1.693, 1.903, 2.353],
    [1.896, 2.116, 2.584],
    [2.096, 2.326, 2.811],
    [2.295, 2.533, 3.035],
    [2.492, 2.739, 3.256],
    [2.687, 2.942, 3.474],
];

const RWD_ASYMPTOTIC: [f64; 3] = [0.119, 0.148, 0.218];

/// Sample sizes of the finite-sample rows.
pub const FINITE_SIZES: [usize; 4] = [100, 250, 500, 1000];

// Rows for T = 100, 250, 500, 1000; columns 10%, 5%, 1%.
const RWD_FINITE: [[f64; 3]; 4] = [
    [0.119857, 0.147807, 0.214392],
    [0.119489, 0.147789, 0.216585],
    [0.119009, 0.147487, 0.215941],
    [0.119257, 0.147705, 0.216908],
];

const IRW_FINITE: [[f64; 3]; 4] = [
    [0.005897, 0.008161, 0.013568],
    [0.005878, 0.008123, 0.013703],
    [0.005793, 0.008054, 0.013568],
    [0.005829, 0.008063, 0.013633],
];

/// Seasonal rows indexed by harmonic `j - 1` (1..=6), then group II at index 6.
const SEASONAL_FINITE: [[[f64; 3]; 4]; 7] = [
    [
        [0.6791, 0.8292, 1.1752],
        [0.6356, 0.7824, 1.1179],
        [0.6178, 0.7585, 1.0827],
        [0.6124, 0.7505, 1.0768],
    ],
    [
        [0.6782, 0.8271, 1.1675],
        [0.6363, 0.7808, 1.1143],
        [0.6212, 0.7680, 1.1006],
        [0.6137, 0.7552, 1.0860],
    ],
    [
        [0.6765, 0.8255, 1.1712],
        [0.6314, 0.7746, 1.1007],
        [0.6169, 0.7620, 1.0928],
        [0.6138, 0.7561, 1.0893],
    ],
    [
        [0.6759, 0.8230, 1.1633],
        [0.6344, 0.7793, 1.1123],
        [0.6207, 0.7636, 1.0824],
        [0.6111, 0.7504, 1.0730],
    ],
    [
        [0.6785, 0.8321, 1.1782],
        [0.6338, 0.7778, 1.1163],
        [0.6199, 0.7621, 1.0948],
        [0.6155, 0.7588, 1.0844],
    ],
    [
        [0.3908, 0.5166, 0.8133],
        [0.3592, 0.4764, 0.7742],
        [0.3564, 0.4730, 0.7592],
        [0.3486, 0.4652, 0.7466],
    ],
    [
        [2.2910, 2.5090, 2.9451],
        [2.1697, 2.3920, 2.8544],
        [2.1388, 2.3654, 2.8441],
        [2.1146, 2.3417, 2.8134],
    ],
];

fn to_cvs(row: &[f64; 3]) -> Vec<CriticalValue> {
    LEVELS
        .iter()
        .zip(row)
        .map(|(&level, &value)| CriticalValue { level, value })
        .collect()
}

/// Asymptotic CvM(df) critical values, `df` in `1..=12`.
pub fn cvm_asymptotic(df: usize) -> Option<Vec<CriticalValue>> {
    (1..=CVM.len()).contains(&df).then(|| to_cvs(&CVM[df - 1]))
}

/// Asymptotic critical values of the second-level (detrended) CvM statistic.
pub fn rwd_asymptotic() -> Vec<CriticalValue> {
    to_cvs(&RWD_ASYMPTOTIC)
}

fn interpolate(table: &[[f64; 3]; 4], n: usize) -> Vec<CriticalValue> {
    // linear in 1/T between tabulated sizes, clamped at the ends
    let x = 1.0 / n.max(1) as f64;
    let xs: Vec<f64> = FINITE_SIZES.iter().map(|&s| 1.0 / s as f64).collect();
    let row = if x >= xs[0] {
        table[0]
    } else if x <= xs[3] {
        table[3]
    } else {
        let k = (0..3)
            .find(|&k| x <= xs[k] && x >= xs[k + 1])
            .expect("bracketed");
        let w = (x - xs[k + 1]) / (xs[k] - xs[k + 1]);
        let mut r = [0.0; 3];
        for (i, v) in r.iter_mut().enumerate() {
            *v = w * table[k][i] + (1.0 - w) * table[k + 1][i];
        }
        r
    };
    to_cvs(&row)
}

/// Finite-sample RWD critical values for a series of length `n`.
pub fn rwd_finite_sample(n: usize) -> Vec<CriticalValue> {
    interpolate(&RWD_FINITE, n)
}

/// Finite-sample IRW critical values for a series of length `n`.
pub fn irw_finite_sample(n: usize) -> Vec<CriticalValue> {
    interpolate(&IRW_FINITE, n)
}

/// Finite-sample seasonal critical values: `harmonic` in `1..=6`, or `None`
/// for the group II statistic.
pub fn seasonal_finite_sample(harmonic: Option<usize>, n: usize) -> Option<Vec<CriticalValue>> {
    let idx = match harmonic {
        Some(j) if (1..=6).contains(&j) => j - 1,
        Some(_) => return None,
        None => 6,
    };
    Some(interpolate(&SEASONAL_FINITE[idx], n))
}
