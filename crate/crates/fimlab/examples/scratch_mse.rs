use fimlab::channel::*;
use fimlab::design::{generate_white_sequence, WhiteKind};
use fimlab::estimator::*;
use fimlab::noise::NoiseModel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn main() {
    let n = 32;
    let m = 2;
    let seq = generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap().seq;
    let taps = DVector::from_column_slice(&[Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)]);
    let params = ChannelParams::new(0.3, taps).unwrap();
    let sigma = DMatrix::identity(2 * n, 2 * n) * 5e-4;
    let spec = ChannelSpec::new(seq, params, NoiseModel::gaussian(&sigma).unwrap()).unwrap();
    for seed in [1u64, 2, 3, 4, 5, 6, 7, 8, 9, 10] {
        let report = mse_monte_carlo(&spec, &NlsConfig::default(), 500, seed).unwrap();
        let mut ok = true;
        let mut worst = f64::INFINITY;
        let mut maxratio: f64 = 0.0;
        for p in 0..report.per_parameter_mse.len() {
            let slack = (report.per_parameter_mse[p] - (report.crlb[p] - 4.0 * report.stderr[p]))
                / report.crlb[p];
            worst = worst.min(slack);
            let ratio = report.per_parameter_mse[p] / report.crlb[p];
            maxratio = maxratio.max(ratio);
            if slack < 0.0 || ratio > 2.0 {
                ok = false;
            }
        }
        println!("seed {seed}: pass={ok} worst_slack={worst:.4} max_ratio={maxratio:.4}");
    }
}
