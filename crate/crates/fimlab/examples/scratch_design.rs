use fimlab::design::*;
use fimlab::noise::NoiseModel;
use nalgebra::DMatrix;

fn main() {
    let n = 16;
    let m = 2;
    let noise = NoiseModel::gaussian(&(DMatrix::identity(2 * n, 2 * n) * 0.5)).unwrap();
    let criterion = DesignCriterion { knowledge: Knowledge::NoKnowledge, objective: Objective::TraceCrlb };
    let opts = EvalOptions { seed: 6, count: 1_000 };
    for tap_draws in [3usize, 5, 8] {
        for grid_seed in [8u64, 42, 99, 7, 123] {
            let grid = ParamsGrid::default_grid(m, tap_draws, grid_seed);
            let cazac = generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap();
            let cz = evaluate_sequence(&cazac.seq, &grid, &noise, &criterion, &opts).unwrap();
            let mut all_beat = true;
            let mut worst_психgap = f64::INFINITY;
            let mut gaps = Vec::new();
            for pseed in [11u64, 12, 13, 14, 15, 16] {
                let psk = generate_white_sequence(n, m, WhiteKind::RandomPsk, pseed).unwrap();
                let pv = evaluate_sequence(&psk.seq, &grid, &noise, &criterion, &opts).unwrap();
                gaps.push(pv / cz);
                if pv <= cz { all_beat = false; }
                worst_психgap = worst_психgap.min(pv / cz);
            }
            println!("draws={tap_draws} gseed={grid_seed}: cazac={cz:.5} cazac_wins_all={all_beat} min psk/cazac={worst_психgap:.4}");
        }
    }
}
