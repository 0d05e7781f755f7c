// scratch probe: violation decay for the failing config
use sdr_core::experiments::example1_models;
use sdr_core::kernels::KernelSpec;
use sdr_core::mcsvm::{train, TrainConfig};
use sdr_core::sampling::{sample_mixture, RngSeed};
use sdr_core::Error;

fn main() {
    let (s, u) = example1_models();
    let levels: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut parts = Vec::new();
    for (i, &p) in levels.iter().enumerate() {
        parts.push(sample_mixture(1111, p, &s, &u, RngSeed(42u64.wrapping_add(10 + i as u64))).unwrap());
    }
    // quick concat
    let total: usize = parts.iter().map(|p| p.len()).sum();
    let d = 2;
    let mut pts = nalgebra::DMatrix::zeros(total, d);
    let mut labels = Vec::new();
    let mut r = 0;
    for part in &parts {
        for i in 0..part.len() {
            pts.row_mut(r).copy_from(&part.points().row(i));
            labels.push(part.label(i));
            r += 1;
        }
    }
    let data = sdr_core::sampling::LabeledDataset::new(pts, labels).unwrap();
    let cfg = TrainConfig {
        kernel: KernelSpec::cubic(),
        eta: 1e-3,
        taus: levels.clone(),
        kkt_tol: 1e-4,
        max_passes: 60000,
        seed: RngSeed(42),
    };
    let t0 = std::time::Instant::now();
    match train(&data, &cfg) {
        Ok(out) => println!(
            "converged epochs={} updates={} viol={:.3e} elapsed={:?}",
            out.diagnostics.epochs, out.diagnostics.pair_updates,
            out.diagnostics.final_kkt_violation, t0.elapsed()
        ),
        Err(Error::NonConvergence { best, violation, .. }) => {
            let d = &best.diagnostics;
            println!("NOT converged viol={violation:.3e} updates={} elapsed={:?}", d.pair_updates, t0.elapsed());
            let curve = &d.dual_objective_by_epoch;
            for (i, v) in curve.iter().enumerate().step_by(10) {
                println!("  epoch {i}: obj {v:.9}");
            }
            println!("  last obj: {:.9}", curve.last().unwrap());
        }
        Err(e) => println!("error: {e}"),
    }
}
