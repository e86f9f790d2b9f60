use dqgp::geometry::{DualQuaternionPose, UnitQuaternion};
use dqgp::gp::{log_marginal_likelihood, GpModel, FitConfig};
use dqgp::kernels::{gram_from_sq_distances, pairwise_sq_distances, Hyperparameters, JitterPolicy};
use nalgebra::{DMatrix, DVector, Vector3};
use std::time::Instant;

fn main() {
    let n = 120;
    let poses: Vec<DualQuaternionPose> = (0..n)
        .map(|i| {
            let u = i as f64 / n as f64;
            DualQuaternionPose::from_pose(
                UnitQuaternion::from_axis_angle(&Vector3::z(), u).unwrap(),
                &Vector3::new(u, u * 0.5, 0.0),
            )
        })
        .collect();
    let t0 = Instant::now();
    let d_sq = pairwise_sq_distances(&poses);
    println!("pairwise {n}x{n}: {:?}", t0.elapsed());

    let hp = Hyperparameters::new(1e-3, 0.4, 1e-4).unwrap();
    let policy = JitterPolicy::default();
    let y = DVector::from_fn(n, |i, _| (i as f64 * 0.1).sin() * 1e-3);

    let t1 = Instant::now();
    let reps = 200;
    let mut acc = 0.0;
    for _ in 0..reps {
        let g = gram_from_sq_distances(&d_sq, &hp, &policy).unwrap();
        acc += log_marginal_likelihood(&g, &y);
    }
    let per = t1.elapsed() / reps;
    println!("gram+lml per eval: {per:?} (acc {acc:.1})");

    let targets = DMatrix::from_fn(n, 6, |i, j| ((i + j) as f64 * 0.1).sin() * 1e-3);
    let t2 = Instant::now();
    let (_m, report) = GpModel::fit_with_report(&poses, &targets, &FitConfig { n_starts: 8, max_iters: 80, ..Default::default() }).unwrap();
    println!("fit n={n}: {:?}; dim0 start_lml: {:?}", t2.elapsed(), report.dims[0].start_lml.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>());
}
