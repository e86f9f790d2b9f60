use dqgp::classifier::{closest_poses, mahalanobis, ConditionModel};
use dqgp::data::{load_trajectory, DatasetManifest};
use dqgp::gp::GpModel;
use dqgp::kernels::{gram, Hyperparameters, JitterPolicy};
use std::collections::BTreeMap;
use std::path::Path;

fn main() {
    let root = Path::new("/tmp/run1");
    let manifest = DatasetManifest::load_from(&root.join("manifest.json")).unwrap();
    let split: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("split.json")).unwrap()).unwrap();
    let train_paths: Vec<String> = split["train"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let test_paths: Vec<String> = split["test"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let label_of: BTreeMap<&str, &str> = manifest.files.iter().map(|f| (f.path.as_str(), f.label.as_str())).collect();

    let mut train_by_label: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for p in &train_paths {
        let label = label_of[p.as_str()].to_string();
        let t = load_trajectory(&root.join(p)).unwrap().with_label(label.clone());
        train_by_label.entry(label).or_default().push(t);
    }
    let mut conditions = Vec::new();
    for entry in std::fs::read_dir(root.join("models")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map_or(false, |e| e == "json") {
            let model = GpModel::load_from(&path, &JitterPolicy::default()).unwrap();
            let label = model.label().to_string();
            let trajs = train_by_label[&label].clone();
            conditions.push(ConditionModel::new(label, trajs, model).unwrap());
        }
    }
    'outer: for p in &test_paths {
        let test = load_trajectory(&root.join(p)).unwrap();
        for (step, sample) in test.samples().iter().enumerate() {
            for c in &conditions {
                let refs = closest_poses(&sample.pose, c);
                let hp = c.hyperparameters();
                if mahalanobis(&sample.pose, &refs, hp, 1e-8, &JitterPolicy::default()).is_err() {
                    println!("FAIL at {p} step {step} condition {} (sigma_f={:.3e} l={:.3})", c.label(), hp.sigma_f(), hp.length_scale());
                    for i in 0..refs.len() { for j in (i+1)..refs.len() {
                        println!("  refs d({i},{j}) = {:.6e}", dqgp::geometry::d_mag(&refs[i], &refs[j]));
                    }}
                    let g = gram(&refs, &Hyperparameters::new(hp.sigma_f(), hp.length_scale(), 0.0).unwrap(), &JitterPolicy::default());
                    println!("  gram: {:?}", g.err().map(|e| e.to_string()));
                    // eigenvalues of raw kernel matrix
                    let n = refs.len();
                    let mut m = nalgebra::DMatrix::zeros(n, n);
                    for i in 0..n { for j in 0..n {
                        m[(i,j)] = if i==j { hp.sigma_f()*hp.sigma_f() } else { dqgp::kernels::k_mag(&refs[i], &refs[j], hp) };
                    }}
                    let eig = m.symmetric_eigen();
                    println!("  raw eigenvalues (units sigma_f^2): {:?}", eig.eigenvalues.iter().map(|e| e / (hp.sigma_f()*hp.sigma_f())).collect::<Vec<_>>());
                    break 'outer;
                }
            }
        }
    }
    println!("scan done");
}
