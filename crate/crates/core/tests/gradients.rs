use mlbfgs_core::objectives::{
    finite_diff_grad, synth_blobs, Activation, LogisticObjective, MlpObjective, MlpSpec, Objective, DEFAULT_FD_STEP,
};
use mlbfgs_core::{RngStream, Vector};

fn rel_err(a: &Vector, b: &Vector) -> f64 {
    a.sub(b).norm() / a.norm().max(b.norm()).max(1e-12)
}

#[test]
fn mlp_matches_central_differences() {
    let mut rng = RngStream::new(21);
    let data = synth_blobs(&mut rng, 40, 3, 3, 2.0).unwrap();
    for act in [Activation::Tanh, Activation::Relu] {
        let spec = MlpSpec::new(vec![3, 5, 3], act, 1e-3).unwrap();
        let obj = MlpObjective::new(spec.clone(), data.clone()).unwrap();
        for _ in 0..20 {
            let theta: Vector = spec.init(&mut rng);
            let (_, g) = obj.full(&theta).unwrap();
            let fd = finite_diff_grad(|t| obj.loss(t), &theta, DEFAULT_FD_STEP).unwrap();
            assert!(rel_err(&g, &fd) <= 1e-5, "{act:?}: {}", rel_err(&g, &fd));
        }
    }
}

#[test]
fn logistic_matches_central_differences() {
    let mut rng = RngStream::new(22);
    let data = synth_blobs(&mut rng, 60, 4, 2, 2.0).unwrap();
    let obj = LogisticObjective::new(data, 1e-2).unwrap();
    for _ in 0..20 {
        let theta: Vector = rng.gaussian_noise(obj.dim(), 1.0).unwrap();
        let (_, g) = obj.full(&theta).unwrap();
        let fd = finite_diff_grad(|t| obj.loss(t), &theta, DEFAULT_FD_STEP).unwrap();
        assert!(rel_err(&g, &fd) <= 1e-5, "{}", rel_err(&g, &fd));
    }
}
