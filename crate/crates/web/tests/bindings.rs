use fibertwist_web::{reconstruct, simulate, transform};

#[test]
fn simulate_returns_2n_plus_1_samples() {
    let tr = simulate("z^2", 0.5, std::f64::consts::FRAC_PI_2, 16).unwrap();
    assert_eq!(tr.t().len(), 33);
    assert_eq!(tr.m1().len(), 33);
    assert_eq!(tr.m3()[0], 0.0);
    assert!(tr.m3().iter().any(|v| *v != 0.0));
}

#[test]
fn bad_inputs_are_reported() {
    assert!(simulate("z^2", 1.5, 1.0, 16).unwrap_err().contains("c"));
    assert!(simulate("log(z)", 0.5, 1.0, 16).is_err());
    assert!(simulate("sin(", 0.5, 1.0, 16).is_err());
    assert!(transform(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn reconstruction_recovers_a_smooth_twist() {
    let r = reconstruct("3*z^2*cos(10*z)*log(z+1)", "z", 0.5, std::f64::consts::FRAC_PI_2, 32, 200).unwrap();
    assert!(r.converged());
    assert_eq!(r.z().len(), r.approx().len());
    assert_eq!(r.exact().len(), r.approx().len());
    assert!(r.e2() < 0.05, "E2 = {}", r.e2());
    assert_eq!(r.history().len(), r.iterations());
}

#[test]
fn transform_matches_the_cli() {
    assert_eq!(transform(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.5).unwrap(), vec![0.0, 0.0, 0.5, 0.5]);
}
