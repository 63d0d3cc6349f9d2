use num_complex::Complex64;
use ribodelay::linalg::Matrix;
use ribodelay::model::{EquilibriumKind, LinearDDE, ModelParams, SingleProteinParams, ThreeProteinParams};
use ribodelay::spectral::{build_monodromy, classify, SpectralMesh, Stability};

/// Principal branch of Lambert W by Newton iteration on `w e^w = z`.
fn lambert_w0(z: Complex64) -> Complex64 {
    let mut w = Complex64::new(-0.3, 1.3);
    for _ in 0..100 {
        let ew = w.exp();
        let step = (w * ew - z) / (ew * (w + 1.0));
        w -= step;
        if step.norm() < 1e-16 {
            break;
        }
    }
    w
}

fn scalar_delay() -> LinearDDE {
    LinearDDE::new(Matrix::zeros(1, 1), vec![(1.0, Matrix::from_diagonal(&[-1.0]))]).unwrap()
}

fn dominant(params: ModelParams, kind: EquilibriumKind, mesh: SpectralMesh) -> Complex64 {
    let set = params.equilibria().unwrap();
    let sys = params.linearize(set.get(kind).unwrap()).unwrap();
    build_monodromy(&sys, params.max_delay(), &mesh).unwrap().dominant
}

#[test]
fn lambert_w_oracle_converges_spectrally() {
    let w = lambert_w0(Complex64::new(-1.0, 0.0));
    assert!((w - Complex64::new(-0.318_131_5, 1.337_235_7)).norm() < 1e-6);
    let exact = w.re.exp();
    let mut last = f64::INFINITY;
    for order in [8, 16, 24] {
        let mesh = SpectralMesh::new(1, order).unwrap();
        let r = build_monodromy(&scalar_delay(), 1.0, &mesh).unwrap();
        let err = (r.dominant.norm() - exact).abs();
        assert!(err < last || err < 1e-13, "order {order}: {err} not below {last}");
        last = err;
    }
    assert!(last < 1e-8, "{last}");
    assert!((exact - 0.727_507_1).abs() < 1e-7);
}

#[test]
fn trivial_equilibrium_spectrum() {
    let params: ModelParams = SingleProteinParams::new(1.0, 20.0).into();
    let set = params.equilibria().unwrap();
    let sys = params.linearize(set.get(EquilibriumKind::Trivial).unwrap()).unwrap();
    let r = build_monodromy(&sys, 1.0, &SpectralMesh::default()).unwrap();
    assert!(r.trivial_found);
    assert!((r.multipliers[0] - 1.0).norm() < 1e-6);
    let e = (-10.0_f64).exp();
    assert!((r.dominant.norm() - e).abs() < 1e-6, "{}", r.dominant);
    assert!(r.multipliers[2].norm() <= r.dominant.norm());
}

#[test]
fn top_equilibrium_verdicts() {
    let mesh = SpectralMesh::default();
    // (12, 50) lies just above the Hopf line, in the bistable band.
    for (tau, rt) in [(5.0, 50.0), (12.0, 50.0), (2.0, 20.0)] {
        let z = dominant(SingleProteinParams::new(tau, rt).into(), EquilibriumKind::Top, mesh);
        assert!(z.norm() < 1.0 - 1e-4, "({tau},{rt}): {z}");
    }
    let params: ModelParams = SingleProteinParams::new(12.0, 30.0).into();
    let set = params.equilibria().unwrap();
    let sys = params.linearize(set.get(EquilibriumKind::Top).unwrap()).unwrap();
    let r = build_monodromy(&sys, 12.0, &mesh).unwrap();
    let v = classify(&r, 1e-4);
    assert_eq!(v.kind, Stability::Unstable);
    assert!(v.dominant.im.abs() > 1e-6, "{}", v.dominant);
    assert!(r.multipliers.iter().any(|z| (z - v.dominant.conj()).norm() < 1e-10));
}

#[test]
fn middle_equilibrium_is_unstable() {
    for (tau, rt) in [(1.0, 20.0), (10.0, 45.0), (30.0, 50.0)] {
        let z = dominant(SingleProteinParams::new(tau, rt).into(), EquilibriumKind::Middle, SpectralMesh::default());
        assert!(z.norm() > 1.0 + 1e-4, "({tau},{rt}): {z}");
    }
}

#[test]
fn trivial_multiplier_present_at_every_equilibrium() {
    let models: Vec<ModelParams> = vec![
        SingleProteinParams::new(12.0, 50.0).into(),
        SingleProteinParams::new(3.0, 30.0).into(),
        ThreeProteinParams::new(5.7, 100.0).into(),
    ];
    for params in models {
        let set = params.equilibria().unwrap();
        for eq in &set.points {
            let sys = params.linearize(eq).unwrap();
            let r = build_monodromy(&sys, params.max_delay(), &SpectralMesh::default()).unwrap();
            let near = r.multipliers.iter().map(|z| (z - 1.0).norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-6, "{params:?} {:?}: {near}", eq.kind);
        }
    }
}

#[test]
fn mesh_invariance() {
    let params: ModelParams = SingleProteinParams::new(12.0, 50.0).into();
    let a = dominant(params, EquilibriumKind::Top, SpectralMesh::new(2, 12).unwrap());
    let b = dominant(params, EquilibriumKind::Top, SpectralMesh::new(3, 8).unwrap());
    assert!((a.norm() - b.norm()).abs() < 1e-6, "{} vs {}", a.norm(), b.norm());
}

#[test]
fn no_ghost_roots() {
    let params: ModelParams = SingleProteinParams::new(12.0, 50.0).into();
    let set = params.equilibria().unwrap();
    let sys = params.linearize(set.get(EquilibriumKind::Top).unwrap()).unwrap();
    let coarse = build_monodromy(&sys, 12.0, &SpectralMesh::new(2, 20).unwrap()).unwrap();
    let fine = build_monodromy(&sys, 12.0, &SpectralMesh::new(2, 28).unwrap()).unwrap();
    for z in coarse.multipliers.iter().take(5) {
        let best = fine.multipliers.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-6, "{z}: {best}");
    }
}
