use nalgebra::DMatrix;
use proptest::prelude::*;
use qobserver::measurement::{
    born, catalytic_premeasure, collapse, dilation_unitary, hadamard_basis, premeasure, sample_counts,
    ObserverRegister,
};
use qobserver::{Basis, CMatrix, Complex64, Error, StateVector, SystemLayout};

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn layout(spec: &[(&str, usize)]) -> SystemLayout {
    SystemLayout::new(spec.iter().copied()).unwrap()
}

fn z(sub: &str) -> Basis {
    Basis::computational("z", sub, &["up", "down"]).unwrap()
}

fn records(sub: &str, labels: &[&str]) -> ObserverRegister {
    ObserverRegister::standard(Basis::computational(format!("rec_{sub}"), sub, labels).unwrap(), labels.len()).unwrap()
}

/// `Σ_k |b_k⟩⟨b_k| ⊗ S_k` with `S_k` swapping computational states 0 and k.
fn controlled_swap_oracle(basis: &Basis, observer_dim: usize) -> CMatrix {
    let d = basis.dim();
    let mut v = CMatrix::zeros(d * observer_dim, d * observer_dim);
    for (k, bv) in basis.vectors().iter().enumerate() {
        let b = DMatrix::from_column_slice(d, 1, bv.components());
        let projector = &b * b.adjoint();
        let mut swap = CMatrix::identity(observer_dim, observer_dim);
        if k != 0 {
            swap[(0, 0)] = c(0.0, 0.0);
            swap[(k, k)] = c(0.0, 0.0);
            swap[(0, k)] = c(1.0, 0.0);
            swap[(k, 0)] = c(1.0, 0.0);
        }
        v += projector.kronecker(&swap);
    }
    v
}

fn amplitude() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c(re, im))
}

fn random_state(dims: Vec<usize>) -> impl Strategy<Value = StateVector> {
    let total: usize = dims.iter().product();
    prop::collection::vec(amplitude(), total)
        .prop_filter("nonzero", |v| v.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(move |v| {
            let l = SystemLayout::new(dims.iter().enumerate().map(|(i, d)| (format!("s{i}"), *d))).unwrap();
            StateVector::new(l, v).unwrap()
        })
}

#[test]
fn spin_right_is_entangled_with_agent() {
    let l = layout(&[("S", 2), ("A", 2), ("B", 2)]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let right = vec![c(h, 0.0), c(h, 0.0)];
    let zero = vec![c(1.0, 0.0), c(0.0, 0.0)];
    let psi = StateVector::product(l, &[right, zero.clone(), zero]).unwrap();
    let out = premeasure(&psi, "S", &z("S"), &records("A", &["U", "D"])).unwrap();
    let amps = out.amplitudes();
    // index = 4 s + 2 a + b
    assert!((amps[0] - c(h, 0.0)).norm() < TOL);
    assert!((amps[6] - c(h, 0.0)).norm() < TOL);
    assert!(amps.iter().enumerate().all(|(i, a)| i == 0 || i == 6 || a.norm() < TOL));
}

#[test]
fn up_spin_is_recorded_as_up() {
    let l = layout(&[("S", 2), ("A", 2)]);
    let psi = StateVector::basis_state(l.clone(), &[0, 0]).unwrap();
    let out = premeasure(&psi, "S", &z("S"), &records("A", &["U", "D"])).unwrap();
    assert_eq!(out, StateVector::basis_state(l, &[0, 0]).unwrap());
}

#[test]
fn dilation_matches_controlled_swap_oracle() {
    let b3 = Basis::computational("t", "S", &["a", "b", "c"]).unwrap();
    let obs = records("A", &["r0", "r1", "r2", "r3"]);
    let obs = ObserverRegister::new(obs.basis().clone(), "r0", vec!["r0", "r1", "r2"]).unwrap();
    let v = dilation_unitary(&b3, &obs).unwrap();
    let oracle = controlled_swap_oracle(&b3, 4);
    assert!((v - oracle).iter().all(|d| d.norm() < TOL));

    let x = hadamard_basis("x", "S", "r", "l").unwrap();
    let v = dilation_unitary(&x, &records("A", &["R", "L"])).unwrap();
    assert!((v - controlled_swap_oracle(&x, 2)).iter().all(|d| d.norm() < TOL));
}

#[test]
fn agent_in_cat_state_answers_yes() {
    let l = layout(&[("A", 2), ("B", 2)]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = StateVector::product(l, &[vec![c(h, 0.0), c(h, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
    let cat = hadamard_basis("cat", "A", "plus", "minus").unwrap();
    let yes_no = Basis::computational("rec_B", "B", &["Y", "N"]).unwrap();
    let out = catalytic_premeasure(&psi, "A", &cat, &ObserverRegister::standard(yes_no.clone(), 2).unwrap()).unwrap();
    assert!((born(&out, "B", &yes_no).unwrap().get("Y").unwrap() - 1.0).abs() < TOL);

    let u = StateVector::basis_state(psi.layout().clone(), &[0, 0]).unwrap();
    let out = catalytic_premeasure(&u, "A", &cat, &ObserverRegister::standard(yes_no.clone(), 2).unwrap()).unwrap();
    let d = born(&out, "B", &yes_no).unwrap();
    assert!((d.get("Y").unwrap() - 0.5).abs() < TOL);
    assert!((d.get("N").unwrap() - 0.5).abs() < TOL);
}

#[test]
fn busy_observer_is_rejected() {
    let l = layout(&[("S", 2), ("A", 2)]);
    let psi = StateVector::basis_state(l, &[0, 1]).unwrap();
    let err = premeasure(&psi, "S", &z("S"), &records("A", &["U", "D"])).unwrap_err();
    assert!(matches!(err, Error::ObserverNotReady { .. }));
}

#[test]
fn too_few_records_is_a_mismatch() {
    let l = layout(&[("S", 2), ("A", 2)]);
    let psi = StateVector::basis_state(l, &[0, 0]).unwrap();
    let obs = ObserverRegister::new(Basis::computational("r", "A", &["U", "D"]).unwrap(), "U", vec!["U"]).unwrap();
    assert!(premeasure(&psi, "S", &z("S"), &obs).is_err());
}

#[test]
fn eigenstate_collapses_to_itself_for_any_seed() {
    let l = layout(&[("S", 2)]);
    let psi = StateVector::basis_state(l, &[1]).unwrap();
    for seed in 0..20 {
        let (label, post) = collapse(&psi, "S", &z("S"), seed).unwrap();
        assert_eq!(label, "down");
        assert_eq!(post, psi);
    }
}

#[test]
fn seeded_sampling_is_reproducible_and_fair() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = StateVector::new(layout(&[("S", 2)]), vec![c(h, 0.0), c(h, 0.0)]).unwrap();
    let a = sample_counts(&psi, "S", &z("S"), 42, 100_000).unwrap();
    assert_eq!(a, sample_counts(&psi, "S", &z("S"), 42, 100_000).unwrap());
    let up = a[0].1 as f64 / 1e5;
    let sigma = (0.25f64 / 1e5).sqrt();
    assert!((up - 0.5).abs() < 3.0 * sigma, "{up}");

    let seq = |seed: u64| (0..50u64).map(|k| collapse(&psi, "S", &z("S"), seed + k).unwrap().0).collect::<Vec<_>>();
    assert_eq!(seq(42), seq(42));
}

#[test]
fn collapse_frequencies_pass_chi_square() {
    // three outcomes with unequal weights on a qutrit entangled with a qubit
    let l = layout(&[("T", 3), ("Q", 2)]);
    let amps = vec![c(0.5, 0.0), c(0.1, 0.2), c(0.0, 0.3), c(0.4, 0.0), c(0.2, -0.2), c(0.6, 0.0)];
    let psi = StateVector::new(l, amps).unwrap();
    let basis = Basis::computational("t", "T", &["a", "b", "c"]).unwrap();
    let probs = born(&psi, "T", &basis).unwrap();
    let shots = 100_000usize;
    let mut counts = [0usize; 3];
    let mut stream = qobserver::rng::rng_from_seed(7);
    for _ in 0..shots {
        let (label, _) = qobserver::measurement::collapse_with(&psi, "T", &basis, &mut stream).unwrap();
        counts[basis.index_of(&label).unwrap()] += 1;
    }
    let chi2: f64 = probs
        .entries()
        .iter()
        .zip(counts)
        .map(|((_, p), n)| {
            let e = p * shots as f64;
            (n as f64 - e).powi(2) / e
        })
        .sum();
    // chi-square critical value, 2 degrees of freedom, significance 0.001
    assert!(chi2 < 13.816, "chi2 = {chi2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn born_matches_direct_summation(psi in random_state(vec![3, 2, 2])) {
        let basis = Basis::computational("b", "s1", &["0", "1"]).unwrap();
        let dist = born(&psi, "s1", &basis).unwrap();
        let mut direct = [0.0; 2];
        for (i, a) in psi.amplitudes().iter().enumerate() {
            direct[(i / 2) % 2] += a.norm_sqr();
        }
        for (k, (_, p)) in dist.entries().iter().enumerate() {
            prop_assert!((p - direct[k]).abs() < TOL);
        }
        let total: f64 = dist.entries().iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn premeasure_matches_dense_oracle(alpha in amplitude(), beta in amplitude()) {
        prop_assume!(alpha.norm_sqr() + beta.norm_sqr() > 1e-3);
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let (alpha, beta) = (alpha / n, beta / n);
        let l = layout(&[("S", 2), ("A", 2)]);
        let psi = StateVector::new(l, vec![alpha, c(0.0, 0.0), beta, c(0.0, 0.0)]).unwrap();
        let out = premeasure(&psi, "S", &z("S"), &records("A", &["U", "D"])).unwrap();
        let oracle = controlled_swap_oracle(&z("S"), 2) * nalgebra::DVector::from_column_slice(psi.amplitudes());
        for (a, b) in out.amplitudes().iter().zip(oracle.iter()) {
            prop_assert!((a - b).norm() < TOL);
        }
        prop_assert!((out.amplitudes()[0] - alpha).norm() < TOL);
        prop_assert!((out.amplitudes()[3] - beta).norm() < TOL);
    }

    #[test]
    fn repeated_measurement_records_agree(psi in random_state(vec![3])) {
        let l = layout(&[("s0", 3), ("O1", 3), ("O2", 3)]);
        let mut amps = vec![c(0.0, 0.0); 27];
        for (k, a) in psi.amplitudes().iter().enumerate() {
            amps[9 * k] = *a;
        }
        let start = StateVector::new(l, amps).unwrap();
        let basis = Basis::new(
            "f",
            "s0",
            vec![
                ("a", vec![c(0.6, 0.0), c(0.8, 0.0), c(0.0, 0.0)]),
                ("b", vec![c(0.0, 0.8), c(0.0, -0.6), c(0.0, 0.0)]),
                ("c", vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
            ],
        )
        .unwrap();
        let o1 = records("O1", &["0", "1", "2"]);
        let o2 = records("O2", &["0", "1", "2"]);
        let once = premeasure(&start, "s0", &basis, &o1).unwrap();
        let twice = premeasure(&once, "s0", &basis, &o2).unwrap();
        let mut disagree = 0.0;
        for (i, a) in twice.amplitudes().iter().enumerate() {
            if (i / 3) % 3 != i % 3 {
                disagree += a.norm_sqr();
            }
        }
        prop_assert!(disagree < TOL);
    }
}
