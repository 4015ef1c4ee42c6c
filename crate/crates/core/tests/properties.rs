use dlae_core::linalg::{minres, sym_eig, Matrix, MinresFlag, SeededRng};
use dlae_core::model::{generate_dataset, hvp, Architecture, Dataset, NetworkParams, SpectrumRule};
use proptest::prelude::*;

fn instance(widths: Vec<usize>, seed: u64) -> (Dataset, NetworkParams, NetworkParams, NetworkParams) {
    let arch = Architecture::new(widths).unwrap();
    let d = arch.dim();
    let data = generate_dataset(d, 4 * d, &SpectrumRule::PowersOfTwo, seed).unwrap();
    let mut rng = SeededRng::new(seed ^ 0xabcd);
    let p = NetworkParams::random(&arch, 1.0, &mut rng);
    let u = NetworkParams::random(&arch, 1.0, &mut rng);
    let v = NetworkParams::random(&arch, 1.0, &mut rng);
    (data, p, u, v)
}

fn widths() -> impl Strategy<Value = Vec<usize>> {
    (2usize..6, prop::collection::vec(1usize..6, 1..4)).prop_map(|(d, hidden)| {
        let mut w = vec![d];
        w.extend(hidden);
        w.push(d);
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hvp_is_symmetric(w in widths(), seed in any::<u64>()) {
        let (data, p, u, v) = instance(w, seed);
        let hu = hvp(&p, &u, &data).unwrap();
        let hv = hvp(&p, &v, &data).unwrap();
        let (a, b) = (u.dot(&hv), v.dot(&hu));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    }

    #[test]
    fn hvp_is_linear(w in widths(), seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let (data, p, u, v) = instance(w, seed);
        let lhs = hvp(&p, &u.axpy(alpha, &v), &data).unwrap();
        let rhs = hvp(&p, &u, &data).unwrap().axpy(alpha, &hvp(&p, &v, &data).unwrap());
        let diff = lhs.axpy(-1.0, &rhs).norm();
        prop_assert!(diff <= 1e-10 * (1.0 + rhs.norm()), "diff {diff}");
    }

    #[test]
    fn params_json_round_trip_is_exact(w in widths(), seed in any::<u64>()) {
        let (_, p, _, _) = instance(w, seed);
        let back = NetworkParams::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(back.flatten(), p.flatten());
    }

    #[test]
    fn matrix_json_round_trip_is_exact(
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..30),
    ) {
        let m = Matrix::from_vec(1, vals.len(), vals.clone()).unwrap();
        let back = Matrix::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back.as_slice(), &vals[..]);
    }

    #[test]
    fn minres_matches_the_eigen_solution_on_spd_systems(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let b_mat = Matrix::from_fn(n, n, |_, _| rng.normal());
        let a = b_mat.t_matmul(&b_mat).add(&Matrix::identity(n));
        let rhs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let out = minres(|x| a.matvec(x), &rhs, 1e-13, 10 * n);
        prop_assert_eq!(out.flag, MinresFlag::Converged);

        let eig = sym_eig(&a).unwrap();
        let mut want = vec![0.0; n];
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            let q = eig.eigenvectors.column(k);
            let c: f64 = q.iter().zip(&rhs).map(|(x, y)| x * y).sum::<f64>() / lam;
            for i in 0..n {
                want[i] += c * q[i];
            }
        }
        let err: f64 = out.solution.iter().zip(&want).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = want.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * scale.max(1e-300), "err {err} scale {scale}");
    }
}
