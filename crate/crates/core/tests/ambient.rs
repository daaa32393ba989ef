mod common;

use cmc_lab::ambient::{AmbientPoint, AmbientSpace, AmbientVector, SpaceDescriptor, SpaceKind};
use common::*;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = SpaceKind> {
    (0..SpaceKind::ALL.len()).prop_map(|i| SpaceKind::ALL[i])
}

fn oracle_ricci(space: &AmbientSpace, s: f64) -> f64 {
    if space.kind() == SpaceKind::SpaceForm {
        return 2.0 * space.c();
    }
    let t2 = space.tau().powi(2);
    space.kappa() - 2.0 * t2 + s * s * (4.0 * t2 - space.kappa())
}

fn oracle_sectional(space: &AmbientSpace, s: f64) -> f64 {
    if space.kind() == SpaceKind::SpaceForm {
        return space.c();
    }
    let t2 = space.tau().powi(2);
    t2 + s * s * (space.kappa() - 4.0 * t2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_matches_model(kind in kind(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, kind);
        let p = random_point(&mut r, &space);
        let g = space.metric_at(&p).unwrap();
        let o = oracle_metric(&space, &p);
        prop_assert!((g - o).norm() < 1e-12 * (1.0 + o.norm()));
    }

    #[test]
    fn chart_curvature_matches_model(kind in kind(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, kind);
        let p = random_point(&mut r, &space);
        let v: Vec<AmbientVector> = (0..4).map(|_| unit(&space, &random_vector(&mut r, p))).collect();
        let chart = space.curvature_4tensor(&v[0], &v[1], &v[2], &v[3]).unwrap();
        let g = oracle_metric(&space, &p);
        let want = oracle_curvature(&space, &g, [&v[0].components, &v[1].components, &v[2].components, &v[3].components]);
        prop_assert!(rel(chart, want) < 1e-8, "{chart} vs {want}");
        let model = space.model_curvature_4tensor(&v[0], &v[1], &v[2], &v[3]).unwrap();
        prop_assert!(rel(model, want) < 1e-12);
    }

    #[test]
    fn ricci_and_sectional_match_model(kind in kind(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, kind);
        let p = random_point(&mut r, &space);
        let x = unit(&space, &random_vector(&mut r, p));
        let s = if space.has_killing_field() { space.killing_component(&x).unwrap() } else { 0.0 };
        let ric = oracle_ricci(&space, s);
        prop_assert!(rel(space.ricci_from_curvature(&x).unwrap(), ric) < 1e-8);
        prop_assert!(rel(space.ricci_quadratic(&x).unwrap(), ric) < 1e-12);
        let k = oracle_sectional(&space, s);
        prop_assert!(rel(space.sectional_from_curvature(&x).unwrap(), k) < 1e-8);
        prop_assert!(rel(space.sectional(&x).unwrap(), k) < 1e-12);
        prop_assert!(k >= space.sectional_lower_bound() - 1e-12);
        prop_assert!(k <= space.sectional_upper_bound() + 1e-12);
        prop_assert!(ric >= space.ricci_lower_bound() - 1e-12);
    }

    #[test]
    fn killing_field_is_unit_and_twisted(kind in kind(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, kind);
        prop_assume!(space.has_killing_field());
        let p = random_point(&mut r, &space);
        let xi = space.killing_at(&p).unwrap();
        prop_assert!((space.norm(&xi).unwrap() - 1.0).abs() < 1e-12);
        let x = random_vector(&mut r, p);
        let y = random_vector(&mut r, p);
        let dx = space.killing_derivative(&x).unwrap();
        let dy = space.killing_derivative(&y).unwrap();
        // Killing equation.
        let sym = space.inner(&dx, &y).unwrap() + space.inner(&dy, &x).unwrap();
        prop_assert!(sym.abs() < 1e-10);
        // ⟨∇̄_X ξ, Y⟩ = τ vol(X, ξ, Y).
        let g = oracle_metric(&space, &p);
        let vol = Matrix3::from_columns(&[x.components, xi.components, y.components]).determinant() * g.determinant().sqrt();
        let lhs = space.inner(&dx, &y).unwrap();
        prop_assert!((lhs - space.tau() * vol).abs() < 1e-8 * (1.0 + vol.abs()), "{lhs} vs {}", space.tau() * vol);
        let w = space.vector_product(&x, &xi).unwrap().scaled(space.tau());
        prop_assert!((w.components - dx.components).norm() < 1e-8 * (1.0 + dx.components.norm()));
    }

    #[test]
    fn christoffel_matches_finite_differences(kind in kind(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, kind);
        let p = random_point(&mut r, &space);
        let h = 1e-5;
        let dg: Vec<Matrix3<f64>> = (0..3)
            .map(|k| {
                let mut a = p;
                let mut b = p;
                a.coords[k] += h;
                b.coords[k] -= h;
                (oracle_metric(&space, &a) - oracle_metric(&space, &b)) / (2.0 * h)
            })
            .collect();
        let g_inv = oracle_metric(&space, &p).try_inverse().unwrap();
        let gamma = space.christoffel_at(&p).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let want: f64 = (0..3)
                        .map(|d| 0.5 * g_inv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]))
                        .sum();
                    prop_assert!((gamma.0[a][b][c] - want).abs() < 1e-6 * (1.0 + want.abs()));
                }
            }
        }
    }

    #[test]
    fn descriptor_round_trips(kind in kind(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, kind);
        let text = toml::to_string(&space.descriptor()).unwrap();
        let back: AmbientSpace = toml::from_str(&text).unwrap();
        prop_assert_eq!(back, space);
    }
}

#[test]
fn second_chart_agrees_on_overlap() {
    let space = AmbientSpace::product_s2s1(1.0, 5.0).unwrap();
    let p = AmbientPoint::new(0, [0.7, -1.1, 0.3]);
    let q = space.to_chart(&p, 1).unwrap();
    let back = space.to_chart(&q, 0).unwrap();
    assert!((back.coords - p.coords).norm() < 1e-12);
    assert!((space.sectional(&unit(&space, &AmbientVector::new(q, Vector3::new(0.0, 0.0, 1.0)))).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn rejects_bad_descriptors() {
    for text in [
        "kind = \"BergerSphere\"\nkappa = -4.0\ntau = 1.0\n",
        "kind = \"ProductH2R\"\nkappa = 1.0\n",
        "kind = \"SpaceForm\"\nc = 1.0\ntau = 0.5\n",
        "kind = \"Heisenberg\"\ntau = 0.0\n",
        "kind = \"SpaceForm\"\nc = 1.0\nextra = 2\n",
    ] {
        assert!(toml::from_str::<AmbientSpace>(text).is_err(), "{text}");
    }
    let d: SpaceDescriptor = toml::from_str("kind = \"ProductS2S1\"\nkappa = 1.0\n").unwrap();
    let s = AmbientSpace::new(d).unwrap();
    assert_eq!(s.circle_length(), Some(std::f64::consts::TAU));
}

#[test]
fn chart_guard() {
    let h2 = AmbientSpace::product_h2r(-1.0).unwrap();
    assert!(h2.check_point(&AmbientPoint::new(0, [2.0, 0.0, 0.0])).is_err());
    assert!(h2.check_point(&AmbientPoint::new(0, [1.9, 0.0, 0.0])).is_ok());
    assert!(h2.check_point(&AmbientPoint::new(1, [0.0, 0.0, 0.0])).is_err());
    let nil = AmbientSpace::heisenberg(0.5).unwrap();
    assert!(nil.killing_at(&AmbientPoint::new(0, [f64::NAN, 0.0, 0.0])).is_err());
    assert!(AmbientSpace::space_form(1.0).unwrap().killing_at(&AmbientPoint::origin()).is_err());
}
