#![allow(dead_code)]

use cmc_lab::ambient::{AmbientPoint, AmbientSpace, AmbientVector, SpaceKind};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

pub fn random_space(rng: &mut ChaCha8Rng, kind: SpaceKind) -> AmbientSpace {
    match kind {
        SpaceKind::SpaceForm => AmbientSpace::space_form(rng.gen_range(-2.0..2.0)),
        SpaceKind::ProductS2R => AmbientSpace::product_s2r(rng.gen_range(0.2..3.0)),
        SpaceKind::ProductS2S1 => AmbientSpace::product_s2s1(rng.gen_range(0.2..3.0), rng.gen_range(1.0..10.0)),
        SpaceKind::ProductH2R => AmbientSpace::product_h2r(-rng.gen_range(0.2..3.0)),
        SpaceKind::BergerSphere => {
            let k: f64 = rng.gen_range(0.5..4.0);
            let f = if rng.gen_bool(0.5) { rng.gen_range(0.1..0.9) } else { rng.gen_range(1.1..2.0) };
            let tau = f * k.sqrt() / 2.0;
            AmbientSpace::berger(k, if rng.gen_bool(0.5) { tau } else { -tau })
        }
        SpaceKind::Heisenberg => AmbientSpace::heisenberg(signed(rng, 0.1, 1.5)),
        SpaceKind::Sl2Universal => AmbientSpace::sl2(-rng.gen_range(0.2..3.0), signed(rng, 0.1, 1.5)),
    }
    .unwrap()
}

/// A point well inside the chart.
pub fn random_point(rng: &mut ChaCha8Rng, space: &AmbientSpace) -> AmbientPoint {
    let k = if space.kind() == SpaceKind::SpaceForm { space.c() } else { space.kappa() };
    let r = if k < 0.0 { 1.4 / (-k).sqrt() } else { 1.5 };
    let chart = rng.gen_range(0..space.chart_count());
    loop {
        let x = rng.gen_range(-r..r);
        let y = rng.gen_range(-r..r);
        let z = if space.kind() == SpaceKind::SpaceForm { rng.gen_range(-r..r) } else { rng.gen_range(-1.0..1.0) };
        let p = AmbientPoint::new(chart, [x, y, z]);
        if space.check_point(&p).is_ok() && Vector3::new(x, y, if space.kind() == SpaceKind::SpaceForm { z } else { 0.0 }).norm() < r {
            return p;
        }
    }
}

pub fn random_vector(rng: &mut ChaCha8Rng, base: AmbientPoint) -> AmbientVector {
    AmbientVector::new(base, Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
}

pub fn unit(space: &AmbientSpace, v: &AmbientVector) -> AmbientVector {
    v.scaled(1.0 / space.norm(v).unwrap())
}

/// `λ²(dx² + dy²) + (dt + τλ(y dx − x dy))²` and the conformal space-form metric.
pub fn oracle_metric(space: &AmbientSpace, p: &AmbientPoint) -> Matrix3<f64> {
    let [x, y, t] = [p.coords.x, p.coords.y, p.coords.z];
    if space.kind() == SpaceKind::SpaceForm {
        let l = 1.0 / (1.0 + space.c() * (x * x + y * y + t * t) / 4.0);
        return Matrix3::identity() * (l * l);
    }
    let l = 1.0 / (1.0 + space.kappa() * (x * x + y * y) / 4.0);
    let theta = Vector3::new(space.tau() * l * y, -space.tau() * l * x, 1.0);
    let mut g = theta * theta.transpose();
    g[(0, 0)] += l * l;
    g[(1, 1)] += l * l;
    g
}

/// Curvature tensor of `E(κ,τ)` written in terms of `ξ`, or `c` times the
/// Kulkarni–Nomizu form in a space form.
pub fn oracle_curvature(space: &AmbientSpace, g: &Matrix3<f64>, v: [&Vector3<f64>; 4]) -> f64 {
    let ip = |a: &Vector3<f64>, b: &Vector3<f64>| a.dot(&(g * b));
    let [x, y, z, w] = v;
    let form = ip(y, z) * ip(x, w) - ip(x, z) * ip(y, w);
    if space.kind() == SpaceKind::SpaceForm {
        return space.c() * form;
    }
    let xi = Vector3::new(0.0, 0.0, 1.0);
    let (k, t2) = (space.kappa(), space.tau().powi(2));
    let a = ip(x, &xi) * ip(z, &xi) * ip(y, w) - ip(y, &xi) * ip(z, &xi) * ip(x, w) + ip(x, z) * ip(y, &xi) * ip(w, &xi)
        - ip(y, z) * ip(w, &xi) * ip(x, &xi);
    (k - 3.0 * t2) * form + (k - 4.0 * t2) * a
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
