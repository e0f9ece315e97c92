//! Independent checks of the problem assumptions, shared by the property and
//! acceptance targets. Everything here is recomputed from first principles
//! rather than through the library's own constants where possible.

#![allow(dead_code)]

use sgmlab::geometry::Domain;
use sgmlab::problems::{GradientNoise, NoiseModel, Problem};
use sgmlab::rng::RandomStream;

pub struct Check {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Smallest observed slack (negative means a failure beyond tolerance).
    pub worst_slack: f64,
}

impl Check {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst_slack: f64::INFINITY,
        }
    }

    fn record(&mut self, slack: f64, tolerance: f64) {
        self.trials += 1;
        self.worst_slack = self.worst_slack.min(slack);
        if slack < -tolerance || slack.is_nan() {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {}/{} failures, worst slack {:.3e}",
            self.name, self.failures, self.trials, self.worst_slack
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Test problems covering every objective and both domain kinds.
pub fn problems() -> Vec<(&'static str, Problem)> {
    let gauss = NoiseModel::gaussian(1.0).unwrap();
    let mut rng = RandomStream::from_seed(404);
    let theta_true = [0.3, -0.2, 0.1];
    let mut design = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
        targets.push(dot(&x, &theta_true) + 0.1 * rng.standard_normal());
        design.push(x);
    }
    vec![
        (
            "quadratic/ball",
            Problem::quadratic(
                vec![1.0, 2.0],
                vec![0.5, -0.3],
                Domain::ball(vec![0.0, 0.0], 2.0).unwrap(),
                gauss,
            )
            .unwrap(),
        ),
        (
            "quadratic/box",
            Problem::quadratic(
                vec![0.5, 3.0, 1.5],
                vec![0.1, 0.2, -0.4],
                Domain::boxed(vec![-1.0, -1.0, -2.0], vec![1.0, 2.0, 1.0]).unwrap(),
                gauss,
            )
            .unwrap(),
        ),
        (
            "quadratic+l1/ball",
            Problem::quad_plus_l1(
                vec![1.0, 4.0],
                vec![-0.2, 0.4],
                0.7,
                Domain::ball(vec![0.1, 0.0], 1.5).unwrap(),
                gauss,
            )
            .unwrap(),
        ),
        (
            "least-squares/ball",
            Problem::least_squares(
                design,
                targets,
                Domain::ball(vec![0.0; 3], 2.0).unwrap(),
                GradientNoise::Minibatch { batch_size: 4 },
            )
            .unwrap(),
        ),
    ]
}

/// `f(θᵢ) ≥ f(θⱼ) + sⱼᵀ(θᵢ − θⱼ) + (m/2)‖θᵢ − θⱼ‖²` at random pairs (absolute tolerance 1e−9).
pub fn strong_convexity(name: &str, p: &Problem, pairs: usize, rng: &mut RandomStream) -> Check {
    let m = p.constants().strong_convexity;
    let mut c = Check::new(format!("{name} strong convexity"));
    for _ in 0..pairs {
        let a = p.domain().sample_uniform(rng);
        let b = p.domain().sample_uniform(rng);
        let sb = p.subgradient(&b).unwrap();
        let d = sub(&a, &b);
        let slack = p.value(&a).unwrap() - p.value(&b).unwrap() - dot(&sb, &d) - 0.5 * m * norm_sq(&d);
        c.record(slack, 1e-9);
    }
    c
}

/// `sᵀ(θ − θ*) ≥ (m/2)‖θ − θ*‖²` at random points.
pub fn optimality_gap(name: &str, p: &Problem, points: usize, rng: &mut RandomStream) -> Check {
    let m = p.constants().strong_convexity;
    let star = p.theta_star().to_vec();
    let mut c = Check::new(format!("{name} optimality gap"));
    for _ in 0..points {
        let t = p.domain().sample_uniform(rng);
        let s = p.subgradient(&t).unwrap();
        let d = sub(&t, &star);
        c.record(dot(&s, &d) - 0.5 * m * norm_sq(&d), 1e-9);
    }
    c
}

/// `‖s(θ)‖ ≤ √M` at random points and at the points of the domain farthest from `θ*`.
pub fn subgradient_bound(name: &str, p: &Problem, points: usize, rng: &mut RandomStream) -> Check {
    let root_m = p.constants().grad_bound_sq.sqrt();
    let mut c = Check::new(format!("{name} subgradient bound"));
    for _ in 0..points {
        let t = p.domain().sample_uniform(rng);
        let s = p.subgradient(&t).unwrap();
        c.record(root_m - norm_sq(&s).sqrt(), 1e-9 * root_m.max(1.0));
    }
    c
}

/// Per-coordinate mean within `4σ_k/√n` of zero and `E‖n‖²` within 1% of `σ²`.
pub fn noise_moments(model: &NoiseModel, dim: usize, draws: usize, rng: &mut RandomStream) -> (bool, String) {
    let sigma2 = model.variance();
    let mut sum = vec![0.0; dim];
    let mut second = 0.0;
    let mut buf = vec![0.0; dim];
    for _ in 0..draws {
        buf.iter_mut().for_each(|b| *b = 0.0);
        model.add_sample(rng, &mut buf);
        for (s, b) in sum.iter_mut().zip(&buf) {
            *s += b;
        }
        second += norm_sq(&buf);
    }
    let n = draws as f64;
    let band = 4.0 * (sigma2 / dim as f64).sqrt() / n.sqrt();
    let worst_mean = sum.iter().map(|s| (s / n).abs()).fold(0.0, f64::max);
    let rel = (second / n - sigma2).abs() / sigma2;
    let ok = worst_mean <= band && rel <= 0.01;
    (
        ok,
        format!("max |mean| {worst_mean:.2e} (band {band:.2e}), E‖n‖² rel. error {rel:.2e}"),
    )
}

/// `‖P(x) − P(y)‖ ≤ ‖x − y‖ + 1e−12` for random points inside and outside the domain.
pub fn nonexpansive(name: &str, d: &Domain, pairs: usize, rng: &mut RandomStream) -> Check {
    let mut c = Check::new(format!("{name} projection nonexpansive"));
    let dim = d.dim();
    let scale = 3.0 * d.diameter();
    for _ in 0..pairs {
        let x: Vec<f64> = (0..dim).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect();
        let px = d.project(&x).unwrap();
        let py = d.project(&y).unwrap();
        c.record(norm_sq(&sub(&x, &y)).sqrt() - norm_sq(&sub(&px, &py)).sqrt(), 1e-12);
    }
    c
}

/// Every assumption check over every test problem.
pub fn assumption_suite(pairs: usize, noise_draws: usize) -> Vec<(bool, String)> {
    let mut rng = RandomStream::from_seed(9_001);
    let mut out = Vec::new();
    for (name, p) in problems() {
        for c in [
            strong_convexity(name, &p, pairs, &mut rng),
            optimality_gap(name, &p, pairs, &mut rng),
            subgradient_bound(name, &p, pairs, &mut rng),
            nonexpansive(name, p.domain(), pairs, &mut rng),
        ] {
            out.push((c.passed(), c.to_string()));
        }
    }
    for (label, model) in [
        ("gaussian", NoiseModel::gaussian(1.0).unwrap()),
        ("rademacher", NoiseModel::bounded_rademacher(4.0).unwrap()),
    ] {
        for dim in [1, 3] {
            let (ok, detail) = noise_moments(&model, dim, noise_draws, &mut rng);
            out.push((ok, format!("{label} noise d={dim}: {detail}")));
        }
    }
    out
}
