//! Acceptance criteria, one pass/fail line each.
//!
//! Runs as a plain binary (no libtest harness) so the report is always
//! printed. Exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specfuse::forward::{clip_boundary, upsample_init};
use specfuse::metrics::{centroid_offset, ssim};
use specfuse::regularizers::{
    build_vector_field, dtv, project_simplex_vec, prox_dtv_nonneg, prox_tv_simplex, tv, DtvParams,
    ProxConfig,
};
use specfuse::solvers::{
    data_fidelity, grad_k, grad_u, run_ipalm, run_ipalm_observed, run_palm, run_palm_observed,
    run_pam, Block, FusionProblem, SolverOutput, SolverParams, StepAudit,
};
use specfuse::synth::{desk_scene, make_problem, KernelKind, SynthSpec, SyntheticProblem};
use specfuse::{ForwardPlan, Image, Kernel, ProblemGeometry, Shape2, VectorField};

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_image(shape: Shape2, rng: &mut ChaCha8Rng) -> Image {
    Image::from_fn(shape, |_, _| rng.random_range(-1.0..1.0))
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// ---------------------------------------------------------------------------
// 1. Adjoint identities

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let geometries = [
        ((10, 8), (5, 3), 2),
        ((6, 6), (3, 3), 3),
        ((5, 7), (7, 5), 1),
        ((4, 4), (1, 1), 1),
        ((8, 5), (9, 3), 4),
        ((3, 9), (5, 5), 2),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for t in 0..200 {
        let ((n1, n2), (r1, r2), s) = geometries[t % geometries.len()];
        let g = ProblemGeometry::from_data(Shape2::new(n1, n2), Shape2::new(r1, r2), s)
            .map_err(|e| e.to_string())?;
        let plan = ForwardPlan::new(g);
        let u = random_image(g.image, &mut rng);
        let k = Kernel::new(random_image(g.kernel, &mut rng)).map_err(|e| e.to_string())?;
        let y = random_image(g.data, &mut rng);

        let lhs = plan.apply(&u, &k).unwrap().dot(&y);
        let rhs = u.dot(&plan.adjoint_image(&y, &k).unwrap());
        worst = worst.max(rel(lhs, rhs));

        let lhs = plan.apply_on_kernel(&k, &u).unwrap().dot(&y);
        let rhs = k.image().dot(plan.adjoint_kernel(&y, &u).unwrap().image());
        worst = worst.max(rel(lhs, rhs));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst <= 1e-10 && secs < 10.0,
        format!("200 triples, 6 geometries, max relative error {worst:.2e}, {secs:.2}s"),
    )
}

// ---------------------------------------------------------------------------
// 2. FFT convolution against a direct cyclic sum

fn direct_cyclic(u: &Image, k: &Kernel) -> Image {
    let (m1, m2) = (u.rows() as i64, u.cols() as i64);
    let (l1, l2) = (k.rows() as i64 / 2, k.cols() as i64 / 2);
    Image::from_fn(u.shape(), |i, j| {
        let mut acc = 0.0;
        for a in 0..k.rows() {
            for b in 0..k.cols() {
                let di = a as i64 - l1;
                let dj = b as i64 - l2;
                let r = (i as i64 - di).rem_euclid(m1) as usize;
                let c = (j as i64 - dj).rem_euclid(m2) as usize;
                acc += k.get(a, b) * u.get(r, c);
            }
        }
        acc
    })
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for m1 in 1..=16 {
        for m2 in 1..=16 {
            for r1 in (1..=7).step_by(2).filter(|&r| r <= m1) {
                for r2 in (1..=7).step_by(2).filter(|&r| r <= m2) {
                    let g = ProblemGeometry::from_image(Shape2::new(m1, m2), Shape2::new(r1, r2), 1)
                        .map_err(|e| e.to_string())?;
                    let plan = ForwardPlan::new(g);
                    let u = random_image(g.image, &mut rng);
                    let k = Kernel::new(random_image(g.kernel, &mut rng)).unwrap();
                    let fast = plan.convolve(&u, &k).unwrap();
                    let slow = direct_cyclic(&u, &k);
                    let scale = slow.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let err = fast.sub(&slow).as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    worst = worst.max(if scale > 0.0 { err / scale } else { err });
                    count += 1;
                }
            }
        }
    }
    ensure(
        worst <= 1e-10,
        format!("{count} instances up to 16x16 / 7x7, max relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Gradients against central differences

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (n, r, s) in [((6, 5), (3, 5), 2), ((4, 4), (5, 5), 3), ((9, 7), (3, 1), 1)] {
        let g = ProblemGeometry::from_data(Shape2::new(n.0, n.1), Shape2::new(r.0, r.1), s).unwrap();
        let plan = ForwardPlan::new(g);
        let u = random_image(g.image, &mut rng);
        let k = Kernel::new(random_image(g.kernel, &mut rng)).unwrap();
        let f = random_image(g.data, &mut rng);
        let gu = grad_u(&u, &k, &f, &plan).unwrap();
        let gk = grad_k(&u, &k, &f, &plan).unwrap();
        let d = |u: &Image, k: &Kernel| data_fidelity(u, k, &f, &plan).unwrap();
        for _ in 0..5 {
            let du = random_image(g.image, &mut rng);
            let fd = (d(&u.add_scaled(h, &du), &k) - d(&u.add_scaled(-h, &du), &k)) / (2.0 * h);
            worst = worst.max(rel(fd, gu.dot(&du)));

            let dk = random_image(g.kernel, &mut rng);
            let kp = Kernel::new(k.image().add_scaled(h, &dk)).unwrap();
            let km = Kernel::new(k.image().add_scaled(-h, &dk)).unwrap();
            let fd = (d(&u, &kp) - d(&u, &km)) / (2.0 * h);
            worst = worst.max(rel(fd, gk.image().dot(&dk)));
        }
    }
    ensure(
        worst <= 1e-5,
        format!("3 instances x 5 directions, max relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 4. dTV sandwich

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = 0;
    for gamma in [0.0, 0.5, 0.9995, 1.0] {
        let params = DtvParams::new(gamma, 0.003).unwrap();
        for _ in 0..100 {
            let shape = Shape2::new(rng.random_range(2..20), rng.random_range(2..20));
            let v = Image::from_fn(shape, |_, _| rng.random_range(0.0..1.0));
            let xi = build_vector_field(&v, &params);
            let scale = 10f64.powf(rng.random_range(-2.0..2.0));
            let u = random_image(shape, &mut rng).scale(scale);
            let (t, d) = (tv(&u), dtv(&u, &xi).unwrap());
            if !((1.0 - gamma * gamma) * t <= d && d <= t + 1e-10) {
                violations += 1;
            }
        }
    }
    ensure(
        violations == 0,
        format!("400 images over gamma in {{0, 0.5, 0.9995, 1}}, {violations} violations"),
    )
}

// ---------------------------------------------------------------------------
// 5. Simplex projection against exhaustive KKT enumeration

fn kkt_projection(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        if support.iter().any(|&i| v[i] - theta < 0.0) {
            continue;
        }
        for &i in &support {
            x[i] = v[i] - theta;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("the full support of a shifted vector is always feasible").1
}

fn criterion_5() -> Outcome {
    let mut worst_err: f64 = 0.0;
    let mut worst_feas: f64 = 0.0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = 1 + (seed % 8) as usize;
        let scale = 10f64.powf(rng.random_range(-1.0..2.0));
        let v: Vec<f64> = (0..len).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let p = project_simplex_vec(&v);
        for (a, b) in p.iter().zip(kkt_projection(&v)) {
            worst_err = worst_err.max((a - b).abs());
        }
        let negative = p.iter().fold(0.0f64, |m, &x| m.max(-x));
        worst_feas = worst_feas.max(negative).max((p.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(
        worst_err <= 1e-10 && worst_feas <= 1e-12,
        format!("1000 vectors of length 1..8, max error {worst_err:.2e}, max infeasibility {worst_feas:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 6. Prox operators against a long primal-dual reference solve

/// Euclidean simplex projection by bisection on the threshold.
fn simplex_by_bisection(x: &mut [f64]) {
    let (mut lo, mut hi) = (
        x.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0,
        x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = x.iter().map(|v| (v - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Accelerated primal-dual solve of
/// `min_x ½‖x - y‖² + w Σ_i ‖P_i ∇x_i‖ + ι_C(x)`, `P_i = I - ξ_i ξ_iᵀ`,
/// written against the plain periodic forward-difference stencil.
fn reference_prox(
    y: &Image,
    w: f64,
    xi: Option<&VectorField>,
    project: impl Fn(&mut [f64]),
    iterations: usize,
) -> Image {
    let (m, n) = (y.rows(), y.cols());
    let len = m * n;
    let field: Vec<[f64; 2]> = (0..len)
        .map(|i| xi.map_or([0.0, 0.0], |f| f.at(i / n, i % n)))
        .collect();
    let directional = |a: f64, b: f64, i: usize| {
        let [p, q] = field[i];
        let inner = p * a + q * b;
        (a - inner * p, b - inner * q)
    };
    let mut x = y.as_slice().to_vec();
    project(&mut x);
    let mut xbar = x.clone();
    let (mut qr, mut qc) = (vec![0.0; len], vec![0.0; len]);
    let mut kt = vec![0.0; len];
    let (mut tau, mut sigma) = (0.3, 0.4);
    for _ in 0..iterations {
        for r in 0..m {
            for c in 0..n {
                let i = r * n + c;
                let gr = xbar[((r + 1) % m) * n + c] - xbar[i];
                let gc = xbar[r * n + (c + 1) % n] - xbar[i];
                let (gr, gc) = directional(gr, gc, i);
                let (a, b) = (qr[i] + sigma * gr, qc[i] + sigma * gc);
                let shrink = (a.hypot(b) / w).max(1.0);
                qr[i] = a / shrink;
                qc[i] = b / shrink;
            }
        }
        let (pr, pc): (Vec<f64>, Vec<f64>) = (0..len).map(|i| directional(qr[i], qc[i], i)).unzip();
        for r in 0..m {
            for c in 0..n {
                let i = r * n + c;
                kt[i] = pr[((r + m - 1) % m) * n + c] - pr[i] + pc[r * n + (c + n - 1) % n] - pc[i];
            }
        }
        let prev = x.clone();
        for i in 0..len {
            x[i] = (x[i] - tau * kt[i] + tau * y.as_slice()[i]) / (1.0 + tau);
        }
        project(&mut x);
        let theta = 1.0 / (1.0 + 2.0 * tau).sqrt();
        tau *= theta;
        sigma /= theta;
        for i in 0..len {
            xbar[i] = x[i] + theta * (x[i] - prev[i]);
        }
    }
    Image::new(y.shape(), x).unwrap()
}

fn criterion_6() -> Outcome {
    const REFERENCE_ITERATIONS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();

    for (rows, cols, weight) in [(4, 4, 0.1), (8, 6, 0.05), (12, 12, 0.2), (16, 16, 0.03), (16, 9, 0.5)] {
        let shape = Shape2::new(rows, cols);
        let side = Image::from_fn(shape, |_, _| rng.random_range(0.0..1.0));
        let xi = build_vector_field(&side, &DtvParams::default());
        let y = Image::from_fn(shape, |_, _| rng.random_range(-0.3..1.2));
        let mut cfg = ProxConfig::new(20_000).with_tolerance(1e-9);
        let x = prox_dtv_nonneg(&y, 1.0, weight, &xi, &mut cfg).unwrap();
        let r = reference_prox(&y, weight, Some(&xi), |v| v.iter_mut().for_each(|t| *t = t.max(0.0)), REFERENCE_ITERATIONS);
        let obj = |z: &Image| 0.5 * z.sub(&y).norm_sq() + weight * dtv(z, &xi).unwrap();
        let gap = (obj(&x) - obj(&r)).abs();
        worst = worst.max(gap);
        lines.push(format!("dtv {rows}x{cols}: {gap:.1e}"));
    }
    for (side, weight) in [(3, 0.01), (5, 0.02), (7, 0.005), (9, 0.05), (15, 0.01)] {
        let shape = Shape2::square(side);
        let y = Image::from_fn(shape, |_, _| rng.random_range(-0.5..1.0) / side as f64);
        let k = Kernel::new(y.clone()).unwrap();
        let mut cfg = ProxConfig::new(20_000).with_tolerance(1e-9);
        let x = prox_tv_simplex(&k, 1.0, weight, &mut cfg).unwrap();
        let r = reference_prox(&y, weight, None, simplex_by_bisection, REFERENCE_ITERATIONS);
        let obj = |z: &Image| 0.5 * z.sub(&y).norm_sq() + weight * tv(z);
        let gap = (obj(x.image()) - obj(&r)).abs();
        worst = worst.max(gap);
        lines.push(format!("tv-simplex {side}x{side}: {gap:.1e}"));
    }
    ensure(
        worst <= 1e-6,
        format!("10 instances, max objective difference {worst:.2e} ({})", lines.join(", ")),
    )
}

// ---------------------------------------------------------------------------
// Desk instances for criteria 7 to 12

const SCENE_SEED: u64 = 7;

fn desk_spec(kernel_side: usize, kernel: KernelKind, shift: (i64, i64)) -> SynthSpec {
    SynthSpec {
        kernel,
        kernel_shape: Shape2::square(kernel_side),
        data_shape: Shape2::square(25),
        sampling: 4,
        noise_variance: 0.001,
        side_info_shift: shift,
        seed: 1,
    }
}

struct Instance {
    synthetic: SyntheticProblem,
    problem: FusionProblem,
}

impl Instance {
    fn new(spec: &SynthSpec) -> Self {
        let g = spec.geometry().unwrap();
        let rgb = desk_scene(g.image, SCENE_SEED);
        let synthetic = make_problem(&rgb, spec).unwrap();
        let problem = FusionProblem::new(
            synthetic.data.clone(),
            &synthetic.side_info,
            spec.kernel_shape,
            spec.sampling,
            &DtvParams::default(),
        )
        .unwrap();
        Self { synthetic, problem }
    }

    fn disk() -> Self {
        let r = Shape2::square(11);
        Self::new(&desk_spec(11, KernelKind::default_disk(r), (0, 0)))
    }

    fn gaussian() -> Self {
        let r = Shape2::square(11);
        Self::new(&desk_spec(11, KernelKind::default_gaussian(r, (2.0, 2.0)), (0, 0)))
    }

    fn shifted() -> Self {
        let r = Shape2::square(21);
        Self::new(&desk_spec(21, KernelKind::default_disk(r), (5, 5)))
    }

    fn ssim_of(&self, u: &Image) -> f64 {
        let g = self.problem.geometry();
        let truth = clip_boundary(&self.synthetic.truth_in_data_units(), g).unwrap();
        ssim(&clip_boundary(u, g).unwrap(), &truth, 1.0).unwrap()
    }

    fn baseline_ssim(&self) -> f64 {
        self.ssim_of(&upsample_init(self.problem.data(), self.problem.geometry()).unwrap())
    }
}

fn params(iterations: usize) -> SolverParams {
    SolverParams {
        lambda_u: 0.1,
        lambda_k: 10.0,
        max_iterations: iterations,
        ..SolverParams::default()
    }
}

/// Post hoc audit of every accepted backtracking step.
#[derive(Default)]
struct Audit {
    steps: usize,
    null_steps: usize,
    descent_failures: usize,
    prox_descent_failures: usize,
    l_min: f64,
    l_max: f64,
}

impl Audit {
    fn new() -> Self {
        Self {
            l_min: f64::INFINITY,
            ..Self::default()
        }
    }

    fn record(&mut self, problem: &FusionProblem, p: &SolverParams, a: &StepAudit<'_>) {
        let f = problem.data();
        let plan = problem.plan();
        let xi = problem.xi();
        let (fidelity, regularizer): (Box<dyn Fn(&Image) -> f64>, Box<dyn Fn(&Image) -> f64>) =
            match a.block {
                Block::Image => {
                    let k = Kernel::new(a.partner.clone()).unwrap();
                    (
                        Box::new(move |x| data_fidelity(x, &k, f, plan).unwrap()),
                        Box::new(move |x| {
                            if x.as_slice().iter().all(|&v| v >= 0.0) {
                                p.lambda_u * dtv(x, xi).unwrap()
                            } else {
                                f64::INFINITY
                            }
                        }),
                    )
                }
                Block::Kernel => {
                    let u = a.partner.clone();
                    (
                        Box::new(move |x| data_fidelity(&u, &Kernel::new(x.clone()).unwrap(), f, plan).unwrap()),
                        Box::new(move |x| {
                            let sum: f64 = x.as_slice().iter().sum();
                            if x.as_slice().iter().all(|&v| v >= 0.0) && (sum - 1.0).abs() <= 1e-9 {
                                p.lambda_k * tv(x)
                            } else {
                                f64::INFINITY
                            }
                        }),
                    )
                }
            };
        let step = a.accepted.sub(a.extrapolated);
        // D(x⁺) ≤ D(x_α) + ⟨∇D(x_α), x⁺ - x_α⟩ + L/2 ‖x⁺ - x_α‖²
        let descent = fidelity(a.accepted)
            <= fidelity(a.extrapolated) + a.gradient.dot(&step) + 0.5 * a.lipschitz * step.norm_sq();
        // R(x⁺) ≤ R(x) + ⟨∇D(x_α), x - x⁺⟩ + (‖x - x_α‖² - ‖x⁺ - x_α‖²) / (2τ)
        let back = a.current.sub(a.accepted);
        let prox_descent = regularizer(a.accepted)
            <= regularizer(a.current)
                + a.gradient.dot(&back)
                + (a.current.sub(a.extrapolated).norm_sq() - step.norm_sq()) / (2.0 * a.tau);
        self.steps += 1;
        self.null_steps += a.null_step as usize;
        self.descent_failures += !descent as usize;
        self.prox_descent_failures += !prox_descent as usize;
        self.l_min = self.l_min.min(a.lipschitz);
        self.l_max = self.l_max.max(a.lipschitz);
    }

    fn merge(&mut self, other: &Audit) {
        self.steps += other.steps;
        self.null_steps += other.null_steps;
        self.descent_failures += other.descent_failures;
        self.prox_descent_failures += other.prox_descent_failures;
        self.l_min = self.l_min.min(other.l_min);
        self.l_max = self.l_max.max(other.l_max);
    }
}

struct AuditedRun {
    output: SolverOutput,
    audit: Audit,
}

fn audited(instance: &Instance, p: &SolverParams, inertia: Option<f64>) -> AuditedRun {
    let init = instance.problem.default_init().unwrap();
    let mut audit = Audit::new();
    let problem = &instance.problem;
    let output = {
        let mut observer = |a: &StepAudit<'_>| audit.record(problem, p, a);
        match inertia {
            None => run_palm_observed(problem, p, &init, &mut observer),
            Some(alpha) => {
                let p = SolverParams { alpha, ..*p };
                run_ipalm_observed(problem, &p, &init, &mut observer)
            }
        }
        .unwrap()
    };
    AuditedRun { output, audit }
}

/// Largest `Ψ_{t+1} - Ψ_t - slack(Ψ_t)` over the trace.
fn worst_increase(objectives: &[f64], slack: impl Fn(f64) -> f64) -> f64 {
    objectives
        .windows(2)
        .map(|w| w[1] - w[0] - slack(w[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

struct Runs {
    palm: AuditedRun,
    ipalm_02: AuditedRun,
    ipalm_05: AuditedRun,
    pam: SolverOutput,
    shifted: AuditedRun,
}

fn solve_runs() -> Runs {
    let disk = Instance::disk();
    let p = params(1000);
    let palm = audited(&disk, &p, None);
    let ipalm_02 = audited(&disk, &p, Some(0.2));
    let ipalm_05 = audited(&disk, &p, Some(0.5));
    let pam = run_pam(&disk.problem, &p, &disk.problem.default_init().unwrap()).unwrap();
    // The shift experiment only needs the kernel's position; a lighter kernel
    // weight keeps the 21x21 estimate from flattening out.
    let shifted_instance = Instance::shifted();
    let shifted = audited(&shifted_instance, &SolverParams { lambda_k: 1.0, ..p }, None);
    Runs {
        palm,
        ipalm_02,
        ipalm_05,
        pam,
        shifted,
    }
}

// ---------------------------------------------------------------------------
// 7. Monotone descent

fn criterion_7(runs: &Runs) -> Outcome {
    let palm = &runs.palm.output.trace;
    let pam = &runs.pam.trace;
    let palm_500 = &palm.objectives()[..=500];
    let pam_500 = &pam.objectives()[..=500];
    let palm_excess = worst_increase(palm_500, |_| 1e-9);
    let pam_excess = worst_increase(pam_500, |psi| 1e-6 * psi.abs());
    let palm_secs = palm.records[500].seconds;
    let pam_secs = pam.records[500].seconds;
    ensure(
        palm_excess <= 0.0 && pam_excess <= 0.0 && palm_secs < 120.0 && pam_secs < 120.0,
        format!(
            "PALM Ψ {:.4} -> {:.4} in {palm_secs:.1}s (max excess over slack {palm_excess:.2e}); \
             PAM Ψ {:.4} -> {:.4} in {pam_secs:.1}s (max excess {pam_excess:.2e})",
            palm_500[0], palm_500[500], pam_500[0], pam_500[500]
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Algorithm agreement

fn criterion_8(runs: &Runs) -> Outcome {
    let finals = [
        ("PALM", runs.palm.output.trace.final_objective().unwrap()),
        ("iPALM(0.2)", runs.ipalm_02.output.trace.final_objective().unwrap()),
        ("iPALM(0.5)", runs.ipalm_05.output.trace.final_objective().unwrap()),
        ("PAM", runs.pam.trace.final_objective().unwrap()),
    ];
    let lo = finals.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let hi = finals.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    let listed: Vec<String> = finals.iter().map(|(n, v)| format!("{n} {v:.4}")).collect();
    ensure(
        spread <= 0.02,
        format!("final Ψ after 1000 iterations: {}; spread {:.2}%", listed.join(", "), 100.0 * spread),
    )
}

// ---------------------------------------------------------------------------
// 9. Shift recovery

fn criterion_9(runs: &Runs) -> Outcome {
    let (dr, dc) = centroid_offset(runs.shifted.output.k()).unwrap();
    ensure(
        (dr - 5.0).abs() <= 1.0 && (dc - 5.0).abs() <= 1.0,
        format!("side information shifted by (5, 5); kernel centroid offset ({dr:.3}, {dc:.3})"),
    )
}

// ---------------------------------------------------------------------------
// 10. Reconstruction quality and the λ_u ordering

fn criterion_10() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, instance) in [("disk", Instance::disk()), ("gaussian", Instance::gaussian())] {
        let base = instance.baseline_ssim();
        let init = instance.problem.default_init().unwrap();
        let sweep: Vec<f64> = [0.01, 0.1, 1.0]
            .iter()
            .map(|&lambda_u| {
                let p = SolverParams { lambda_u, ..params(500) };
                instance.ssim_of(run_palm(&instance.problem, &p, &init).unwrap().u())
            })
            .collect();
        let gain = sweep[1] - base;
        let middle_best = sweep[1] > sweep[0] && sweep[1] > sweep[2];
        ok &= gain >= 0.05 && middle_best;
        lines.push(format!(
            "{name}: baseline {base:.3}, PALM {:.3} (gain {gain:+.3}); λ_u sweep 0.01/0.1/1 -> {:.3}/{:.3}/{:.3}",
            sweep[1], sweep[0], sweep[1], sweep[2]
        ));
    }
    ensure(ok, lines.join("; "))
}

// ---------------------------------------------------------------------------
// 11. iPALM with α = 0 is PALM

fn criterion_11() -> Outcome {
    let disk = Instance::disk();
    let init = disk.problem.default_init().unwrap();
    let p = params(100);
    let a = run_palm(&disk.problem, &p, &init).unwrap();
    let b = run_ipalm(&disk.problem, &SolverParams { alpha: 0.0, ..p }, &init).unwrap();
    let bits = |x: &Image| x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let same_iterates = bits(a.u()) == bits(b.u()) && bits(a.k().image()) == bits(b.k().image());
    let same_trace = a
        .trace
        .objectives()
        .iter()
        .zip(b.trace.objectives())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(
        same_iterates && same_trace,
        format!("100 iterations: iterates identical {same_iterates}, objective trace identical {same_trace}"),
    )
}

// ---------------------------------------------------------------------------
// 12. Backtracking soundness

fn criterion_12(runs: &Runs) -> Outcome {
    let mut total = Audit::new();
    for run in [&runs.palm, &runs.ipalm_02, &runs.ipalm_05, &runs.shifted] {
        total.merge(&run.audit);
        for r in &run.output.trace.records {
            total.l_min = total.l_min.min(r.l_u).min(r.l_k);
            total.l_max = total.l_max.max(r.l_u).max(r.l_k);
        }
    }
    let in_range = total.l_min >= 1.0 && total.l_max <= 1e30;
    ensure(
        total.descent_failures == 0 && total.prox_descent_failures == 0 && in_range,
        format!(
            "{} accepted steps ({} null), descent failures {}, prox-descent failures {}, L in [{:.3e}, {:.3e}]",
            total.steps,
            total.null_steps,
            total.descent_failures,
            total.prox_descent_failures,
            total.l_min,
            total.l_max
        ),
    )
}

// ---------------------------------------------------------------------------

fn run_criterion(id: usize, name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check))
        .unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
    let secs = start.elapsed().as_secs_f64();
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id:>2} {status} [{name}] {detail} ({secs:.1}s)");
    outcome.is_ok()
}

fn main() {
    // `cargo test -- <filter>` passes arguments; this target ignores them
    // except for `--list`, which must print nothing runnable.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += ok as usize;
    };
    tally(run_criterion(1, "adjoint identities", criterion_1));
    tally(run_criterion(2, "convolution oracle", criterion_2));
    tally(run_criterion(3, "gradient checks", criterion_3));
    tally(run_criterion(4, "dTV sandwich", criterion_4));
    tally(run_criterion(5, "simplex projection", criterion_5));
    tally(run_criterion(6, "prox oracle", criterion_6));

    let start = Instant::now();
    let runs = catch_unwind(solve_runs);
    println!("solver runs for criteria 7-9 and 12 took {:.1}s", start.elapsed().as_secs_f64());
    match &runs {
        Ok(runs) => {
            tally(run_criterion(7, "monotone descent", || criterion_7(runs)));
            tally(run_criterion(8, "algorithm agreement", || criterion_8(runs)));
            tally(run_criterion(9, "shift recovery", || criterion_9(runs)));
        }
        Err(_) => {
            for (id, name) in [(7, "monotone descent"), (8, "algorithm agreement"), (9, "shift recovery")] {
                tally(run_criterion(id, name, || Err("solver runs panicked".into())));
            }
        }
    }
    tally(run_criterion(10, "reconstruction quality", criterion_10));
    tally(run_criterion(11, "iPALM alpha = 0", criterion_11));
    match &runs {
        Ok(runs) => tally(run_criterion(12, "backtracking soundness", || criterion_12(runs))),
        Err(_) => tally(run_criterion(12, "backtracking soundness", || Err("solver runs panicked".into()))),
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}
