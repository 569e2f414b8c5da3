//! The experiment suites behind each subcommand.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use vekua_core::bergman::{
    bergman_project, exterior_points, gram_schmidt, held_out_point, kernel_component, kernel_matrix,
    module_defect, module_reproduce, monogenic_basis, normalized_gram_min_eigenvalue, projection_error,
    BasisSource, OrthonormalBasis, MODULE_DEFECT_TOL,
};
use vekua_core::biquat::ZeroDivisorClass;
use vekua_core::decomposition::{
    bessel_example, curved_w, df_factorization_check, linear_w, orthogonality_check, schrodinger_factorization_check,
    standard_bumps, BiquatJetFn, SchrodingerData,
};
use vekua_core::geom::{self, Point};
use vekua_core::grid::{apply_d, l2_inner, sphere_mesh};
use vekua_core::integral::{
    borel_pompeiu_residual, cauchy_kernel, helmholtz_fd_residual, probe_points, quadrature_defect,
    right_inverse_residual, s_g_a_inverse_many, t_g_alpha, theodorescu_norm, vekua_residual, AlphaParam,
    CoefficientTuple, Sign,
};
use vekua_core::jets::ScalarJet;
use vekua_core::{rng, BiquatField, Biquaternion, Complex, DomainGrid, DomainSpec};

use crate::config::{FPreset, RunConfig};
use crate::error::CliError;
use crate::report::Report;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BergmanOp {
    Build,
    Reproduce,
    Project,
    KernelMatrix,
}

impl BergmanOp {
    pub fn name(self) -> &'static str {
        match self {
            BergmanOp::Build => "build",
            BergmanOp::Reproduce => "reproduce",
            BergmanOp::Project => "project",
            BergmanOp::KernelMatrix => "kernel-matrix",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example {
    Schrodinger,
    Df,
    Helmholtz,
    Bessel,
    TAlpha,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::Schrodinger => "schrodinger",
            Example::Df => "df",
            Example::Helmholtz => "helmholtz",
            Example::Bessel => "bessel",
            Example::TAlpha => "t-alpha",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    AlgebraCheck,
    OperatorConvergence,
    Bergman { op: BergmanOp, basis: Option<std::path::PathBuf> },
    Decompose,
    Examples(Example),
}

/// A report plus any extra artifacts, by file name.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn report(report: Report) -> Self {
        Outcome {
            report,
            artifacts: Vec::new(),
        }
    }

    /// Writes the report and artifacts into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        for (name, bytes) in &self.artifacts {
            crate::report::write_atomic(dir, name, bytes)?;
        }
        self.report.write(dir)?;
        Ok(())
    }
}

pub fn run(cfg: &RunConfig, command: &Command) -> Result<Outcome> {
    match command {
        Command::AlgebraCheck => Ok(Outcome::report(cmd_algebra_check(cfg))),
        Command::OperatorConvergence => cmd_operator_convergence(cfg),
        Command::Bergman { op, basis } => cmd_bergman(cfg, *op, basis.as_deref()),
        Command::Decompose => cmd_decompose(cfg).map(Outcome::report),
        Command::Examples(which) => cmd_examples(cfg, *which).map(Outcome::report),
    }
}

/// Number of random samples in the algebra suite.
pub const ALGEBRA_SAMPLES: usize = 10_000;

/// Max defects of the algebra identities over `count` seeded triples.
pub fn algebra_defects(seed: u64, count: usize) -> BTreeMap<String, f64> {
    let mut r = rng::seeded(seed);
    let mut d: BTreeMap<String, f64> = BTreeMap::new();
    let mut bump = |name: &str, v: f64| {
        let e = d.entry(name.to_string()).or_insert(0.0);
        *e = e.max(v);
    };
    let sqrt2 = std::f64::consts::SQRT_2;
    for _ in 0..count {
        let p = rng::biquaternion(&mut r);
        let q = rng::biquaternion(&mut r);
        let s = rng::biquaternion(&mut r);
        let pq = p * q;
        bump("bar_antihomomorphism", (pq.bar() - q.bar() * p.bar()).norm());
        bump("dagger_antihomomorphism", (pq.dagger() - q.dagger() * p.dagger()).norm());
        bump("sc_cyclicity", (pq.sc() - (q * p).sc()).norm());
        bump("associativity", ((pq * s) - p * (q * s)).norm());
        let units: Biquaternion = (1..4).map(|k| Biquaternion::unit(k) * p * Biquaternion::unit(k)).sum();
        bump("unit_sum", (units - (p - Biquaternion::scalar(p.sc() * 4.0))).norm());
        bump("norm_inequality", (pq.norm() - sqrt2 * p.norm() * q.norm()).max(0.0));
        bump("norm_form_multiplicative", (pq.norm_form() - p.norm_form() * q.norm_form()).norm());
        bump("inner_hermitian", (p.inner(&q) - q.inner(&p).conj()).norm());
        let ok = match p.inverse() {
            Some(inv) => (p * inv - Biquaternion::ONE).norm() * p.norm().min(1.0),
            None => 0.0,
        };
        bump("inverse", ok);
    }
    let w = Biquaternion::new(Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    let ratio = (w * w).norm() / (w.norm() * w.norm());
    d.insert("witness_ratio_gap".into(), (ratio - sqrt2).abs());
    d.insert(
        "witness_is_zero_divisor".into(),
        if w.classify_zero_divisor(1e-12) == ZeroDivisorClass::ZeroDivisor { 0.0 } else { 1.0 },
    );
    d
}

pub fn cmd_algebra_check(cfg: &RunConfig) -> Report {
    let mut rep = Report::new("algebra-check", cfg);
    let d = algebra_defects(cfg.seed, ALGEBRA_SAMPLES);
    rep.result("samples", ALGEBRA_SAMPLES);
    for (name, v) in &d {
        let tol = if name.starts_with("witness") { cfg.tol("witness") } else { cfg.tol("algebra") };
        rep.at_most(name, *v, tol);
    }
    rep.result("defects", &d);
    rep
}

/// Smooth field supported in the ball of radius `0.6 * inradius` about the
/// domain center.
pub fn smooth_bump(grid: &Arc<DomainGrid>) -> BiquatField {
    let c0 = grid.spec().center();
    let rho = 0.6 * grid.spec().boundary_distance(c0);
    BiquatField::sample(grid, |x| {
        let y = geom::scale(geom::sub(x, c0), 1.0 / rho);
        let s2 = geom::dot(y, y);
        let b = if s2 < 1.0 { (1.0 - s2).powi(3) } else { 0.0 };
        let c = Complex::new;
        Biquaternion::new(c(b, 0.5 * b * y[0]), c(b * y[1], 0.0), c(0.0, b), c(b * y[2], -b))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub check: String,
    pub n: usize,
    pub h: f64,
    pub residual: f64,
    pub observed_order: Option<f64>,
}

pub fn rows_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("check,n,h,residual,observed_order\n");
    for r in rows {
        let order = r.observed_order.map(|o| format!("{o:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{},{:.6e},{:.6e},{}\n", r.check, r.n, r.h, r.residual, order));
    }
    out
}

/// Refinement levels of the convergence study.
pub const CONVERGENCE_LEVELS: [usize; 3] = [16, 24, 32];
/// Surface points for the Borel-Pompeiu boundary term.
pub const BP_MESH_POINTS: usize = 10_000;
pub const BP_PROBES: usize = 20;

fn with_orders(check: &str, data: &[(usize, f64, f64)]) -> Vec<ConvergenceRow> {
    data.iter()
        .enumerate()
        .map(|(i, &(n, h, r))| ConvergenceRow {
            check: check.to_string(),
            n,
            h,
            residual: r,
            observed_order: (i > 0).then(|| (data[i - 1].2 / r).ln() / (data[i - 1].1 / h).ln()),
        })
        .collect()
}

pub type NamedField = (&'static str, fn(Point) -> Biquaternion);

/// `u = 1` and `u = x1 e0 + x2 e3`.
pub fn borel_pompeiu_fields() -> [NamedField; 2] {
    fn one(_: Point) -> Biquaternion {
        Biquaternion::ONE
    }
    fn linear(x: Point) -> Biquaternion {
        Biquaternion::from_real([x[0], 0.0, 0.0, x[1]])
    }
    [("one", one), ("x1e0+x2e3", linear)]
}

pub fn cmd_operator_convergence(cfg: &RunConfig) -> Result<Outcome> {
    let mut rep = Report::new("operator-convergence", cfg);
    let mut ri = Vec::new();
    let mut bp: BTreeMap<&str, Vec<(usize, f64, f64)>> = BTreeMap::new();
    let is_ball = matches!(cfg.domain, DomainSpec::Ball { .. });
    for n in CONVERGENCE_LEVELS {
        let grid = cfg.grid_at(n)?;
        let h = grid.h_max();
        ri.push((n, h, right_inverse_residual(&smooth_bump(&grid))?));
        if is_ball {
            let mesh = sphere_mesh(grid.spec(), BP_MESH_POINTS)?;
            let probes = probe_points(&grid, BP_PROBES, 0.5, cfg.seed);
            for (name, u) in borel_pompeiu_fields() {
                let r = borel_pompeiu_residual(&grid, &mesh, u, &probes)?;
                bp.entry(name).or_default().push((n, h, r.residual));
            }
        }
    }
    let mut rows = with_orders("right_inverse", &ri);
    let (first, last) = (ri[0], ri[ri.len() - 1]);
    let order = (first.2 / last.2).ln() / (first.1 / last.1).ln();
    rep.at_most("right_inverse_finest", last.2, cfg.tol("right_inverse"));
    rep.at_least("right_inverse_order", order, cfg.tol("observed_order"));
    for (name, data) in &bp {
        rows.extend(with_orders(&format!("borel_pompeiu[{name}]"), data));
        rep.at_most(&format!("borel_pompeiu_finest[{name}]"), data[data.len() - 1].2, cfg.tol("borel_pompeiu"));
    }
    let grid = cfg.grid()?;
    let est = theodorescu_norm(&grid, 30, cfg.seed);
    let bound = std::f64::consts::SQRT_2 * cfg.domain.diameter();
    rep.result("theodorescu_norm", json!({"n": cfg.n, "estimate": est, "bound": bound}));
    rep.at_most("theodorescu_norm", est, bound * cfg.tol("norm_bound_slack"));
    rep.result("rows", &rows);
    Ok(Outcome {
        report: rep,
        artifacts: vec![("operator-convergence.csv".into(), rows_to_csv(&rows).into_bytes())],
    })
}

/// Vekua basis with the diagnostics gathered while building it.
pub struct BasisBuild {
    pub basis: OrthonormalBasis,
    pub raw: Vec<BiquatField>,
    pub gram_min_eig: f64,
    pub vekua_max: f64,
    pub tol_v: f64,
    pub neumann_max_ratio: f64,
    pub neumann_iterations: usize,
}

/// Residuals below this are rounding noise and are left out of ratios.
const RATIO_FLOOR: f64 = 1e-11;

/// Transports the monogenic fields with poles at `m` exterior points into
/// the Vekua space of `a` and orthonormalizes them.
pub fn build_basis(cfg: &RunConfig, grid: &Arc<DomainGrid>, a: &CoefficientTuple, m: usize) -> Result<BasisBuild> {
    let points = exterior_points(grid.spec(), m, cfg.scale)?;
    let mono = monogenic_basis(grid, &points)?;
    let (raw, max_ratio, iterations) = if a.is_zero() {
        (mono, 0.0, 0)
    } else {
        let refs: Vec<&BiquatField> = mono.iter().collect();
        let sols = s_g_a_inverse_many(a, &refs, cfg.tol("neumann"), 500)?;
        let mut worst = 0.0f64;
        let mut iters = 0;
        for s in &sols {
            iters = iters.max(s.iterations);
            for (k, r) in s.ratios().iter().enumerate() {
                if s.residuals[k + 1] > RATIO_FLOOR {
                    worst = worst.max(*r);
                }
            }
        }
        (sols.into_iter().map(|s| s.w).collect::<Vec<_>>(), worst, iters)
    };
    let gram_min_eig = normalized_gram_min_eigenvalue(&raw)?;
    let mut vekua_max = 0.0f64;
    for w in &raw {
        vekua_max = vekua_max.max(vekua_residual(a, w)?);
    }
    let tol_v = 10.0 * (grid.h_max() + quadrature_defect(grid));
    let basis = gram_schmidt(&raw)?.with_source(BasisSource {
        exterior_points: points,
        scale: cfg.scale,
        coefficients: serde_json::to_value(&cfg.coefficients).expect("preset serializes"),
    });
    Ok(BasisBuild {
        basis,
        raw,
        gram_min_eig,
        vekua_max,
        tol_v,
        neumann_max_ratio: max_ratio,
        neumann_iterations: iterations,
    })
}

fn random_combination(basis: &OrthonormalBasis, seed: u64) -> Result<BiquatField> {
    let mut r = rng::seeded(seed);
    let mut w = BiquatField::zeros(basis.grid());
    for phi in basis.members() {
        let c = Complex::new(rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, -1.0, 1.0));
        w.axpy(c, phi)?;
    }
    Ok(w)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproductionDefects {
    pub probes: usize,
    /// `max |<K_x^k, w> - w_k(x)| / max |w|`.
    pub reproduce: f64,
    pub hermitian: f64,
    /// Smallest real diagonal entry of `K(x, x)`.
    pub min_diagonal: f64,
    /// Largest imaginary part of a diagonal entry of `K(x, x)`.
    pub diagonal_imag: f64,
    /// Right-module reproduction defect, when `A` is of module type.
    pub module_reproduce: Option<f64>,
}

/// Reproducing-kernel checks at 10 seeded interior probes.
pub fn reproduction_defects(basis: &OrthonormalBasis, a: &CoefficientTuple, seed: u64) -> Result<ReproductionDefects> {
    let grid = basis.grid().clone();
    let probes = probe_points(&grid, 10, 0.5, seed);
    let w = random_combination(basis, seed)?;
    let wmax = w.sup_norm();
    let mut reproduce = 0.0f64;
    let mut hermitian = 0.0f64;
    let mut min_diag = f64::INFINITY;
    let mut diag_im = 0.0f64;
    for &x in &probes {
        let cell = grid.locate(x).expect("probe is a cell center");
        for k in 0..4 {
            let kx = kernel_component(basis, x, k)?;
            let v = l2_inner(&kx, &w)?;
            reproduce = reproduce.max((v - w.values()[cell].c[k]).norm() / wmax);
        }
        for &t in &probes {
            let kxt = kernel_matrix(basis, x, t)?;
            let ktx = kernel_matrix(basis, t, x)?;
            hermitian = hermitian.max(kxt.hermitian_defect(&ktx));
        }
        let kxx = kernel_matrix(basis, x, x)?;
        for k in 0..4 {
            min_diag = min_diag.min(kxx.entries[k][k].re);
            diag_im = diag_im.max(kxx.entries[k][k].im.abs());
        }
    }
    let module = if module_defect(a, grid.len()) <= MODULE_DEFECT_TOL {
        let mut r = rng::seeded(seed ^ 0x5eed);
        let mut wm = BiquatField::zeros(&grid);
        for phi in basis.members() {
            wm = wm.add(&phi.right_mul(rng::biquaternion(&mut r)))?;
        }
        let mut worst = 0.0f64;
        for &x in &probes {
            let cell = grid.locate(x).expect("probe is a cell center");
            worst = worst.max((module_reproduce(basis, a, x, &wm)? - wm.values()[cell]).norm() / wm.sup_norm());
        }
        Some(worst)
    } else {
        None
    };
    Ok(ReproductionDefects {
        probes: probes.len(),
        reproduce,
        hermitian,
        min_diagonal: min_diag,
        diagonal_imag: diag_im,
        module_reproduce: module,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionDefects {
    pub idempotence: f64,
    pub self_adjointness: f64,
    /// `|<P u, u - P u>| / |u|^2`.
    pub split: f64,
}

pub fn projection_defects(basis: &OrthonormalBasis, seed: u64) -> Result<ProjectionDefects> {
    let grid = basis.grid();
    let mut r = rng::seeded(seed);
    let u = rng::field(grid, &mut r);
    let v = rng::field(grid, &mut r);
    let pu = bergman_project(basis, &u)?;
    let ppu = bergman_project(basis, &pu)?;
    let pv = bergman_project(basis, &v)?;
    let nu = u.l2_norm();
    let lhs = l2_inner(&pu, &v)?;
    let rhs = l2_inner(&u, &pv)?;
    let rest = u.sub(&pu)?;
    Ok(ProjectionDefects {
        idempotence: ppu.sub(&pu)?.l2_norm() / nu,
        self_adjointness: (lhs - rhs).norm() / (nu * v.l2_norm()),
        split: l2_inner(&pu, &rest)?.norm() / (nu * nu),
    })
}

/// Projection error of the element generated by the held-out pole, for
/// bases built from each count in `ms`.
pub fn held_out_errors(cfg: &RunConfig, grid: &Arc<DomainGrid>, a: &CoefficientTuple, ms: &[usize]) -> Result<Vec<f64>> {
    let q = held_out_point(grid.spec(), cfg.scale);
    let e = BiquatField::sample(grid, |x| cauchy_kernel(geom::sub(x, q)).expect("pole is exterior"));
    let target = if a.is_zero() {
        e
    } else {
        s_g_a_inverse_many(a, &[&e], cfg.tol("neumann"), 500)?.pop().expect("one solution").w
    };
    ms.iter()
        .map(|&m| {
            let b = build_basis(cfg, grid, a, m)?;
            Ok(projection_error(&b.basis, &target)?)
        })
        .collect()
}

/// `true` when each entry is at most `1 + jitter` times its predecessor and
/// the last is below the first.
pub fn decreasing_within(values: &[f64], jitter: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + jitter)) && values.last() < values.first()
}

pub const HELD_OUT_COUNTS: [usize; 3] = [8, 16, 32];

pub fn cmd_bergman(cfg: &RunConfig, op: BergmanOp, basis_path: Option<&Path>) -> Result<Outcome> {
    let mut rep = Report::new(&format!("bergman-{}", op.name()), cfg);
    let grid = cfg.grid()?;
    let a = cfg.coefficients.tuple(&grid)?;
    rep.result("kappa", a.kappa(grid.spec()));
    let mut artifacts = Vec::new();
    let basis = match (op, basis_path) {
        (BergmanOp::Build, _) | (_, None) => {
            let b = build_basis(cfg, &grid, &a, cfg.basis_m)?;
            if op == BergmanOp::Build {
                rep.result("members", b.raw.len());
                rep.result("orthonormal_members", b.basis.len());
                rep.result("dropped", b.basis.dropped());
                rep.result("neumann_iterations", b.neumann_iterations);
                rep.at_least("gram_min_eigenvalue", b.gram_min_eig, cfg.tol("gram_min_eig"));
                rep.at_most("vekua_residual", b.vekua_max, b.tol_v);
                rep.at_most("gram_residual", b.basis.gram_residual(), cfg.tol("gram"));
                if !a.is_zero() {
                    rep.at_most("neumann_max_ratio", b.neumann_max_ratio, cfg.tol("neumann_ratio"));
                }
                artifacts.push(("basis.vkb".to_string(), b.basis.to_bytes(&cfg.tolerances)?));
            }
            b.basis
        }
        (_, Some(path)) => {
            let bytes = std::fs::read(path)?;
            let (basis, _) = OrthonormalBasis::from_bytes(&bytes)?;
            if basis.grid().spec() != grid.spec() || basis.grid().n() != grid.n() {
                return Err(CliError::Config("basis container grid differs from the configured grid".into()));
            }
            basis
        }
    };
    match op {
        BergmanOp::Build => {}
        BergmanOp::Reproduce => {
            let d = reproduction_defects(&basis, &a, cfg.seed)?;
            rep.at_most("reproduce", d.reproduce, cfg.tol("reproduce"));
            if let Some(m) = d.module_reproduce {
                rep.at_most("module_reproduce", m, cfg.tol("reproduce"));
            }
            rep.result("defects", &d);
            let q = held_out_point(grid.spec(), cfg.scale);
            let e = BiquatField::sample(&grid, |x| cauchy_kernel(geom::sub(x, q)).expect("pole is exterior"));
            let target = if a.is_zero() {
                e
            } else {
                s_g_a_inverse_many(&a, &[&e], cfg.tol("neumann"), 500)?.pop().expect("one solution").w
            };
            rep.result("held_out_point", q);
            rep.result("held_out_error", projection_error(&basis, &target)?);
        }
        BergmanOp::Project => {
            let d = projection_defects(&basis, cfg.seed)?;
            rep.at_most("idempotence", d.idempotence, cfg.tol("projection"));
            rep.at_most("self_adjointness", d.self_adjointness, cfg.tol("projection"));
            rep.result("defects", &d);
            let errs = held_out_errors(cfg, &grid, &a, &HELD_OUT_COUNTS)?;
            rep.result("held_out", json!({"m": HELD_OUT_COUNTS, "error": errs}));
            let ok = decreasing_within(&errs, cfg.tol("held_out_jitter"));
            rep.at_least("held_out_decreasing", if ok { 1.0 } else { 0.0 }, 1.0);
        }
        BergmanOp::KernelMatrix => {
            let probes = probe_points(&grid, 10, 0.5, cfg.seed);
            let mut table = Vec::new();
            let mut worst = 0.0f64;
            let mut min_diag = f64::INFINITY;
            for (i, &x) in probes.iter().enumerate() {
                let t = probes[(i + 1) % probes.len()];
                let d = kernel_matrix(&basis, x, t)?.hermitian_defect(&kernel_matrix(&basis, t, x)?);
                let kxx = kernel_matrix(&basis, x, x)?;
                let diag = (0..4).map(|k| kxx.entries[k][k].re).fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
                min_diag = min_diag.min(diag);
                table.push(json!({"x": x, "t": t, "hermitian_defect": d, "min_diagonal": diag}));
            }
            rep.result("pairs", table);
            rep.at_most("hermitian", worst, cfg.tol("hermitian"));
            rep.at_least("min_diagonal_positive", if min_diag > 0.0 { 1.0 } else { 0.0 }, 1.0);
        }
    }
    Ok(Outcome { report: rep, artifacts })
}

/// Max normalized pairing over the standard bumps.
pub fn orthogonality_battery(a: &CoefficientTuple, basis: &OrthonormalBasis, count: usize) -> Result<Vec<f64>> {
    let bumps = standard_bumps(basis.grid(), count)?;
    bumps
        .iter()
        .map(|u| Ok(orthogonality_check(a, basis, u)?))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionCase {
    pub n: usize,
    pub members: usize,
    pub orthogonality: Vec<f64>,
    pub split: f64,
}

impl DecompositionCase {
    pub fn worst(&self) -> f64 {
        self.orthogonality.iter().cloned().fold(0.0, f64::max)
    }
}

/// Orthogonality battery and projection split for one `A` on one grid,
/// with a basis from `m` exterior points.
pub fn decomposition_case(cfg: &RunConfig, grid: &Arc<DomainGrid>, a: &CoefficientTuple, m: usize) -> Result<DecompositionCase> {
    let b = build_basis(cfg, grid, a, m)?;
    Ok(DecompositionCase {
        n: grid.n(),
        members: b.basis.len(),
        orthogonality: orthogonality_battery(a, &b.basis, 5)?,
        split: projection_defects(&b.basis, cfg.seed)?.split,
    })
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<Report> {
    let mut rep = Report::new("decompose", cfg);
    let grid = cfg.grid()?;
    let a = cfg.coefficients.tuple(&grid)?;
    let mut cases = vec![("hodge", CoefficientTuple::zero())];
    if !a.is_zero() {
        cases.push(("configured", a));
    }
    for (name, a) in &cases {
        let c = decomposition_case(cfg, &grid, a, cfg.basis_m)?;
        rep.at_most(&format!("orthogonality[{name}]"), c.worst(), cfg.tol("orthogonality"));
        rep.at_most(&format!("split[{name}]"), c.split, cfg.tol("split"));
        rep.result(name, &c);
    }
    Ok(rep)
}

fn scalar_u() -> BiquatJetFn {
    Arc::new(|x: Point| (ScalarJet::coord(x, 1).sin() * ScalarJet::coord(x, 2)).times(Biquaternion::ONE))
}

/// The `[name, alpha]` pairs exercising each `T_G^alpha` branch.
pub fn alpha_cases() -> Vec<(&'static str, Biquaternion)> {
    let c = Complex::new;
    let z = c(0.0, 0.0);
    vec![
        ("scalar", Biquaternion::new(c(1.0, 0.0), z, z, z)),
        ("nonzero_vec_square", Biquaternion::new(z, c(1.0, 0.0), c(0.5, 0.0), z)),
        ("null_vec_square", Biquaternion::new(c(0.5, 0.0), c(1.0, 0.0), c(0.0, 1.0), z)),
        ("divisor_nonzero_sc", Biquaternion::new(c(0.0, 1.0), c(1.0, 0.0), z, z)),
        ("divisor_zero_sc", Biquaternion::new(z, c(1.0, 0.0), c(0.0, 1.0), z)),
    ]
}

/// Interior error of `T_G^alpha (D + M^alpha) w - w` for the smooth bump.
pub fn t_alpha_reconstruction(grid: &Arc<DomainGrid>, alpha: Biquaternion) -> Result<f64> {
    let ap = AlphaParam::new(alpha)?;
    let w = smooth_bump(grid);
    let dw = apply_d(&w).add(&w.right_mul(alpha))?;
    let back = t_g_alpha(&ap, &dw)?;
    let interior = grid.interior_cells(2.0 * grid.h_max());
    Ok(back.sub(&w)?.sup_norm_on(&interior) / w.sup_norm())
}

/// Seeded points with `|x|` uniform in `[0.5, 1]`.
pub fn helmholtz_points(seed: u64, count: usize) -> Vec<Point> {
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| loop {
            let p = rng::point_in_ball(&mut r, [0.0; 3], 1.0);
            let n = geom::norm(p);
            if n > 1e-3 {
                let radius = rng::uniform(&mut r, 0.5, 1.0);
                break geom::scale(p, radius / n);
            }
        })
        .collect()
}

pub const HELMHOLTZ_ALPHAS: [(f64, f64); 3] = [(2.0, 0.0), (0.0, 1.0), (1.0, 1.0)];

pub fn cmd_examples(cfg: &RunConfig, which: Example) -> Result<Report> {
    let mut rep = Report::new(&format!("examples-{}", which.name()), cfg);
    match which {
        Example::Schrodinger => {
            let grid = cfg.grid()?;
            let ws: [(&str, BiquatJetFn); 2] = [("linear", linear_w()), ("curved", curved_w())];
            for f in FPreset::ALL {
                let data = SchrodingerData::new(&grid, f.jet())?;
                for (wn, w) in &ws {
                    let (s, v) = schrodinger_factorization_check(&data, w)?;
                    rep.at_most(&format!("scalar[{}, {wn}]", f.name()), s, cfg.tol("factorization"));
                    rep.at_most(&format!("vector[{}, {wn}]", f.name()), v, cfg.tol("factorization"));
                }
                rep.at_most(&format!("darboux[{}]", f.name()), data.darboux_defect(), cfg.tol("darboux"));
            }
        }
        Example::Df => {
            let grid = cfg.grid()?;
            let us: [(&str, BiquatJetFn); 3] = [("linear", linear_w()), ("curved", curved_w()), ("scalar", scalar_u())];
            for f in FPreset::ALL {
                for (un, u) in &us {
                    let r = df_factorization_check(&grid, &f.jet(), u)?;
                    rep.at_most(&format!("df[{}, {un}]", f.name()), r, cfg.tol("factorization"));
                }
            }
        }
        Example::Helmholtz => {
            let points = helmholtz_points(cfg.seed, 20);
            for (re, im) in HELMHOLTZ_ALPHAS {
                let alpha = Complex::new(re, im);
                for sign in [Sign::Minus, Sign::Plus] {
                    let mut worst = 0.0f64;
                    for &x in &points {
                        worst = worst.max(helmholtz_fd_residual(alpha, sign, x, 1e-3)?);
                    }
                    rep.at_most(&format!("fd[{alpha}, {sign:?}]"), worst, cfg.tol("helmholtz_fd"));
                }
            }
        }
        Example::Bessel => {
            let grid = cfg.grid()?;
            let r = bessel_example(&grid)?;
            rep.at_most("sqrt_lambda_minus_pi", (r.sqrt_lambda - std::f64::consts::PI).abs(), cfg.tol("bessel_root"));
            rep.at_most("boundary_max", r.boundary_max, cfg.tol("bessel_boundary"));
            rep.at_most("eigen_residual", r.eigen_residual, cfg.tol("bessel_eigen"));
            rep.at_most("vekua_residual", r.vekua_residual_closed_form, cfg.tol("bessel_vekua"));
            rep.result("report", &r);
        }
        Example::TAlpha => {
            let grid = cfg.grid()?;
            for (name, alpha) in alpha_cases() {
                let e = t_alpha_reconstruction(&grid, alpha)?;
                rep.at_most(&format!("reconstruction[{name}]"), e, cfg.tol("t_alpha"));
            }
        }
    }
    Ok(rep)
}
