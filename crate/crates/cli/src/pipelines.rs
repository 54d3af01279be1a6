use std::path::Path;

use log::info;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wong_core::dynamics::{self, ReducedState, Trajectory};
use wong_core::equilibria::{self, momentum_eigenproblem, EigenPair, RelativeEquilibrium};
use wong_core::geometry::{GeometryAtPoint, IdentityResiduals};
use wong_core::lattice::{
    coulomb_project, divergence, green_eigenpairs, gribov_check, potential_and_gradient, ym_rhs,
    ym_solve_equilibrium, GaugeField, GaugeLattice, GribovReport, LatticeFlow, LatticeGeometry, LatticeSolve,
    LatticeSystem,
};
use wong_core::linalg::{max_abs, max_abs_vec, sorted_symmetric_eigen};
use wong_core::system::{self, project_to_sigma, KaluzaKlein, MechanicalSystem, PointOnSigma, SystemCheck, TwoVectorSo3};
use wong_core::Error;

use crate::config::{FieldInit, LatticeConfig, RunConfig, Subcommand, SystemConfig, Tolerances};
use crate::error::CliError;
use crate::output::{indexed, rows, write_csv, write_json, Check, OutputFile};

pub const LATTICE_INDEX_MAP: &str =
    "field A[a][i](x) at x*3*n_g + i*n_g + a; site function w[m](x) at x*n_g + m; site x = x0 + L*(x1 + L*x2)";

/// What a pipeline hands back for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub outputs: Vec<OutputFile>,
    pub index_map: Option<String>,
    /// False when a solver failed to converge; outputs are still written.
    pub converged: bool,
}

struct Checks<'a> {
    tol: &'a Tolerances,
    list: Vec<Check>,
}

impl<'a> Checks<'a> {
    fn new(tol: &'a Tolerances) -> Self {
        Self { tol, list: Vec::new() }
    }

    fn add(&mut self, name: &str, class: &str, value: f64) {
        let t = self.tol.get(class).expect("known tolerance class");
        self.list.push(Check::below(name, class, value, t));
    }
}

pub fn run(sub: Subcommand, cfg: &RunConfig, cfg_path: &Path, out: &Path) -> Result<Outcome, CliError> {
    match sub {
        Subcommand::Geometry => geometry(cfg, cfg_path, out),
        Subcommand::Integrate => integrate(cfg, cfg_path, out),
        Subcommand::Equilibria => equilibria(cfg, cfg_path, out),
        Subcommand::LatticeGeometry => lattice_geometry(cfg, cfg_path, out),
        Subcommand::LatticeIntegrate => lattice_integrate(cfg, cfg_path, out),
        Subcommand::LatticeEquilibria => lattice_equilibria(cfg, cfg_path, out),
        Subcommand::Report => unreachable!("report reads artifacts instead of running a pipeline"),
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension(format!("{what} rows have unequal lengths")).into());
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn build_system(sc: &SystemConfig) -> Result<Box<dyn MechanicalSystem>, CliError> {
    Ok(match sc {
        SystemConfig::TwoVector { potential } => Box::new(TwoVectorSo3::new(potential.clone())),
        SystemConfig::KaluzaKlein {
            connection,
            base_metric,
            fiber_scale,
            base_potential,
        } => {
            let mut kk = KaluzaKlein::new(connection.clone())?.with_fiber_scale(*fiber_scale)?;
            if let Some(h) = base_metric {
                kk = kk.with_base_metric(matrix(h, "base_metric")?)?;
            }
            if let Some(h) = base_potential {
                kk = kk.with_base_potential(matrix(h, "base_potential")?)?;
            }
            Box::new(kk)
        }
    })
}

fn vector(v: &Option<Vec<f64>>, n: usize, what: &str) -> Result<DVector<f64>, CliError> {
    match v {
        None => Ok(DVector::zeros(n)),
        Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::Dimension(format!("{what} has {} entries, expected {n}", v.len())).into()),
    }
}

fn reference_point(sys: &dyn MechanicalSystem, sc: &SystemConfig, rng: &mut ChaCha8Rng, random: bool) -> DVector<f64> {
    match (sc, random) {
        (SystemConfig::TwoVector { .. }, false) => TwoVectorSo3::canonical_point(),
        (SystemConfig::TwoVector { .. }, true) => TwoVectorSo3::random_sigma_point(rng),
        (SystemConfig::KaluzaKlein { .. }, false) => DVector::zeros(sys.n_p()),
        (SystemConfig::KaluzaKlein { .. }, true) => {
            let m = sys.n_p() - 3;
            DVector::from_fn(sys.n_p(), |i, _| if i < m { rng.random_range(-1.0..1.0) } else { 0.0 })
        }
    }
}

fn initial_point(
    sys: &dyn MechanicalSystem,
    cfg: &RunConfig,
    sc: &SystemConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PointOnSigma, CliError> {
    let q = match &cfg.initial.q {
        Some(_) => vector(&cfg.initial.q, sys.n_p(), "initial.q")?,
        None => reference_point(sys, sc, rng, cfg.initial.random),
    };
    Ok(project_to_sigma(sys, &q)?)
}

#[derive(Serialize)]
struct EigenRow {
    lambda: f64,
    vector: Vec<f64>,
}

fn eigen_rows(pairs: &[EigenPair]) -> Vec<EigenRow> {
    pairs
        .iter()
        .map(|e| EigenRow {
            lambda: e.lambda,
            vector: e.vector.iter().copied().collect(),
        })
        .collect()
}

#[derive(Serialize)]
struct GeometryReport {
    system: String,
    q: Vec<f64>,
    metric: Vec<Vec<f64>>,
    killing: Vec<Vec<f64>>,
    fp_matrix: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    gamma_inv: Vec<Vec<f64>>,
    connection: Vec<Vec<f64>>,
    /// `curvature[sigma][a][b]`.
    curvature: Vec<Vec<Vec<f64>>>,
    horizontal_metric: Vec<Vec<f64>>,
    n_projector: Vec<Vec<f64>>,
    pi_projector: Vec<Vec<f64>>,
    identities: IdentityResiduals,
    system_check: SystemCheck,
    momentum_eigenpairs: Vec<EigenRow>,
}

fn geometry(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let sc = cfg.system_or_err(path)?;
    let sys = build_system(sc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = initial_point(&*sys, cfg, sc, &mut rng)?;
    info!("geometry of {} at {}", sys.name(), q.q().transpose());
    let geo = GeometryAtPoint::evaluate(&*sys, &q)?;
    let ids = geo.identity_residuals();
    let sys_check = system::check_system(&*sys, q.q())?;
    let mut checks = Checks::new(&cfg.tolerances);
    for (name, v) in ids.named() {
        checks.add(name, "identity", v);
    }
    checks.add("killing_equation", "killing", sys_check.killing);
    checks.add("bracket_relation", "killing", sys_check.equivariance);
    checks.add("potential_invariance", "killing", sys_check.invariance);
    let n_g = geo.n_g();
    let report = GeometryReport {
        system: sys.name().into(),
        q: q.q().iter().copied().collect(),
        metric: rows(&geo.metric),
        killing: rows(&geo.killing),
        fp_matrix: rows(&geo.phi),
        gamma: rows(&geo.gamma),
        gamma_inv: rows(&geo.gamma_inv),
        connection: rows(&geo.a_conn),
        curvature: (0..n_g).map(|s| rows(&geo.f_curv.slice(s))).collect(),
        horizontal_metric: rows(&geo.g_h),
        n_projector: rows(&geo.n_proj),
        pi_projector: rows(&geo.pi_proj),
        identities: ids,
        system_check: sys_check,
        momentum_eigenpairs: eigen_rows(&momentum_eigenproblem(&*sys, q.q())?),
    };
    write_json(out, "geometry.json", &report)?;
    Ok(Outcome {
        checks: checks.list,
        outputs: vec![OutputFile {
            name: "geometry.json".into(),
            columns: [
                "system", "q", "metric", "killing", "fp_matrix", "gamma", "gamma_inv", "connection", "curvature",
                "horizontal_metric", "n_projector", "pi_projector", "identities", "system_check", "momentum_eigenpairs",
            ]
            .map(String::from)
            .to_vec(),
        }],
        index_map: None,
        converged: true,
    })
}

/// Columns `t`, shape, shape velocity, momentum, then the invariants.
fn trajectory_table(
    traj: &Trajectory,
    stride: usize,
    shape: &str,
    n_p: usize,
    n_g: usize,
) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut header = vec!["t".to_string()];
    header.extend(indexed(shape, n_p));
    header.extend(indexed(&format!("{shape}_dot"), n_p));
    header.extend(indexed("p", n_g));
    header.extend(["energy", "constraint", "tangency", "connection", "p_norm", "p_khat_norm"].map(String::from));
    let last = traj.samples.len() - 1;
    let data = traj
        .samples
        .iter()
        .zip(&traj.invariants)
        .enumerate()
        .filter(|(k, _)| k % stride.max(1) == 0 || *k == last)
        .map(|(_, (s, inv))| {
            let mut row = vec![s.t];
            row.extend(s.q.iter());
            row.extend(s.q_dot.iter());
            row.extend(s.p.iter());
            row.extend([inv.energy, inv.constraint, inv.tangency, inv.connection, inv.p_norm, inv.p_khat_norm]);
            row
        })
        .collect();
    (header, data)
}

fn integrate(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let sc = cfg.system_or_err(path)?;
    let sys = build_system(sc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = initial_point(&*sys, cfg, sc, &mut rng)?;
    let v = vector(&cfg.initial.q_dot, sys.n_p(), "initial.q_dot")?;
    let p = vector(&cfg.initial.p, sys.n_g(), "initial.p")?;
    let state = ReducedState::projected(&*sys, q.q(), &v, p, 0.0)?;
    let ic = &cfg.integrator;
    info!("integrating {} to t = {} with dt = {}", sys.name(), ic.t_end, ic.dt);
    let traj = dynamics::integrate_system(&*sys, &state, ic.t_end, ic.dt, ic.method)?;
    let (header, data) = trajectory_table(&traj, ic.stride, "q", sys.n_p(), sys.n_g());
    write_csv(out, "trajectory.csv", &header, &data)?;
    let mut checks = Checks::new(&cfg.tolerances);
    checks.add("relative_energy_drift", "energy_drift", traj.max_relative_energy_drift());
    checks.add("max_constraint", "constraint", traj.max_constraint());
    Ok(Outcome {
        checks: checks.list,
        outputs: vec![OutputFile {
            name: "trajectory.csv".into(),
            columns: header,
        }],
        index_map: None,
        converged: true,
    })
}

#[derive(Serialize)]
struct StartReport {
    q_guess: Vec<f64>,
    scale_guess: f64,
    equilibrium: Option<RelativeEquilibrium>,
    dynamic_check: Option<equilibria::DynamicCheck>,
    error: Option<String>,
}

#[derive(Serialize)]
struct EquilibriaReport {
    eigen_index: usize,
    eigenpairs_at_guess: Vec<EigenRow>,
    starts: Vec<StartReport>,
}

fn equilibria(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let sc = cfg.system_or_err(path)?;
    let sys = build_system(sc)?;
    let ec = &cfg.equilibrium;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = match &ec.q_guess {
        Some(_) => vector(&ec.q_guess, sys.n_p(), "equilibrium.q_guess")?,
        None => initial_point(&*sys, cfg, sc, &mut rng)?.into_inner(),
    };
    let mut starts = vec![(first.clone(), ec.scale_guess)];
    for _ in 0..ec.random_starts {
        let q = project_to_sigma(&*sys, &reference_point(&*sys, sc, &mut rng, true))?;
        starts.push((q.into_inner(), ec.scale_guess));
    }
    info!("solving {} equilibrium start(s)", starts.len());
    let results = equilibria::multistart(&*sys, &starts, ec.eigen_index, &ec.solver);
    let mut reports = Vec::new();
    let mut best: Option<(RelativeEquilibrium, Option<equilibria::DynamicCheck>)> = None;
    for ((q, s), res) in starts.iter().zip(results) {
        let mut rep = StartReport {
            q_guess: q.iter().copied().collect(),
            scale_guess: *s,
            equilibrium: None,
            dynamic_check: None,
            error: None,
        };
        match res {
            Ok(eq) => {
                let dc = if ec.verify {
                    Some(equilibria::verify_dynamically(&*sys, &eq, ec.verify_t_end, ec.verify_dt)?)
                } else {
                    None
                };
                if best.as_ref().is_none_or(|(b, _)| eq.residual_h < b.residual_h) {
                    best = Some((eq.clone(), dc.clone()));
                }
                rep.equilibrium = Some(eq);
                rep.dynamic_check = dc;
            }
            Err(e @ (Error::NoConvergence { .. } | Error::EigenCrossing { .. })) => rep.error = Some(e.to_string()),
            Err(e) => return Err(e.into()),
        }
        reports.push(rep);
    }
    let report = EquilibriaReport {
        eigen_index: ec.eigen_index,
        eigenpairs_at_guess: eigen_rows(&momentum_eigenproblem(&*sys, &first)?),
        starts: reports,
    };
    write_json(out, "equilibria.json", &report)?;
    let mut checks = Checks::new(&cfg.tolerances);
    let converged = best.is_some();
    if let Some((eq, dc)) = best {
        checks.add("horizontal_residual", "horizontal", eq.residual_h);
        checks.add("vertical_residual", "vertical", eq.residual_v);
        if let Some(dc) = dc {
            checks.add("max_shape_velocity", "frozen_shape", dc.max_q_dot);
            checks.add("max_momentum_change", "momentum_drift", dc.max_p_change);
        }
    }
    Ok(Outcome {
        checks: checks.list,
        outputs: vec![OutputFile {
            name: "equilibria.json".into(),
            columns: ["eigen_index", "eigenpairs_at_guess", "starts"].map(String::from).to_vec(),
        }],
        index_map: None,
        converged,
    })
}

fn initial_field(lc: &LatticeConfig, rng: &mut ChaCha8Rng) -> Result<GaugeField, CliError> {
    let lat = GaugeLattice::new(lc.side, lc.spacing)?;
    let raw = match &lc.field {
        FieldInit::Zero => return Ok(GaugeField::zero(lat)),
        FieldInit::Random { amplitude } => GaugeField::random(lat.clone(), *amplitude, rng).a_field,
        FieldInit::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let v: Vec<f64> = serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid {
                path: path.clone(),
                key: format!("lattice.field: {e}"),
            })?;
            vector(&Some(v), lat.flat_dim(), "lattice field")?
        }
    };
    let a = coulomb_project(&lat, &raw);
    Ok(GaugeField::new(lat, a)?)
}

fn random_vector(n: usize, amp: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    if amp == 0.0 {
        return DVector::zeros(n);
    }
    DVector::from_fn(n, |_, _| rng.random_range(-amp..=amp))
}

#[derive(Serialize)]
struct CrossCheck {
    fp_operator: f64,
    connection: f64,
    a_ddot: f64,
    p_dot: f64,
}

#[derive(Serialize)]
struct LatticeGeometryReport {
    side: usize,
    spacing: f64,
    a_field: Vec<f64>,
    potential: f64,
    max_divergence: f64,
    fp_spectrum: Vec<f64>,
    green_kernel_dim: usize,
    green_condition: f64,
    green_eigenpairs: Vec<EigenRow>,
    gribov: GribovReport,
    cross_check: Option<CrossCheck>,
}

/// Generic pipeline on the flattened lattice against the specialised formulas.
fn cross_check(field: &GaugeField, rng: &mut ChaCha8Rng) -> Result<CrossCheck, CliError> {
    let lat = &field.lattice;
    let sys = LatticeSystem::new(lat.clone())?;
    let point = PointOnSigma::new(&sys, field.a_field.clone())?;
    let geo = GeometryAtPoint::evaluate(&sys, &point)?;
    let lgeo = LatticeGeometry::new(field)?;
    let v = coulomb_project(lat, &random_vector(lat.flat_dim(), 0.5, rng));
    let p = random_vector(lat.site_dim(), 0.5, rng);
    let state = ReducedState::new(&sys, point, v.clone(), p.clone(), 0.0)?;
    let generic = dynamics::wong_rhs(&sys, &state)?;
    let special = ym_rhs(field, &v, &p)?;
    Ok(CrossCheck {
        fp_operator: max_abs(&(&geo.gamma - &lgeo.gamma)),
        connection: max_abs(&(&geo.a_conn - &lgeo.connection)),
        a_ddot: max_abs_vec(&(&generic.q_ddot - &special.a_ddot)),
        p_dot: max_abs_vec(&(&generic.p_dot - &special.p_dot)),
    })
}

fn lattice_geometry(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let lc = cfg.lattice_or_err(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let field = initial_field(lc, &mut rng)?;
    let lat = &field.lattice;
    let geo = LatticeGeometry::new(&field)?;
    let (spectrum, _) = sorted_symmetric_eigen(&geo.gamma);
    let (pot, _) = potential_and_gradient(lat, &field.a_field);
    let g = &geo.gamma;
    let gp = &geo.green.pinv;
    let green_identity = max_abs(&(g * gp * g - g)).max(max_abs(&(gp * g * gp - gp)));
    let xc = if lc.cross_check.unwrap_or(false) {
        Some(cross_check(&field, &mut rng)?)
    } else {
        None
    };
    let mut checks = Checks::new(&cfg.tolerances);
    let max_div = divergence(lat, &field.a_field).amax();
    checks.add("coulomb_divergence", "coulomb", max_div);
    checks.add("green_pseudoinverse", "identity", green_identity);
    if let Some(x) = &xc {
        checks.add("cross_check_fp_operator", "cross_check", x.fp_operator);
        checks.add("cross_check_connection", "cross_check", x.connection);
        checks.add("cross_check_a_ddot", "cross_check", x.a_ddot);
        checks.add("cross_check_p_dot", "cross_check", x.p_dot);
    }
    let report = LatticeGeometryReport {
        side: lat.side(),
        spacing: lat.spacing(),
        a_field: field.a_field.iter().copied().collect(),
        potential: pot,
        max_divergence: max_div,
        fp_spectrum: spectrum.iter().copied().collect(),
        green_kernel_dim: geo.green.kernel_dim,
        green_condition: geo.green.condition,
        green_eigenpairs: eigen_rows(&green_eigenpairs(&field)?),
        gribov: gribov_check(&field),
        cross_check: xc,
    };
    write_json(out, "lattice_geometry.json", &report)?;
    Ok(Outcome {
        checks: checks.list,
        outputs: vec![OutputFile {
            name: "lattice_geometry.json".into(),
            columns: [
                "side", "spacing", "a_field", "potential", "max_divergence", "fp_spectrum", "green_kernel_dim",
                "green_condition", "green_eigenpairs", "gribov", "cross_check",
            ]
            .map(String::from)
            .to_vec(),
        }],
        index_map: Some(LATTICE_INDEX_MAP.into()),
        converged: true,
    })
}

fn lattice_integrate(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let lc = cfg.lattice_or_err(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let field = initial_field(lc, &mut rng)?;
    let lat = field.lattice.clone();
    let geo = LatticeGeometry::new(&field)?;
    let v = &geo.n_proj * random_vector(lat.flat_dim(), lc.velocity_amplitude, &mut rng);
    let p = random_vector(lat.site_dim(), lc.momentum_amplitude, &mut rng);
    let flow = LatticeFlow { lattice: lat.clone() };
    info!("integrating lattice L = {} to t = {}", lat.side(), lc.t_end);
    let traj = dynamics::integrate(&flow, &field.a_field, &v, &p, 0.0, lc.t_end, lc.dt, cfg.integrator.method)?;
    let (header, data) = trajectory_table(&traj, lc.stride, "a", lat.flat_dim(), lat.site_dim());
    write_csv(out, "lattice_trajectory.csv", &header, &data)?;
    let mut checks = Checks::new(&cfg.tolerances);
    checks.add("max_divergence", "coulomb", traj.max_constraint());
    let tangency = traj.invariants.iter().map(|s| s.tangency).fold(0.0, f64::max);
    checks.add("max_velocity_divergence", "coulomb", tangency);
    Ok(Outcome {
        checks: checks.list,
        outputs: vec![OutputFile {
            name: "lattice_trajectory.csv".into(),
            columns: header,
        }],
        index_map: Some(LATTICE_INDEX_MAP.into()),
        converged: true,
    })
}

#[derive(Serialize)]
struct LatticeEquilibriumReport {
    eigen_index: usize,
    scale_guess: f64,
    green_eigenvalues_at_guess: Vec<f64>,
    solve: Option<LatticeSolve>,
    error: Option<String>,
}

fn lattice_equilibria(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let lc = cfg.lattice_or_err(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let field = initial_field(lc, &mut rng)?;
    let pairs = green_eigenpairs(&field)?;
    let (solve, error) = match ym_solve_equilibrium(&field, lc.eigen_index, lc.scale_guess, &lc.solver) {
        Ok(s) => (Some(s), None),
        Err(e @ Error::EigenCrossing { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let mut checks = Checks::new(&cfg.tolerances);
    let converged = solve.as_ref().is_some_and(|s| s.converged);
    if let Some(s) = &solve {
        checks.add("horizontal_residual", "horizontal", s.best.residual_h);
        checks.add("vertical_residual", "lattice_vertical", s.best.residual_v);
        checks.add("max_divergence", "coulomb", s.best.constraint);
    }
    let report = LatticeEquilibriumReport {
        eigen_index: lc.eigen_index,
        scale_guess: lc.scale_guess,
        green_eigenvalues_at_guess: pairs.iter().map(|e| e.lambda).collect(),
        solve,
        error,
    };
    write_json(out, "lattice_equilibrium.json", &report)?;
    Ok(Outcome {
        checks: checks.list,
        outputs: vec![OutputFile {
            name: "lattice_equilibrium.json".into(),
            columns: ["eigen_index", "scale_guess", "green_eigenvalues_at_guess", "solve", "error"]
                .map(String::from)
                .to_vec(),
        }],
        index_map: Some(LATTICE_INDEX_MAP.into()),
        converged,
    })
}
