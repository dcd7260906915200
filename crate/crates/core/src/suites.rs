//! Batch verification drivers over randomized inputs.
//!
//! Each driver seeds its own generator, builds a deterministic batch of
//! inputs serially, fans the evaluations out in parallel with a
//! deterministic reduction, and folds the outcome into a [`SuiteReport`]:
//! a flat list of [`CheckRecord`]s whose `pass` flag is always
//! `worst <= tolerance`. Margins with sign conventions are negated into
//! defects first, so every record reads the same way. Reports serialize
//! to JSON with a stable field order; byte-identical reruns under the
//! same configuration certify determinism.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::constants_lab::{
    bg_verify, growth_report, ratio_centered_to_g, ratio_envelope, search_extremal,
    witness_family, witness_levels, ConstantsError, GrowthReport,
};
use crate::gamma_construction::{GammaError, GammaParams, GammaSequences};
use crate::littlewood_paley::{
    gfunction_closed_form, gfunction_quadrature, sandwich_bounds, verify_theorem_a, GMode,
    KernelMatrix, LpError,
};
use crate::nc_matrix::{
    diagonal_embedding, nc_gfunction, nc_operator, nc_square_functions, shadow_filtration,
    verify_nc_theorem, MatrixAlgebraFiltration, NcError, TracialElement,
};
use crate::probability::{Exponent, FiberNorm, Filtration, MartingaleFunction, ProbabilityError};
use crate::semigroup::{SemigroupError, SubordinationSequence};

const TINY: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("bad suite parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Lp(#[from] Box<LpError>),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error(transparent)]
    Constants(#[from] Box<ConstantsError>),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<LpError> for SuiteError {
    fn from(e: LpError) -> Self {
        SuiteError::Lp(Box::new(e))
    }
}

impl From<ConstantsError> for SuiteError {
    fn from(e: ConstantsError) -> Self {
        SuiteError::Constants(Box::new(e))
    }
}

/// One verified claim. `pass` is always `worst <= tolerance`; `worst` is a
/// defect (violations are positive, slack to spare is negative).
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub label: String,
    pub pass: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: Value,
}

impl CheckRecord {
    fn new(check: &str, label: &str, worst: f64, tolerance: f64, detail: Value) -> Self {
        CheckRecord {
            check: check.to_string(),
            label: label.to_string(),
            pass: worst <= tolerance,
            worst,
            tolerance,
            detail,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub params: Value,
    pub records: Vec<CheckRecord>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckRecord> {
        self.records.iter().find(|r| !r.pass)
    }

    pub fn to_json_string(&self) -> Result<String, SuiteError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn require(ok: bool, msg: &str) -> Result<(), SuiteError> {
    if ok {
        Ok(())
    } else {
        Err(SuiteError::Param(msg.to_string()))
    }
}

fn random_values(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Two-sided pointwise sandwich between the semigroup g-function and the
/// centered martingale square function, plus its L_p consequences.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichConfig {
    pub seed: u64,
    pub depth: usize,
    pub samples: usize,
    pub slack: f64,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            seed: 7,
            depth: 8,
            samples: 1000,
            slack: 1e-10,
        }
    }
}

pub fn sandwich_suite(cfg: &SandwichConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.depth >= 2, "depth must be at least 2")?;
    require(cfg.samples >= 1, "samples must be positive")?;
    let filt = Arc::new(Filtration::dyadic(cfg.depth)?);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let batch: Vec<Vec<f64>> = (0..cfg.samples)
        .map(|_| random_values(&mut rng, filt.atom_count()))
        .collect();

    let reports = batch
        .into_par_iter()
        .map(|values| {
            let f = MartingaleFunction::scalar(Arc::clone(&filt), values)?;
            Ok(verify_theorem_a(&f)?)
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let mut worst_lower = f64::NEG_INFINITY;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lp = f64::NEG_INFINITY;
    for r in &reports {
        worst_lower = worst_lower.max(-r.worst_lower_margin);
        worst_upper = worst_upper.max(-r.worst_upper_margin);
        for c in &r.lp_checks {
            worst_lp = worst_lp.max((c.lhs - c.mid) / c.mid.max(TINY));
            worst_lp = worst_lp.max((c.mid - c.rhs) / c.rhs.max(TINY));
        }
    }

    let (lo2, hi2): (f64, f64) = sandwich_bounds();
    let records = vec![
        CheckRecord::new(
            "theorem_a",
            "pointwise lower bound sqrt(7/60) S(f - E_1 f) <= G f",
            worst_lower,
            cfg.slack,
            json!({ "constant": lo2.sqrt() }),
        ),
        CheckRecord::new(
            "theorem_a",
            "pointwise upper bound G f <= sqrt(23/60) S(f - E_1 f)",
            worst_upper,
            cfg.slack,
            json!({ "constant": hi2.sqrt() }),
        ),
        CheckRecord::new(
            "theorem_a",
            "L_p comparisons at p in {1, 2, 4, inf}",
            worst_lp,
            cfg.slack,
            json!({ "exponents": ["1", "2", "4", "inf"] }),
        ),
    ];
    Ok(SuiteReport {
        suite: "theorem_a".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Spectrum and Gershgorin geometry of the subordination kernels.
#[derive(Clone, Debug, Serialize)]
pub struct KernelConfig {
    pub max_size: usize,
    pub eig_slack: f64,
    pub radius_slack: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            max_size: 50,
            eig_slack: 1e-12,
            radius_slack: 1e-12,
        }
    }
}

pub fn kernel_suite(cfg: &KernelConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.max_size >= 1, "max_size must be positive")?;
    let (lo, hi): (f64, f64) = sandwich_bounds();
    let ranges = (1..=cfg.max_size)
        .into_par_iter()
        .map(|n| {
            let k = KernelMatrix::<f64>::power16(n)?;
            let (emin, emax) = k.eigen_range()?;
            let (glo, ghi) = k.gershgorin_bounds();
            Ok((emin, emax, glo, ghi))
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let mut worst_below = f64::NEG_INFINITY;
    let mut worst_above = f64::NEG_INFINITY;
    let mut worst_radius = f64::NEG_INFINITY;
    for &(emin, emax, glo, ghi) in &ranges {
        worst_below = worst_below.max(lo - emin);
        worst_above = worst_above.max(emax - hi);
        let radius = (0.25 - glo).max(ghi - 0.25);
        worst_radius = worst_radius.max(radius - 2.0 / 15.0);
    }
    let single = KernelMatrix::<f64>::power16(1)?;
    let single_defect = (single.entry(0, 0) - 0.25).abs();

    let records = vec![
        CheckRecord::new(
            "kernel_spectrum",
            "eigenvalues stay above 7/60",
            worst_below,
            cfg.eig_slack,
            json!({ "bound": lo }),
        ),
        CheckRecord::new(
            "kernel_spectrum",
            "eigenvalues stay below 23/60",
            worst_above,
            cfg.eig_slack,
            json!({ "bound": hi }),
        ),
        CheckRecord::new(
            "kernel_spectrum",
            "Gershgorin radius around the 1/4 diagonal is at most 2/15",
            worst_radius,
            cfg.radius_slack,
            json!({ "radius_bound": 2.0 / 15.0 }),
        ),
        CheckRecord::new(
            "kernel_spectrum",
            "1x1 kernel equals 1/4 exactly",
            single_defect,
            0.0,
            Value::Null,
        ),
    ];
    Ok(SuiteReport {
        suite: "kernel_spectrum".to_string(),
        seed: 0,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Closed-form g-function against adaptive quadrature of the defining
/// integral at q = 2.
#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormConfig {
    pub seed: u64,
    pub samples: usize,
    pub min_depth: usize,
    pub max_depth: usize,
    pub rel_tol: f64,
}

impl Default for ClosedFormConfig {
    fn default() -> Self {
        ClosedFormConfig {
            seed: 11,
            samples: 100,
            min_depth: 2,
            max_depth: 10,
            rel_tol: 1e-8,
        }
    }
}

pub fn closed_form_suite(cfg: &ClosedFormConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.samples >= 1, "samples must be positive")?;
    require(
        2 <= cfg.min_depth && cfg.min_depth <= cfg.max_depth && cfg.max_depth <= 14,
        "depth range must satisfy 2 <= min <= max <= 14",
    )?;
    let depths: Vec<usize> = (cfg.min_depth..=cfg.max_depth).collect();
    let filts = depths
        .iter()
        .map(|&d| Ok(Arc::new(Filtration::dyadic(d)?)))
        .collect::<Result<Vec<_>, SuiteError>>()?;
    let seqs = depths
        .iter()
        .map(|&d| Ok(SubordinationSequence::theorem_a(d - 1)?))
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let batch: Vec<(usize, Vec<f64>)> = (0..cfg.samples)
        .map(|i| {
            let di = i % depths.len();
            (di, random_values(&mut rng, filts[di].atom_count()))
        })
        .collect();

    let defects = batch
        .into_par_iter()
        .map(|(di, values)| {
            let f = MartingaleFunction::scalar(Arc::clone(&filts[di]), values)?;
            let closed = gfunction_closed_form(&seqs[di], &f)?;
            let quad = gfunction_quadrature(&seqs[di], &f, 2.0, GMode::Full)?;
            let mut diff = 0.0f64;
            let mut scale = 0.0f64;
            for (c, q) in closed.iter().zip(quad.iter()) {
                diff = diff.max((c - q).abs());
                scale = scale.max(c.abs());
            }
            Ok(diff / scale.max(TINY))
        })
        .collect::<Result<Vec<f64>, SuiteError>>()?;

    let worst = defects.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let records = vec![CheckRecord::new(
        "g_closed_vs_quadrature",
        "kernel closed form matches the time integral at q = 2",
        worst,
        cfg.rel_tol,
        json!({ "depths": depths }),
    )];
    Ok(SuiteReport {
        suite: "g_closed_vs_quadrature".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Semigroup axioms on a geometric time grid, plus strong continuity along
/// a halving sweep down to where the envelope flattens out.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomsConfig {
    pub seed: u64,
    pub depth: usize,
    pub samples: usize,
    pub grid_len: usize,
    pub tol: f64,
}

impl Default for AxiomsConfig {
    fn default() -> Self {
        AxiomsConfig {
            seed: 13,
            depth: 8,
            samples: 24,
            grid_len: 30,
            tol: 1e-10,
        }
    }
}

pub fn axioms_suite(cfg: &AxiomsConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.samples >= 1, "samples must be positive")?;
    require(
        (2..=14).contains(&cfg.depth),
        "depth must lie in 2..=14",
    )?;
    require(
        (2..=120).contains(&cfg.grid_len),
        "grid_len must lie in 2..=120",
    )?;
    let seq = SubordinationSequence::theorem_a(cfg.depth)?;
    let filt = Arc::new(Filtration::dyadic(cfg.depth)?);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let samples = (0..cfg.samples)
        .map(|_| {
            Ok(MartingaleFunction::scalar(
                Arc::clone(&filt),
                random_values(&mut rng, filt.atom_count()),
            )?)
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let b1 = seq.entry(1);
    let grid: Vec<f64> = ((6 - cfg.grid_len as i32)..=5)
        .map(|j| 4.0f64.powi(j) / b1)
        .collect();
    let rep = seq.verify_axioms(&samples, &grid)?;

    // halving sweep: distances shrink monotonically and reach the target
    let b_top = seq.entry(cfg.depth - 1);
    let j_max = (2.0 * b_top / cfg.tol).log2().ceil() as i32;
    let sweep = samples
        .par_iter()
        .map(|f| {
            let scale = f.lp_norm(Exponent::Finite(2.0))?.max(TINY);
            let mut last = 0.0f64;
            let mut rise = f64::NEG_INFINITY;
            let mut prev = f64::INFINITY;
            for j in 0..=j_max {
                let t = 0.5f64.powi(j);
                let dist = seq.apply(f, t)?.sub(f)?.lp_norm(Exponent::Finite(2.0))? / scale;
                rise = rise.max(dist - prev);
                prev = dist;
                last = dist;
            }
            Ok((last, rise))
        })
        .collect::<Result<Vec<(f64, f64)>, SuiteError>>()?;
    let worst_final = sweep.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_rise = sweep.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);

    let t_detail = json!({ "t_min": grid[0], "t_max": grid[grid.len() - 1] });
    let records = vec![
        CheckRecord::new(
            "semigroup_axioms",
            "L_1, L_2, and L_inf contraction",
            rep.contraction,
            cfg.tol,
            t_detail.clone(),
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "positivity preservation",
            rep.positivity,
            cfg.tol,
            Value::Null,
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "semigroup law over all grid pairs",
            rep.law,
            cfg.tol,
            json!({ "pairs": grid.len() * grid.len() }),
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "selfadjointness in the L_2 pairing",
            rep.selfadjoint,
            cfg.tol,
            Value::Null,
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "unitality T^t 1 = 1, exact",
            rep.unital,
            0.0,
            Value::Null,
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "strong continuity envelope (1 - e^{-t b}) |f|_2",
            rep.continuity_envelope,
            cfg.tol,
            t_detail,
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "halving sweep T^{2^-j} f -> f reaches the target",
            worst_final,
            cfg.tol,
            json!({ "steps": j_max + 1 }),
        ),
        CheckRecord::new(
            "semigroup_axioms",
            "halving sweep distances never increase",
            worst_rise,
            1e-12,
            Value::Null,
        ),
    ];
    Ok(SuiteReport {
        suite: "semigroup_axioms".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Incomplete-gamma subordination data: solver residuals, coupling
/// identities, closed forms at q = 1, separation, the partition identity,
/// and the kernel domination bound.
#[derive(Clone, Debug, Serialize)]
pub struct GammaConfig {
    pub q_list: Vec<f64>,
    pub depth: usize,
    pub m_scale: f64,
    pub solver_tol: f64,
    pub identity_tol: f64,
    pub closed_form_tol: f64,
    pub partition_tol: f64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            q_list: vec![1.0, 2.0, 3.0],
            depth: 6,
            m_scale: 1.0,
            solver_tol: 1e-12,
            identity_tol: 1e-10,
            closed_form_tol: 1e-12,
            partition_tol: 1e-10,
        }
    }
}

pub fn gamma_suite(cfg: &GammaConfig) -> Result<SuiteReport, SuiteError> {
    require(!cfg.q_list.is_empty(), "q_list must be nonempty")?;
    require(cfg.depth >= 2, "depth must be at least 2")?;
    let builds = cfg
        .q_list
        .iter()
        .map(|&q| Ok(GammaSequences::build(GammaParams::new(q, cfg.m_scale, cfg.depth)?)?))
        .collect::<Result<Vec<GammaSequences<f64>>, SuiteError>>()?;

    let mut worst_solver = f64::NEG_INFINITY;
    let mut worst_identity = f64::NEG_INFINITY;
    let mut worst_sep = f64::NEG_INFINITY;
    let mut worst_partition = f64::NEG_INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut seps = Vec::new();
    for g in &builds {
        let r = g.residuals();
        worst_solver = worst_solver.max(r.solver_l.max(r.solver_m));
        worst_identity = worst_identity.max(r.identity_l.max(r.identity_m));
        let n = g.separation().expect("depth >= 2 always separates");
        seps.push(n);
        worst_sep = worst_sep.max(2.0 - n);
        for k in 1..=cfg.depth {
            worst_partition = worst_partition.max(g.verify_partition(k)?.abs());
        }
        worst_excess = worst_excess.max(g.kernel_sum_excess()?);
    }

    let mut records = vec![
        CheckRecord::new(
            "gamma_construction",
            "incomplete-gamma solver residuals",
            worst_solver,
            cfg.solver_tol,
            json!({ "q_list": cfg.q_list }),
        ),
        CheckRecord::new(
            "gamma_construction",
            "coupling identities t_k b_k q = l_k and t_{k-1} b_k q = m_k",
            worst_identity,
            cfg.identity_tol,
            Value::Null,
        ),
        CheckRecord::new(
            "gamma_construction",
            "growth separation N = min b_{k+1}/b_k exceeds 2",
            worst_sep,
            0.0,
            json!({ "separations": seps }),
        ),
        CheckRecord::new(
            "gamma_construction",
            "partition identity: each level integral matches (1 - 2 tau_k) Gamma(q)",
            worst_partition,
            cfg.partition_tol,
            Value::Null,
        ),
        CheckRecord::new(
            "gamma_construction",
            "kernel domination sum b_k e^{-t b_k} <= N/(N-1) / t",
            worst_excess,
            0.0,
            Value::Null,
        ),
    ];

    if let Some(g1) = builds
        .iter()
        .zip(&cfg.q_list)
        .find(|(_, &q)| q == 1.0)
        .map(|(g, _)| g)
    {
        let mut worst_cf = f64::NEG_INFINITY;
        for k in 1..=cfg.depth {
            let tau = 0.5f64.powi(k as i32 + 2);
            let l_ref = -(-tau).ln_1p();
            let m_ref = (k as f64 + 2.0) * std::f64::consts::LN_2;
            worst_cf = worst_cf.max((g1.l()[k] - l_ref).abs() / l_ref);
            worst_cf = worst_cf.max((g1.m()[k] - m_ref).abs() / m_ref);
        }
        records.push(CheckRecord::new(
            "gamma_construction",
            "closed forms at q = 1: l_k = -ln(1 - 2^{-(k+2)}), m_k = (k+2) ln 2",
            worst_cf,
            cfg.closed_form_tol,
            Value::Null,
        ));
    }

    Ok(SuiteReport {
        suite: "gamma_construction".to_string(),
        seed: 0,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Two-sided q-equivalence between the subordinated g-function and the
/// q-square function on vector-valued martingales.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceConfig {
    pub seed: u64,
    pub samples: usize,
    pub q_list: Vec<f64>,
    pub fiber_dim: usize,
    pub min_depth: usize,
    pub max_depth: usize,
    pub m_scale: f64,
    pub slack: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig {
            seed: 17,
            samples: 500,
            q_list: vec![1.0, 2.0, 3.0],
            fiber_dim: 4,
            min_depth: 2,
            max_depth: 6,
            m_scale: 1.0,
            slack: 1e-8,
        }
    }
}

pub fn equivalence_suite(cfg: &EquivalenceConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.samples >= 1, "samples must be positive")?;
    require(!cfg.q_list.is_empty(), "q_list must be nonempty")?;
    require(cfg.fiber_dim >= 1, "fiber_dim must be positive")?;
    require(
        2 <= cfg.min_depth && cfg.min_depth <= cfg.max_depth && cfg.max_depth <= 12,
        "depth range must satisfy 2 <= min <= max <= 12",
    )?;
    let depths: Vec<usize> = (cfg.min_depth..=cfg.max_depth).collect();
    let filts = depths
        .iter()
        .map(|&d| Ok(Arc::new(Filtration::dyadic(d)?)))
        .collect::<Result<Vec<_>, SuiteError>>()?;
    // one build per q, deep enough to act on every sample
    let builds = cfg
        .q_list
        .iter()
        .map(|&q| Ok(GammaSequences::build(GammaParams::new(q, cfg.m_scale, cfg.max_depth)?)?))
        .collect::<Result<Vec<GammaSequences<f64>>, SuiteError>>()?;
    let norms = [FiberNorm::Lr(1.0), FiberNorm::Lr(2.0), FiberNorm::LInfinity];

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let batch: Vec<(usize, usize, Vec<f64>)> = (0..cfg.samples)
        .map(|i| {
            let di = i % depths.len();
            let ni = i % norms.len();
            let values = random_values(&mut rng, filts[di].atom_count() * cfg.fiber_dim);
            (di, ni, values)
        })
        .collect();

    let outcomes = batch
        .into_par_iter()
        .map(|(di, ni, values)| {
            let f = MartingaleFunction::vector(
                Arc::clone(&filts[di]),
                cfg.fiber_dim,
                values,
                norms[ni].clone(),
            )?;
            let mut worst_lower = f64::NEG_INFINITY;
            let mut worst_upper = f64::NEG_INFINITY;
            let mut atoms = 0usize;
            for g in &builds {
                let rep = g.verify_equivalence(&f)?;
                worst_lower = worst_lower.max(-rep.worst_lower_margin);
                worst_upper = worst_upper.max(-rep.worst_upper_margin);
                atoms += rep.atoms_checked;
            }
            Ok((worst_lower, worst_upper, atoms))
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let mut worst_lower = f64::NEG_INFINITY;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut atoms = 0usize;
    for &(lo, hi, a) in &outcomes {
        worst_lower = worst_lower.max(lo);
        worst_upper = worst_upper.max(hi);
        atoms += a;
    }
    let constants: Vec<Value> = builds
        .iter()
        .map(|g| {
            json!({ "q": g.q(), "N": g.separation() })
        })
        .collect();

    let records = vec![
        CheckRecord::new(
            "gamma_equivalence",
            "pointwise lower constant (Gamma(q)/q^q)^{1/q}/4 holds",
            worst_lower,
            cfg.slack,
            json!({ "atoms_checked": atoms }),
        ),
        CheckRecord::new(
            "gamma_equivalence",
            "pointwise upper constant (N/(N-1))^{(q-1)/q} holds",
            worst_upper,
            cfg.slack,
            json!({ "constants": constants }),
        ),
    ];
    Ok(SuiteReport {
        suite: "gamma_equivalence".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Operator-order sandwich on tracial matrix algebras, plus the bitwise
/// bridge from diagonal embeddings back to the commutative verifier.
#[derive(Clone, Debug, Serialize)]
pub struct NcConfig {
    pub seed: u64,
    pub samples: usize,
    pub factor_dims: Vec<usize>,
    pub tol: f64,
    pub bridge_samples: usize,
}

impl Default for NcConfig {
    fn default() -> Self {
        NcConfig {
            seed: 19,
            samples: 400,
            factor_dims: vec![2, 2, 2, 2],
            tol: 1e-10,
            bridge_samples: 16,
        }
    }
}

pub fn nc_suite(cfg: &NcConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.samples >= 1, "samples must be positive")?;
    require(cfg.bridge_samples >= 1, "bridge_samples must be positive")?;
    let filt = Arc::new(MatrixAlgebraFiltration::new(cfg.factor_dims.clone())?);
    let dim = filt.dim();
    let depth = filt.depth();

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let batch: Vec<DMatrix<Complex<f64>>> = (0..cfg.samples)
        .map(|i| {
            let m = DMatrix::from_fn(dim, dim, |_, _| {
                Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            // half the batch self-adjoint, half generic
            if i % 2 == 0 {
                (&m + m.adjoint()).scale(0.5)
            } else {
                m
            }
        })
        .collect();

    let reports = batch
        .into_par_iter()
        .map(|m| {
            let x = TracialElement::new(Arc::clone(&filt), m)?;
            Ok(verify_nc_theorem(&x)?)
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;

    // the gap list is fixed; fold the worst relative defect per name
    let names: Vec<&'static str> = reports[0].gaps.iter().map(|g| g.name).collect();
    let mut records = Vec::new();
    for (gi, name) in names.iter().enumerate() {
        let mut worst = f64::NEG_INFINITY;
        for r in &reports {
            let g = &r.gaps[gi];
            worst = worst.max(-g.min_eigenvalue / g.scale.max(TINY));
        }
        records.push(CheckRecord::new(
            "nc_theorem",
            &format!("operator order: {name} gap is positive semidefinite"),
            worst,
            cfg.tol,
            Value::Null,
        ));
    }

    // diagonal embeddings must reproduce the commutative verifier bitwise
    let shadow = Arc::new(shadow_filtration::<f64>(&filt)?);
    let seq = SubordinationSequence::theorem_a(depth.max(2))?;
    let mut worst_bridge = 0.0f64;
    for _ in 0..cfg.bridge_samples {
        let values = random_values(&mut rng, dim);
        let x = diagonal_embedding(Arc::clone(&filt), &values)?;
        let f = MartingaleFunction::scalar(Arc::clone(&shadow), values)?;
        for n in 1..=depth {
            let e_nc = x.condexp(n)?;
            let e_cm = f.condexp(n)?;
            for a in 0..dim {
                let z = e_nc.matrix()[(a, a)];
                worst_bridge = worst_bridge.max((z.re - e_cm.values()[a]).abs());
                worst_bridge = worst_bridge.max(z.im.abs());
            }
        }
        let (sc, _) = nc_square_functions(&x, 1)?;
        let s = f.square_function()?;
        for a in 0..dim {
            worst_bridge = worst_bridge.max((sc.matrix()[(a, a)].re - s[a]).abs());
        }
        let (gc, _) = nc_gfunction(&seq, &x)?;
        let gcm = gfunction_closed_form(&seq, &f)?;
        for a in 0..dim {
            worst_bridge = worst_bridge.max((gc.matrix()[(a, a)].re - gcm[a]).abs());
        }
        for &t in &[0.015625, 1.0] {
            let tx = nc_operator(&seq, &x, t)?;
            let tf = seq.apply(&f, t)?;
            for a in 0..dim {
                worst_bridge = worst_bridge.max((tx.matrix()[(a, a)].re - tf.values()[a]).abs());
            }
        }
    }
    records.push(CheckRecord::new(
        "nc_theorem",
        "diagonal embeddings reproduce the commutative verifier bitwise",
        worst_bridge,
        0.0,
        json!({ "bridge_samples": cfg.bridge_samples }),
    ));

    Ok(SuiteReport {
        suite: "nc_theorem".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Two-sided (p* - 1) bounds between |f|_p and |S f|_p, the refined
/// (p - 1) direction, the p = 2 isometry, and the centered-to-g envelope.
#[derive(Clone, Debug, Serialize)]
pub struct BgConfig {
    pub seed: u64,
    pub samples: usize,
    pub p_list: Vec<f64>,
    pub min_depth: usize,
    pub max_depth: usize,
    pub slack: f64,
    pub isometry_tol: f64,
}

impl Default for BgConfig {
    fn default() -> Self {
        BgConfig {
            seed: 23,
            samples: 1000,
            p_list: vec![1.5, 2.0, 3.0, 8.0],
            min_depth: 2,
            max_depth: 6,
            slack: 1e-10,
            isometry_tol: 1e-10,
        }
    }
}

pub fn bg_suite(cfg: &BgConfig) -> Result<SuiteReport, SuiteError> {
    require(cfg.samples >= 1, "samples must be positive")?;
    require(!cfg.p_list.is_empty(), "p_list must be nonempty")?;
    require(
        cfg.p_list.iter().all(|&p| p > 1.0 && p.is_finite()),
        "every exponent must be finite and exceed 1",
    )?;
    require(
        2 <= cfg.min_depth && cfg.min_depth <= cfg.max_depth && cfg.max_depth <= 14,
        "depth range must satisfy 2 <= min <= max <= 14",
    )?;
    let depths: Vec<usize> = (cfg.min_depth..=cfg.max_depth).collect();
    let filts = depths
        .iter()
        .map(|&d| Ok(Arc::new(Filtration::dyadic(d)?)))
        .collect::<Result<Vec<_>, SuiteError>>()?;
    let seqs = depths
        .iter()
        .map(|&d| Ok(SubordinationSequence::theorem_a(d - 1)?))
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let batch: Vec<(usize, Vec<f64>)> = (0..cfg.samples)
        .map(|i| {
            let di = i % depths.len();
            (di, random_values(&mut rng, filts[di].atom_count()))
        })
        .collect();

    struct Fold {
        lower: f64,
        upper: f64,
        refinement: f64,
        isometry: Option<f64>,
        envelope: Option<f64>,
    }

    let folds = batch
        .into_par_iter()
        .map(|(di, values)| {
            let f = MartingaleFunction::scalar(Arc::clone(&filts[di]), values)?;
            let mut fold = Fold {
                lower: f64::NEG_INFINITY,
                upper: f64::NEG_INFINITY,
                refinement: f64::NEG_INFINITY,
                isometry: None,
                envelope: None,
            };
            for &p in &cfg.p_list {
                let rep = bg_verify(&f, p).map_err(Box::new)?;
                fold.lower = fold.lower.max(-rep.lower_margin);
                fold.upper = fold.upper.max(-rep.upper_margin);
                fold.refinement = fold.refinement.max(-rep.refinement_margin);
                if p == 2.0 {
                    let d = (rep.norm_f - rep.norm_s).abs() / rep.norm_f.max(TINY);
                    fold.isometry = Some(fold.isometry.unwrap_or(f64::NEG_INFINITY).max(d));
                }
                if p >= 2.0 {
                    let env = ratio_envelope(p);
                    let d = match ratio_centered_to_g(&f, p, &seqs[di]) {
                        Ok(r) => Some((r - env) / env),
                        Err(ConstantsError::Degenerate) => None,
                        Err(ConstantsError::EnvelopeExceeded { ratio, envelope }) => {
                            Some((ratio - envelope) / envelope)
                        }
                        Err(e) => return Err(SuiteError::from(e)),
                    };
                    if let Some(d) = d {
                        fold.envelope = Some(fold.envelope.unwrap_or(f64::NEG_INFINITY).max(d));
                    }
                }
            }
            Ok(fold)
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;

    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut refinement = f64::NEG_INFINITY;
    let mut isometry: Option<f64> = None;
    let mut envelope: Option<f64> = None;
    for f in &folds {
        lower = lower.max(f.lower);
        upper = upper.max(f.upper);
        refinement = refinement.max(f.refinement);
        if let Some(v) = f.isometry {
            isometry = Some(isometry.unwrap_or(f64::NEG_INFINITY).max(v));
        }
        if let Some(v) = f.envelope {
            envelope = Some(envelope.unwrap_or(f64::NEG_INFINITY).max(v));
        }
    }

    let mut records = vec![
        CheckRecord::new(
            "square_function_lp",
            "lower bound |f|_p >= (p*-1)^{-1} |S f|_p",
            lower,
            cfg.slack,
            json!({ "p_list": cfg.p_list }),
        ),
        CheckRecord::new(
            "square_function_lp",
            "upper bound |f|_p <= (p*-1) |S f|_p",
            upper,
            cfg.slack,
            Value::Null,
        ),
        CheckRecord::new(
            "square_function_lp",
            "refined (p-1) constant on the matching side of p = 2",
            refinement,
            cfg.slack,
            Value::Null,
        ),
    ];
    if let Some(v) = isometry {
        records.push(CheckRecord::new(
            "square_function_lp",
            "p = 2 isometry |f|_2 = |S f|_2",
            v,
            cfg.isometry_tol,
            Value::Null,
        ));
    }
    if let Some(v) = envelope {
        records.push(CheckRecord::new(
            "square_function_lp",
            "centered ratio stays under (p-1) sqrt(60/7)",
            v,
            0.0,
            Value::Null,
        ));
    }

    Ok(SuiteReport {
        suite: "square_function_lp".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    })
}

/// Growth of the extremal centered-to-g ratio in p: searched lower bounds,
/// the deterministic witness family, and the depth-2 supremum.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthConfig {
    pub seed: u64,
    pub budget: u64,
    pub depth: usize,
    pub p_list: Vec<f64>,
    pub depth2_budget: u64,
    pub attain_tol: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            seed: 2026,
            budget: 100_000,
            depth: 12,
            p_list: vec![2.0, 4.0, 8.0, 16.0],
            depth2_budget: 512,
            attain_tol: 1e-6,
        }
    }
}

/// The suite verdict plus the raw table when the search completed, for
/// callers that re-emit it as CSV.
#[derive(Clone, Debug)]
pub struct GrowthSuiteOutcome {
    pub report: SuiteReport,
    pub table: Option<GrowthReport<f64>>,
}

pub fn growth_suite(cfg: &GrowthConfig) -> Result<GrowthSuiteOutcome, SuiteError> {
    let mut records = Vec::new();
    let mut table = None;
    match growth_report(&cfg.p_list, cfg.depth, cfg.budget, cfg.seed) {
        Ok(rep) => {
            let mut worst_fall = f64::NEG_INFINITY;
            let mut worst_witness_fall = f64::NEG_INFINITY;
            for w in rep.rows.windows(2) {
                worst_fall = worst_fall.max(w[0].searched_ratio - w[1].searched_ratio);
                worst_witness_fall =
                    worst_witness_fall.max(w[0].witness_ratio - w[1].witness_ratio);
            }
            if !worst_fall.is_finite() {
                worst_fall = 0.0;
                worst_witness_fall = 0.0;
            }
            let mut worst_env = f64::NEG_INFINITY;
            for row in &rep.rows {
                worst_env = worst_env.max((row.searched_ratio - row.envelope) / row.envelope);
                worst_env = worst_env.max((row.witness_ratio - row.envelope) / row.envelope);
            }
            records.push(CheckRecord::new(
                "ratio_growth",
                "searched ratios are nondecreasing in p",
                worst_fall,
                0.0,
                serde_json::to_value(&rep)?,
            ));
            records.push(CheckRecord::new(
                "ratio_growth",
                "witness family ratios are nondecreasing in p",
                worst_witness_fall,
                0.0,
                Value::Null,
            ));
            records.push(CheckRecord::new(
                "ratio_growth",
                "all ratios stay under the (p-1) sqrt(60/7) envelope",
                worst_env,
                0.0,
                Value::Null,
            ));
            table = Some(rep);
        }
        Err(ConstantsError::NotMonotone {
            p_prev,
            prev,
            p,
            cur,
        }) => {
            records.push(CheckRecord::new(
                "ratio_growth",
                "searched ratios are nondecreasing in p",
                prev - cur,
                0.0,
                json!({ "p_prev": p_prev, "p": p }),
            ));
        }
        Err(e) => return Err(e.into()),
    }

    // the witness lattices must conserve total mass and centering exactly
    let mut worst_wit = f64::NEG_INFINITY;
    for &p in &cfg.p_list {
        let w = witness_family(p, witness_levels(p)).map_err(Box::new)?;
        worst_wit = worst_wit.max(w.mass_defect.max(w.mean_defect.abs()));
    }
    records.push(CheckRecord::new(
        "ratio_growth",
        "witness distributions conserve total mass and zero mean",
        worst_wit,
        1e-12,
        Value::Null,
    ));

    let rep2 = search_extremal(2.0, 2, cfg.depth2_budget, cfg.seed).map_err(Box::new)?;
    records.push(CheckRecord::new(
        "ratio_growth",
        "depth-2 search attains the supremum 2 at p = 2",
        2.0 - rep2.best_ratio,
        cfg.attain_tol,
        json!({ "best_ratio": rep2.best_ratio, "evaluations": rep2.evaluations }),
    ));

    let report = SuiteReport {
        suite: "ratio_growth".to_string(),
        seed: cfg.seed,
        params: serde_json::to_value(cfg)?,
        records,
    };
    Ok(GrowthSuiteOutcome { report, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sandwich_suite_passes_and_is_deterministic() {
        let cfg = SandwichConfig {
            seed: 1,
            depth: 3,
            samples: 12,
            slack: 1e-10,
        };
        let a = sandwich_suite(&cfg).unwrap();
        let b = sandwich_suite(&cfg).unwrap();
        assert!(a.pass(), "{:?}", a.first_failure());
        assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());
        assert_eq!(a.records.len(), 3);
        assert!(a.records.iter().all(|r| r.check == "theorem_a"));
    }

    #[test]
    fn kernel_suite_passes() {
        let cfg = KernelConfig {
            max_size: 12,
            ..KernelConfig::default()
        };
        let rep = kernel_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        // the singleton record is exact
        assert_eq!(rep.records[3].worst, 0.0);
    }

    #[test]
    fn closed_form_suite_passes() {
        let cfg = ClosedFormConfig {
            seed: 2,
            samples: 6,
            min_depth: 2,
            max_depth: 4,
            rel_tol: 1e-8,
        };
        let rep = closed_form_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        assert!(rep.records[0].worst < 1e-8);
    }

    #[test]
    fn axioms_suite_passes() {
        let cfg = AxiomsConfig {
            seed: 3,
            depth: 4,
            samples: 4,
            grid_len: 10,
            tol: 1e-10,
        };
        let rep = axioms_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        let unital = rep
            .records
            .iter()
            .find(|r| r.label.starts_with("unitality"))
            .unwrap();
        assert_eq!(unital.worst, 0.0);
    }

    #[test]
    fn gamma_suite_passes() {
        let cfg = GammaConfig {
            depth: 4,
            ..GammaConfig::default()
        };
        let rep = gamma_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        // q = 1 closed forms present for the default list
        assert_eq!(rep.records.len(), 6);
    }

    #[test]
    fn equivalence_suite_passes() {
        let cfg = EquivalenceConfig {
            seed: 4,
            samples: 6,
            q_list: vec![1.0, 2.0],
            fiber_dim: 2,
            min_depth: 2,
            max_depth: 3,
            m_scale: 1.0,
            slack: 1e-8,
        };
        let rep = equivalence_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        assert!(rep.records.iter().all(|r| r.check == "gamma_equivalence"));
    }

    #[test]
    fn nc_suite_passes_with_exact_bridge() {
        let cfg = NcConfig {
            seed: 5,
            samples: 6,
            factor_dims: vec![2, 2],
            tol: 1e-10,
            bridge_samples: 4,
        };
        let rep = nc_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        let bridge = rep.records.last().unwrap();
        assert_eq!(bridge.worst, 0.0);
        assert_eq!(bridge.tolerance, 0.0);
    }

    #[test]
    fn bg_suite_passes() {
        let cfg = BgConfig {
            seed: 6,
            samples: 30,
            p_list: vec![1.5, 2.0, 3.0],
            min_depth: 2,
            max_depth: 4,
            slack: 1e-10,
            isometry_tol: 1e-10,
        };
        let rep = bg_suite(&cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.first_failure());
        // lower, upper, refinement, isometry, envelope
        assert_eq!(rep.records.len(), 5);
    }

    #[test]
    fn growth_suite_passes_at_small_scale() {
        let cfg = GrowthConfig {
            seed: 7,
            budget: 48,
            depth: 2,
            p_list: vec![2.0, 4.0],
            depth2_budget: 32,
            attain_tol: 1e-6,
        };
        let out = growth_suite(&cfg).unwrap();
        assert!(out.report.pass(), "{:?}", out.report.first_failure());
        let table = out.table.unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows[0].searched_ratio >= 2.0 - 1e-9);
    }

    #[test]
    fn reports_surface_failures() {
        let rec = CheckRecord::new("kernel_spectrum", "made-up bound", 1.0, 0.5, Value::Null);
        assert!(!rec.pass);
        let rep = SuiteReport {
            suite: "kernel_spectrum".to_string(),
            seed: 0,
            params: Value::Null,
            records: vec![rec],
        };
        assert!(!rep.pass());
        assert_eq!(rep.first_failure().unwrap().label, "made-up bound");
    }
}
