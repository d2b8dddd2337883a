//! Config-driven studies: parse a JSON experiment description, run it, and
//! emit deterministic CSV tables plus a text summary.
//!
//! Parsing is strict and collects every problem it can find in one pass, so
//! a bad config reports all its defects at once instead of one per run.
//! Reports contain no timestamps or environment data; rerunning a config
//! with the same seed reproduces every output byte.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::capacity::{
    classify_capacity_trend, thermal_capacity, CapacityEstimate, CapacityTrend, DiagonalPolicy,
    SolverParams,
};
use crate::dimension::{
    box_dimension, default_scale_schedule, gamma_star_bracket, gamma_star_closed_form,
    hit_dichotomy, intersection_dim_formula, BoxMetric, DimReport, GammaStarBracket, HitVerdict,
};
use crate::error::{Error, Result};
use crate::geometry::{
    build_product_grid, closed_form_dimensions, discretize_set, DiscretizeLimits, GridLimits,
    SetSpec,
};
use crate::hitting::{
    codimension_probe, estimate_hit_prob, CodimProbe, CodimReport, HitEstimate, HitParams,
};
use crate::util::{fmt_f64, linear_fit, Fnv64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Capacity,
    Dimension,
    GammaStar,
    Hit,
    Codimension,
    FullBattery,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Capacity => "capacity",
            Mode::Dimension => "dimension",
            Mode::GammaStar => "gamma_star",
            Mode::Hit => "hit",
            Mode::Codimension => "codimension",
            Mode::FullBattery => "full_battery",
        }
    }

    fn from_str(s: &str) -> Option<Mode> {
        Some(match s {
            "capacity" => Mode::Capacity,
            "dimension" => Mode::Dimension,
            "gamma_star" => Mode::GammaStar,
            "hit" => Mode::Hit,
            "codimension" => Mode::Codimension,
            "full_battery" => Mode::FullBattery,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub time_resolutions: Vec<f64>,
    pub space_resolutions: Vec<f64>,
}

/// A parsed and validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out_prefix: String,
    pub time_set: Option<SetSpec>,
    pub space_set: Option<SetSpec>,
    pub gamma: Option<f64>,
    pub diagonal_policy: DiagonalPolicy,
    pub refinement: Option<Refinement>,
    pub solver: SolverParams,
    pub epsilon_schedule: Option<Vec<f64>>,
    pub n_paths: usize,
    pub lattice_resolution: Option<f64>,
    pub max_nodes: usize,
    pub max_pairs: usize,
    pub scales: Vec<f64>,
    pub probe: Option<ProbeSettings>,
    pub growth_factor: f64,
    pub studies: Vec<(String, ExperimentConfig)>,
    /// FNV digest of the canonicalized config document.
    pub digest: u64,
}

/// The probe block of a codimension config; runtime knobs (paths, seed,
/// solver, growth) come from the surrounding config.
#[derive(Debug, Clone)]
pub struct ProbeSettings {
    pub alpha: f64,
    pub time_rank: usize,
    pub u_box: f64,
    pub u_hole: f64,
    pub u_cells: usize,
    pub epsilon: f64,
    pub cap_resolutions: Vec<f64>,
}

const TOP_KEYS: &[&str] = &[
    "mode",
    "seed",
    "out_prefix",
    "time_set",
    "space_set",
    "gamma",
    "diagonal_policy",
    "refinement",
    "solver",
    "epsilon_schedule",
    "n_paths",
    "lattice_resolution",
    "max_nodes",
    "max_pairs",
    "scales",
    "probe",
    "growth_factor",
    "studies",
];

/// Parse a config document. Every detectable problem is collected into a
/// single `Error::Validation`; syntactically broken JSON fails immediately.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("config is not valid JSON: {e}")))?;
    // serde_json orders object keys, so the reserialized document is a
    // canonical form: the digest ignores formatting differences.
    let mut h = Fnv64::new();
    h.write_bytes(value.to_string().as_bytes());
    let digest = h.finish();

    let mut errs = Vec::new();
    let cfg = parse_value(&value, "", 0, digest, &mut errs);
    match cfg {
        Some(cfg) if errs.is_empty() => Ok(cfg),
        _ => {
            if errs.is_empty() {
                errs.push("config rejected".into());
            }
            Err(Error::Validation(errs))
        }
    }
}

fn at(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn get_f64(obj: &serde_json::Map<String, Value>, key: &str, path: &str, errs: &mut Vec<String>) -> Option<f64> {
    match obj.get(key) {
        None => None,
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                errs.push(format!("{}: not a finite number", at(path, key)));
                None
            }
        },
        Some(_) => {
            errs.push(format!("{}: expected a number", at(path, key)));
            None
        }
    }
}

fn get_usize(obj: &serde_json::Map<String, Value>, key: &str, path: &str, errs: &mut Vec<String>) -> Option<usize> {
    match obj.get(key) {
        None => None,
        Some(Value::Number(n)) => match n.as_u64() {
            Some(x) => Some(x as usize),
            None => {
                errs.push(format!("{}: expected a nonnegative integer", at(path, key)));
                None
            }
        },
        Some(_) => {
            errs.push(format!("{}: expected an integer", at(path, key)));
            None
        }
    }
}

fn get_f64_array(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    path: &str,
    errs: &mut Vec<String>,
) -> Option<Vec<f64>> {
    match obj.get(key) {
        None => None,
        Some(Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                match item.as_f64() {
                    Some(x) if x.is_finite() => out.push(x),
                    _ => {
                        errs.push(format!("{}[{i}]: not a finite number", at(path, key)));
                        return None;
                    }
                }
            }
            Some(out)
        }
        Some(_) => {
            errs.push(format!("{}: expected an array of numbers", at(path, key)));
            None
        }
    }
}

fn require_decreasing(xs: &[f64], name: &str, errs: &mut Vec<String>) {
    if xs.is_empty() {
        errs.push(format!("{name}: must not be empty"));
        return;
    }
    if xs.iter().any(|x| !(*x > 0.0)) {
        errs.push(format!("{name}: entries must be positive"));
    }
    if xs.windows(2).any(|p| p[1] >= p[0]) {
        errs.push(format!("{name}: entries must be strictly decreasing"));
    }
}

fn get_set(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    path: &str,
    errs: &mut Vec<String>,
) -> Option<SetSpec> {
    let v = obj.get(key)?;
    match serde_json::from_value::<SetSpec>(v.clone()) {
        Ok(spec) => match spec.validate() {
            Ok(()) => Some(spec),
            Err(e) => {
                errs.push(format!("{}: {e}", at(path, key)));
                None
            }
        },
        Err(e) => {
            errs.push(format!("{}: {e}", at(path, key)));
            None
        }
    }
}

fn parse_value(
    value: &Value,
    path: &str,
    depth: usize,
    digest: u64,
    errs: &mut Vec<String>,
) -> Option<ExperimentConfig> {
    let obj = match value.as_object() {
        Some(o) => o,
        None => {
            errs.push(format!(
                "{}: config must be a JSON object",
                if path.is_empty() { "config" } else { path }
            ));
            return None;
        }
    };
    let allowed: BTreeSet<&str> = TOP_KEYS.iter().copied().collect();
    for key in obj.keys() {
        if !allowed.contains(key.as_str()) {
            errs.push(format!("{}: unknown key", at(path, key)));
        }
    }

    let mode = match obj.get("mode") {
        Some(Value::String(s)) => match Mode::from_str(s) {
            Some(m) => Some(m),
            None => {
                errs.push(format!(
                    "{}: unknown mode {s:?} (expected capacity, dimension, gamma_star, hit, codimension, or full_battery)",
                    at(path, "mode")
                ));
                None
            }
        },
        Some(_) => {
            errs.push(format!("{}: expected a string", at(path, "mode")));
            None
        }
        None => {
            errs.push(format!("{}: missing", at(path, "mode")));
            None
        }
    };

    let seed = match obj.get("seed") {
        Some(Value::Number(n)) => match n.as_u64() {
            Some(s) => Some(s),
            None => {
                errs.push(format!(
                    "{}: expected a nonnegative integer",
                    at(path, "seed")
                ));
                None
            }
        },
        Some(_) => {
            errs.push(format!("{}: expected an integer", at(path, "seed")));
            None
        }
        None => {
            errs.push(format!("{}: missing (runs must be reproducible)", at(path, "seed")));
            None
        }
    };

    let out_prefix = match obj.get("out_prefix") {
        None => "study".to_string(),
        Some(Value::String(s)) => {
            if s.is_empty() || s.contains('/') || s.contains('\\') {
                errs.push(format!(
                    "{}: must be a nonempty name without path separators",
                    at(path, "out_prefix")
                ));
                "study".to_string()
            } else {
                s.clone()
            }
        }
        Some(_) => {
            errs.push(format!("{}: expected a string", at(path, "out_prefix")));
            "study".to_string()
        }
    };

    let time_set = get_set(obj, "time_set", path, errs);
    let space_set = get_set(obj, "space_set", path, errs);

    let gamma = get_f64(obj, "gamma", path, errs);
    if let Some(g) = gamma {
        if g < 0.0 {
            errs.push(format!("{}: must be >= 0", at(path, "gamma")));
        }
    }

    let diagonal_policy = match obj.get("diagonal_policy") {
        None => DiagonalPolicy::Exclude,
        Some(v) => match serde_json::from_value::<DiagonalPolicy>(v.clone()) {
            Ok(p) => p,
            Err(_) => {
                errs.push(format!(
                    "{}: expected \"exclude\" or \"cell_proxy\"",
                    at(path, "diagonal_policy")
                ));
                DiagonalPolicy::Exclude
            }
        },
    };

    let refinement = match obj.get("refinement") {
        None => None,
        Some(Value::Object(r)) => {
            let rpath = at(path, "refinement");
            for key in r.keys() {
                if key != "time_resolutions" && key != "space_resolutions" {
                    errs.push(format!("{rpath}.{key}: unknown key"));
                }
            }
            let t = get_f64_array(r, "time_resolutions", &rpath, errs);
            let s = get_f64_array(r, "space_resolutions", &rpath, errs);
            match (t, s) {
                (Some(t), Some(s)) => {
                    require_decreasing(&t, &format!("{rpath}.time_resolutions"), errs);
                    require_decreasing(&s, &format!("{rpath}.space_resolutions"), errs);
                    if t.len() != s.len() {
                        errs.push(format!(
                            "{rpath}: time and space resolution lists must have equal length"
                        ));
                        None
                    } else {
                        Some(Refinement {
                            time_resolutions: t,
                            space_resolutions: s,
                        })
                    }
                }
                _ => {
                    errs.push(format!(
                        "{rpath}: needs time_resolutions and space_resolutions"
                    ));
                    None
                }
            }
        }
        Some(_) => {
            errs.push(format!("{}: expected an object", at(path, "refinement")));
            None
        }
    };

    let mut solver = SolverParams::default();
    if let Some(v) = obj.get("solver") {
        match v.as_object() {
            Some(s) => {
                let spath = at(path, "solver");
                for key in s.keys() {
                    match key.as_str() {
                        "slice_cap" | "tol" | "max_iters" | "divergence_threshold" => {}
                        _ => errs.push(format!("{spath}.{key}: unknown key")),
                    }
                }
                if let Some(x) = get_f64(s, "slice_cap", &spath, errs) {
                    if x > 0.0 && x <= 1.0 {
                        solver.slice_cap = x;
                    } else {
                        errs.push(format!("{spath}.slice_cap: must be in (0, 1]"));
                    }
                }
                if let Some(x) = get_f64(s, "tol", &spath, errs) {
                    if x > 0.0 {
                        solver.tol = x;
                    } else {
                        errs.push(format!("{spath}.tol: must be > 0"));
                    }
                }
                if let Some(x) = get_usize(s, "max_iters", &spath, errs) {
                    if x >= 1 {
                        solver.max_iters = x;
                    } else {
                        errs.push(format!("{spath}.max_iters: must be >= 1"));
                    }
                }
                if let Some(x) = get_f64(s, "divergence_threshold", &spath, errs) {
                    if x > 0.0 {
                        solver.divergence_threshold = x;
                    } else {
                        errs.push(format!("{spath}.divergence_threshold: must be > 0"));
                    }
                }
            }
            None => errs.push(format!("{}: expected an object", at(path, "solver"))),
        }
    }

    let epsilon_schedule = get_f64_array(obj, "epsilon_schedule", path, errs);
    if let Some(eps) = &epsilon_schedule {
        require_decreasing(eps, &at(path, "epsilon_schedule"), errs);
    }

    let n_paths = get_usize(obj, "n_paths", path, errs).unwrap_or(2000);
    if n_paths == 0 {
        errs.push(format!("{}: must be >= 1", at(path, "n_paths")));
    }

    let lattice_resolution = get_f64(obj, "lattice_resolution", path, errs);
    if let Some(r) = lattice_resolution {
        if !(r > 0.0) {
            errs.push(format!("{}: must be > 0", at(path, "lattice_resolution")));
        }
    }
    if let (Some(eps), Some(r)) = (&epsilon_schedule, lattice_resolution) {
        if let Some(&eps_min) = eps.last() {
            if eps_min > 0.0 && r > eps_min * eps_min / 4.0 {
                errs.push(format!(
                    "{}: {r} exceeds (min epsilon)^2/4 = {}",
                    at(path, "lattice_resolution"),
                    eps_min * eps_min / 4.0
                ));
            }
        }
    }

    let max_nodes = get_usize(obj, "max_nodes", path, errs).unwrap_or(1 << 20);
    let max_pairs = get_usize(obj, "max_pairs", path, errs).unwrap_or(GridLimits::default().max_pairs);

    let scales = match get_f64_array(obj, "scales", path, errs) {
        Some(s) => {
            require_decreasing(&s, &at(path, "scales"), errs);
            if s.iter().any(|x| *x >= 1.0) {
                errs.push(format!("{}: entries must be < 1", at(path, "scales")));
            }
            s
        }
        None => default_scale_schedule(),
    };

    let growth_factor = get_f64(obj, "growth_factor", path, errs).unwrap_or(1.5);
    if !(growth_factor > 1.0) {
        errs.push(format!("{}: must be > 1", at(path, "growth_factor")));
    }

    let probe = match obj.get("probe") {
        None => None,
        Some(Value::Object(p)) => {
            let ppath = at(path, "probe");
            for key in p.keys() {
                match key.as_str() {
                    "alpha" | "time_rank" | "u_box" | "u_hole" | "u_cells" | "epsilon"
                    | "cap_resolutions" => {}
                    _ => errs.push(format!("{ppath}.{key}: unknown key")),
                }
            }
            let alpha = get_f64(p, "alpha", &ppath, errs);
            let time_rank = get_usize(p, "time_rank", &ppath, errs);
            let u_box = get_f64(p, "u_box", &ppath, errs);
            let u_hole = get_f64(p, "u_hole", &ppath, errs);
            let u_cells = get_usize(p, "u_cells", &ppath, errs);
            let epsilon = get_f64(p, "epsilon", &ppath, errs);
            let cap_resolutions = get_f64_array(p, "cap_resolutions", &ppath, errs);
            if let Some(c) = &cap_resolutions {
                require_decreasing(c, &format!("{ppath}.cap_resolutions"), errs);
            }
            match (alpha, time_rank, u_box, u_hole, u_cells, epsilon, cap_resolutions) {
                (Some(alpha), Some(time_rank), Some(u_box), Some(u_hole), Some(u_cells), Some(epsilon), Some(cap_resolutions)) => {
                    Some(ProbeSettings {
                        alpha,
                        time_rank,
                        u_box,
                        u_hole,
                        u_cells,
                        epsilon,
                        cap_resolutions,
                    })
                }
                _ => {
                    errs.push(format!(
                        "{ppath}: needs alpha, time_rank, u_box, u_hole, u_cells, epsilon, cap_resolutions"
                    ));
                    None
                }
            }
        }
        Some(_) => {
            errs.push(format!("{}: expected an object", at(path, "probe")));
            None
        }
    };

    let mut studies = Vec::new();
    if let Some(v) = obj.get("studies") {
        if depth >= 1 {
            errs.push(format!(
                "{}: batteries cannot nest inside batteries",
                at(path, "studies")
            ));
        } else {
            match v.as_array() {
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        let ipath = format!("{}[{i}]", at(path, "studies"));
                        let Some(study) = item.as_object() else {
                            errs.push(format!("{ipath}: expected an object"));
                            continue;
                        };
                        for key in study.keys() {
                            if key != "name" && key != "config" {
                                errs.push(format!("{ipath}.{key}: unknown key"));
                            }
                        }
                        let name = match study.get("name") {
                            Some(Value::String(s))
                                if !s.is_empty() && !s.contains('/') && !s.contains('\\') =>
                            {
                                s.clone()
                            }
                            _ => {
                                errs.push(format!(
                                    "{ipath}.name: expected a nonempty name without path separators"
                                ));
                                continue;
                            }
                        };
                        let Some(sub) = study.get("config") else {
                            errs.push(format!("{ipath}.config: missing"));
                            continue;
                        };
                        if let Some(sub_cfg) =
                            parse_value(sub, &format!("{ipath}.config"), depth + 1, digest, errs)
                        {
                            if sub_cfg.mode == Mode::FullBattery {
                                errs.push(format!("{ipath}.config.mode: cannot be full_battery"));
                            } else {
                                studies.push((name, sub_cfg));
                            }
                        }
                    }
                }
                None => errs.push(format!("{}: expected an array", at(path, "studies"))),
            }
        }
    }

    // Per-mode requirements.
    if let Some(mode) = mode {
        let need = |key: &str, present: bool, errs: &mut Vec<String>| {
            if !present {
                errs.push(format!(
                    "{}: required for mode {}",
                    at(path, key),
                    mode.as_str()
                ));
            }
        };
        match mode {
            Mode::Capacity => {
                need("time_set", time_set.is_some(), errs);
                need("space_set", space_set.is_some(), errs);
                need("gamma", gamma.is_some(), errs);
                need("refinement", refinement.is_some(), errs);
            }
            Mode::Dimension | Mode::GammaStar => {
                need("time_set", time_set.is_some(), errs);
                need("space_set", space_set.is_some(), errs);
            }
            Mode::Hit => {
                need("time_set", time_set.is_some(), errs);
                need("space_set", space_set.is_some(), errs);
                need("epsilon_schedule", epsilon_schedule.is_some(), errs);
                need("lattice_resolution", lattice_resolution.is_some(), errs);
            }
            Mode::Codimension => {
                need("space_set", space_set.is_some(), errs);
                need("probe", probe.is_some(), errs);
            }
            Mode::FullBattery => {
                if obj.get("studies").is_none() || (studies.is_empty() && depth == 0) {
                    errs.push(format!(
                        "{}: full_battery needs a nonempty studies list",
                        at(path, "studies")
                    ));
                }
            }
        }
    }

    Some(ExperimentConfig {
        mode: mode?,
        seed: seed?,
        out_prefix,
        time_set,
        space_set,
        gamma,
        diagonal_policy,
        refinement,
        solver,
        epsilon_schedule,
        n_paths,
        lattice_resolution,
        max_nodes,
        max_pairs,
        scales,
        probe,
        growth_factor,
        studies,
        digest,
    })
}

/// One CSV table of a report. Cells are preformatted; numeric cells go
/// through the shortest-roundtrip formatter so reruns match byte for byte.
/// Cell content never contains commas, so no quoting is needed.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub out_prefix: String,
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
    pub config_digest: u64,
    pub seed: u64,
}

/// Typed outcome of a study, for callers that assert on results rather than
/// reading CSV back.
#[derive(Debug, Clone)]
pub enum StudyResult {
    Capacity {
        estimates: Vec<CapacityEstimate>,
        trend: CapacityTrend,
    },
    Dimension {
        time: DimReport,
        space: DimReport,
        product_estimate: f64,
        product_r2: f64,
    },
    GammaStar {
        dim_h_e: f64,
        dim_h_f: f64,
        dim_rho: f64,
        bracket: GammaStarBracket,
        closed_form: f64,
        verdict: HitVerdict,
        intersection_dim: Option<f64>,
    },
    Hit(HitEstimate),
    Codimension(CodimReport),
    Battery(Vec<(String, StudyResult)>),
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub bundle: ReportBundle,
    pub result: StudyResult,
}

fn missing(field: &str) -> Error {
    // Parse-time checks make this unreachable for parsed configs; guards
    // hand-built ones.
    Error::InvalidInput(format!("config field {field} is required for this mode"))
}

/// Run a parsed experiment. Pure compute: nothing is written to disk until
/// `emit_report`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let mut tables = Vec::new();
    let mut summary = Vec::new();
    summary.push(format!("mode: {}", cfg.mode.as_str()));
    summary.push(format!("seed: {}", cfg.seed));
    let result = match cfg.mode {
        Mode::Capacity => run_capacity(cfg, &mut tables, &mut summary)?,
        Mode::Dimension => run_dimension(cfg, &mut tables, &mut summary)?,
        Mode::GammaStar => run_gamma_star(cfg, &mut tables, &mut summary)?,
        Mode::Hit => run_hit(cfg, &mut tables, &mut summary)?,
        Mode::Codimension => run_codimension(cfg, &mut tables, &mut summary)?,
        Mode::FullBattery => {
            let mut results = Vec::new();
            for (name, sub) in &cfg.studies {
                let run = run_experiment(sub)?;
                for mut table in run.bundle.tables {
                    table.name = format!("{name}_{}", table.name);
                    tables.push(table);
                }
                summary.push(format!("--- study {name} ---"));
                summary.extend(run.bundle.summary);
                results.push((name.clone(), run.result));
            }
            StudyResult::Battery(results)
        }
    };
    Ok(ExperimentRun {
        bundle: ReportBundle {
            out_prefix: cfg.out_prefix.clone(),
            tables,
            summary,
            config_digest: cfg.digest,
            seed: cfg.seed,
        },
        result,
    })
}

fn run_capacity(
    cfg: &ExperimentConfig,
    tables: &mut Vec<Table>,
    summary: &mut Vec<String>,
) -> Result<StudyResult> {
    let time_set = cfg.time_set.as_ref().ok_or_else(|| missing("time_set"))?;
    let space_set = cfg.space_set.as_ref().ok_or_else(|| missing("space_set"))?;
    let gamma = cfg.gamma.ok_or_else(|| missing("gamma"))?;
    let refinement = cfg.refinement.as_ref().ok_or_else(|| missing("refinement"))?;
    let limits = GridLimits {
        max_pairs: cfg.max_pairs,
    };
    let mut estimates = Vec::new();
    let mut rows = Vec::new();
    for (level, (tr, sr)) in refinement
        .time_resolutions
        .iter()
        .zip(&refinement.space_resolutions)
        .enumerate()
    {
        let grid = build_product_grid(time_set, space_set, *tr, *sr, &limits)?;
        let est = thermal_capacity(&grid, gamma, cfg.diagonal_policy, &cfg.solver)?;
        summary.push(format!(
            "level {level}: pairs={} energy={} capacity={}",
            est.n_pairs,
            fmt_f64(est.energy),
            fmt_f64(est.capacity)
        ));
        rows.push(vec![
            level.to_string(),
            est.n_pairs.to_string(),
            fmt_f64(est.energy),
            fmt_f64(est.capacity),
        ]);
        estimates.push(est);
    }
    let energies: Vec<f64> = estimates.iter().map(|e| e.energy).collect();
    let trend = classify_capacity_trend(&energies, cfg.solver.divergence_threshold, cfg.growth_factor);
    summary.push(format!(
        "trend: {}",
        match trend {
            CapacityTrend::Positive => "capacity stays positive under refinement",
            CapacityTrend::Vanishing => "energies diverge; capacity reads as zero",
        }
    ));
    tables.push(Table {
        name: "capacity".into(),
        header: vec![
            "refinement_level".into(),
            "n_pairs".into(),
            "energy_star".into(),
            "capacity".into(),
        ],
        rows,
    });
    Ok(StudyResult::Capacity { estimates, trend })
}

fn count_table(name: &str, scales: &[f64], counts: &[usize]) -> Table {
    Table {
        name: name.into(),
        header: vec!["scale".into(), "count".into()],
        rows: scales
            .iter()
            .zip(counts)
            .map(|(s, c)| vec![fmt_f64(*s), c.to_string()])
            .collect(),
    }
}

fn run_dimension(
    cfg: &ExperimentConfig,
    tables: &mut Vec<Table>,
    summary: &mut Vec<String>,
) -> Result<StudyResult> {
    let time_set = cfg.time_set.as_ref().ok_or_else(|| missing("time_set"))?;
    let space_set = cfg.space_set.as_ref().ok_or_else(|| missing("space_set"))?;
    let r_min = *cfg.scales.last().unwrap();
    let limits = DiscretizeLimits::default();

    let sample = |spec: &SetSpec, res: f64| -> Result<Vec<Vec<f64>>> {
        Ok(discretize_set(spec, res, &limits)?
            .into_iter()
            .map(|c| c.rep)
            .collect())
    };

    // Euclidean counts of each factor at the scale schedule.
    let pts_time = sample(time_set, r_min / 4.0)?;
    let pts_space = sample(space_set, r_min / 4.0)?;
    let rep_time = box_dimension(&pts_time, BoxMetric::Euclidean, &cfg.scales)?;
    let rep_space = box_dimension(&pts_space, BoxMetric::Euclidean, &cfg.scales)?;

    // Anisotropic product counts factor exactly: time boxes of side r^2
    // times state boxes of side r.
    let scales_sq: Vec<f64> = cfg.scales.iter().map(|r| r * r).collect();
    let pts_time_fine = sample(time_set, r_min * r_min / 4.0)?;
    let rep_time_sq = box_dimension(&pts_time_fine, BoxMetric::Euclidean, &scales_sq)?;
    let product_counts: Vec<usize> = rep_time_sq
        .counts
        .iter()
        .zip(&rep_space.counts)
        .map(|(a, b)| a * b)
        .collect();
    let (product_estimate, product_r2) = if product_counts.iter().all(|&c| c == 1) {
        (0.0, 1.0)
    } else {
        let xs: Vec<f64> = cfg.scales.iter().map(|r| (1.0 / r).ln()).collect();
        let ys: Vec<f64> = product_counts.iter().map(|&c| (c as f64).ln()).collect();
        let (slope, _, r2) = linear_fit(&xs, &ys);
        (slope, r2)
    };

    summary.push(format!(
        "time set: estimate={} r2={}",
        fmt_f64(rep_time.estimate),
        fmt_f64(rep_time.fit_r2)
    ));
    summary.push(format!(
        "space set: estimate={} r2={}",
        fmt_f64(rep_space.estimate),
        fmt_f64(rep_space.fit_r2)
    ));
    summary.push(format!(
        "product (time squared): estimate={} r2={}",
        fmt_f64(product_estimate),
        fmt_f64(product_r2)
    ));
    tables.push(count_table("dim_time", &cfg.scales, &rep_time.counts));
    tables.push(count_table("dim_space", &cfg.scales, &rep_space.counts));
    tables.push(count_table("dim_product", &cfg.scales, &product_counts));
    Ok(StudyResult::Dimension {
        time: rep_time,
        space: rep_space,
        product_estimate,
        product_r2,
    })
}

fn run_gamma_star(
    cfg: &ExperimentConfig,
    tables: &mut Vec<Table>,
    summary: &mut Vec<String>,
) -> Result<StudyResult> {
    let time_set = cfg.time_set.as_ref().ok_or_else(|| missing("time_set"))?;
    let space_set = cfg.space_set.as_ref().ok_or_else(|| missing("space_set"))?;
    let (dim_h_e, dim_p_e) = closed_form_dimensions(time_set)?;
    let (dim_h_f, dim_p_f) = closed_form_dimensions(space_set)?;
    debug_assert_eq!(dim_h_e, dim_p_e);
    debug_assert_eq!(dim_h_f, dim_p_f);
    let d = space_set.ambient_dim();
    let n = time_set.ambient_dim();
    let dim_rho = dim_h_f + 2.0 * dim_h_e;
    let bracket = gamma_star_bracket(dim_rho, dim_h_e, dim_h_f, d)?;
    let closed_form = gamma_star_closed_form(dim_h_e, dim_h_f, d)?;
    let verdict = hit_dichotomy(dim_rho, d)?;
    let f_fat = matches!(
        space_set,
        SetSpec::IntervalBox { .. } | SetSpec::Ball { .. }
    );
    let intersection_dim = if f_fat {
        Some(intersection_dim_formula(dim_rho, dim_h_e, n, d, true)?)
    } else if d >= 2 * n {
        Some(intersection_dim_formula(dim_rho, dim_h_e, n, d, false)?)
    } else {
        None
    };

    let mut rows = vec![
        vec!["dim_h_time".into(), fmt_f64(dim_h_e)],
        vec!["dim_h_space".into(), fmt_f64(dim_h_f)],
        vec!["d".into(), d.to_string()],
        vec!["dim_rho_product".into(), fmt_f64(dim_rho)],
        vec!["gamma_star_lower".into(), fmt_f64(bracket.lower)],
        vec!["gamma_star_upper".into(), fmt_f64(bracket.upper)],
        vec!["gamma_star_closed_form".into(), fmt_f64(closed_form)],
    ];
    if let Some(i) = intersection_dim {
        rows.push(vec!["intersection_dim".into(), fmt_f64(i)]);
    }
    tables.push(Table {
        name: "gamma_star".into(),
        header: vec!["quantity".into(), "value".into()],
        rows,
    });
    summary.push(format!(
        "product dimension {} against d={d}: {}",
        fmt_f64(dim_rho),
        match verdict {
            HitVerdict::Hits => "hits with positive probability",
            HitVerdict::NoHit => "polar (no hits)",
            HitVerdict::Critical => "critical case",
        }
    ));
    summary.push(format!(
        "gamma*: [{}, {}], closed form {}",
        fmt_f64(bracket.lower),
        fmt_f64(bracket.upper),
        fmt_f64(closed_form)
    ));
    if let Some(i) = intersection_dim {
        summary.push(format!("intersection dimension: {}", fmt_f64(i)));
    }
    Ok(StudyResult::GammaStar {
        dim_h_e,
        dim_h_f,
        dim_rho,
        bracket,
        closed_form,
        verdict,
        intersection_dim,
    })
}

fn run_hit(
    cfg: &ExperimentConfig,
    tables: &mut Vec<Table>,
    summary: &mut Vec<String>,
) -> Result<StudyResult> {
    let time_set = cfg.time_set.as_ref().ok_or_else(|| missing("time_set"))?;
    let space_set = cfg.space_set.as_ref().ok_or_else(|| missing("space_set"))?;
    let eps = cfg
        .epsilon_schedule
        .as_ref()
        .ok_or_else(|| missing("epsilon_schedule"))?;
    let params = HitParams {
        n_paths: cfg.n_paths,
        lattice_resolution: cfg
            .lattice_resolution
            .ok_or_else(|| missing("lattice_resolution"))?,
        seed: cfg.seed,
        max_nodes: cfg.max_nodes,
    };
    let est = estimate_hit_prob(time_set, space_set, eps, &params)?;
    tables.push(Table {
        name: "hit".into(),
        header: vec![
            "epsilon".into(),
            "rate".into(),
            "wilson_halfwidth".into(),
        ],
        rows: est
            .epsilon_schedule
            .iter()
            .zip(est.rates.iter().zip(&est.wilson_halfwidths))
            .map(|(e, (r, w))| vec![fmt_f64(*e), fmt_f64(*r), fmt_f64(*w)])
            .collect(),
    });
    summary.push(format!(
        "paths={} floor={} decay_exponent={}",
        est.n_paths,
        fmt_f64(est.floor),
        fmt_f64(est.decay_exponent)
    ));
    summary.push(format!(
        "verdict: {}",
        if est.positive {
            "positive hit probability"
        } else {
            "no evidence of hits in the limit"
        }
    ));
    Ok(StudyResult::Hit(est))
}

fn run_codimension(
    cfg: &ExperimentConfig,
    tables: &mut Vec<Table>,
    summary: &mut Vec<String>,
) -> Result<StudyResult> {
    let space_set = cfg.space_set.as_ref().ok_or_else(|| missing("space_set"))?;
    let p = cfg.probe.as_ref().ok_or_else(|| missing("probe"))?;
    let probe = CodimProbe {
        alpha: p.alpha,
        time_rank: p.time_rank,
        u_box: p.u_box,
        u_hole: p.u_hole,
        u_cells: p.u_cells,
        epsilon: p.epsilon,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        cap_resolutions: p.cap_resolutions.clone(),
        solver: cfg.solver,
        growth_factor: cfg.growth_factor,
    };
    let rep = codimension_probe(space_set, &probe)?;
    tables.push(Table {
        name: "codim_trend".into(),
        header: vec!["resolution".into(), "riesz_energy".into()],
        rows: p
            .cap_resolutions
            .iter()
            .zip(&rep.trend_energies)
            .map(|(r, e)| vec![fmt_f64(*r), fmt_f64(*e)])
            .collect(),
    });
    summary.push(format!(
        "gamma={} hits={}/{} rate={}",
        fmt_f64(rep.gamma),
        rep.hits,
        rep.n_paths,
        fmt_f64(rep.hit_rate)
    ));
    summary.push(format!(
        "capacity side: {}",
        if rep.capacity_positive {
            "positive"
        } else {
            "vanishing"
        }
    ));
    summary.push(format!(
        "agreement: {}",
        if (rep.hits > 0) == rep.capacity_positive {
            "hit evidence matches the capacity verdict"
        } else {
            "hit evidence contradicts the capacity verdict"
        }
    ));
    Ok(StudyResult::Codimension(rep))
}

/// Write the bundle's tables and summary under `out_dir`, returning the
/// paths written. File contents depend only on the config and seed.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for table in &bundle.tables {
        let path = out_dir.join(format!("{}_{}.csv", bundle.out_prefix, table.name));
        fs::write(&path, table.to_csv())?;
        written.push(path);
    }
    let mut text = format!(
        "config_digest: {:016x}\nseed: {}\n",
        bundle.config_digest, bundle.seed
    );
    for line in &bundle.summary {
        text.push_str(line);
        text.push('\n');
    }
    let path = out_dir.join(format!("{}_summary.txt", bundle.out_prefix));
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
