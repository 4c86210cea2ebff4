//! Command implementations and error-to-exit-code mapping.

use quadchab::hensel::{HenselError, RootStatus};
use quadchab::icc::{self, CharacterLabel, IdeleClassCharacter, PrimeIdealData, QuadraticFieldData};
use quadchab::json::{
    AlphaJobJson, BiellipticPrimeJson, BundleJson, FieldFixtureJson, HenselJobJson, JsonError,
    PadicNumberJson, RootReportJson, ScalarJson, SeriesJson, SeriesRefJson, TargetSelectorJson,
    TsetJobJson,
};
use quadchab::mseries::TruncatedSeries;
use quadchab::padic::{PadicContext, PadicError, PadicNumber};
use quadchab::qc::{
    self, AlphaCoefficients, BiellipticPrimeData, CongruenceFilter, FilterVerdict,
    FunctionalMatrix, HeightTable, QcError, RhoSystem, TSet,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input: exit code 1.
    Input(String),
    /// A result could not be certified at the working precision: exit 2.
    Precision(String),
    /// The configured evaluation budget was exhausted: exit 3.
    Budget(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Precision(m) => write!(f, "precision failure: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Precision(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

fn classify_padic(e: &PadicError) -> CliError {
    match e {
        PadicError::PrecisionExhausted | PadicError::InsufficientPrecision { .. } => {
            CliError::Precision(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    }
}

fn classify_hensel(e: &HenselError) -> CliError {
    match e {
        HenselError::BudgetExceeded(_) => CliError::Budget(e.to_string()),
        HenselError::Padic(p) => classify_padic(p),
        HenselError::Series(s) => classify_series(s),
        other => CliError::Input(other.to_string()),
    }
}

fn classify_series(e: &quadchab::mseries::MSeriesError) -> CliError {
    match e {
        quadchab::mseries::MSeriesError::Padic(p) => classify_padic(p),
        quadchab::mseries::MSeriesError::InsufficientCoefficientPrecision { .. } => {
            CliError::Precision(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    }
}

fn classify_qc(e: &QcError) -> CliError {
    match e {
        QcError::Padic(p) => classify_padic(p),
        QcError::Series(s) => classify_series(s),
        QcError::Hensel(h) => classify_hensel(h),
        other => CliError::Input(other.to_string()),
    }
}

fn classify_icc(e: &icc::IccError) -> CliError {
    match e {
        icc::IccError::PrecisionExhausted => CliError::Precision(e.to_string()),
        icc::IccError::Padic(p) => classify_padic(p),
        other => CliError::Input(other.to_string()),
    }
}

fn classify_json(e: &JsonError) -> CliError {
    match e {
        JsonError::Padic(p) => classify_padic(p),
        JsonError::Series(s) => classify_series(s),
        JsonError::Icc(i) => classify_icc(i),
        other => CliError::Input(other.to_string()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn make_context(p: u64, prec: u32) -> CliResult<PadicContext> {
    if prec < 4 {
        return Err(CliError::Input(format!(
            "working precision must be at least 4, got {prec}"
        )));
    }
    PadicContext::new(p, prec).map_err(|e| classify_padic(&e))
}

/// The run manifest echoed into every output.
#[derive(Serialize)]
struct ManifestEcho {
    command: String,
    p: u64,
    prec: u32,
    seed: u64,
    inputs: Vec<String>,
}

// ---------------------------------------------------------------- icc basis

#[derive(Serialize)]
pub struct IccBasisOutput {
    manifest: ManifestEcho,
    d: i64,
    class_number: u32,
    dimension: usize,
    characters: Vec<CharacterOutput>,
}

#[derive(Serialize)]
struct CharacterOutput {
    label: CharacterLabel,
    trace: [PadicNumberJson; 2],
    branch_constants: [PadicNumberJson; 2],
    unit_equation_residual: PadicNumberJson,
}

fn load_field(path: &Path) -> CliResult<(QuadraticFieldData, Vec<PrimeIdealData>)> {
    let fixture: FieldFixtureJson = read_json(path)?;
    fixture.to_field().map_err(|e| classify_json(&e))
}

pub fn cmd_icc_basis(field: &Path, p: u64, prec: u32, seed: u64) -> CliResult<IccBasisOutput> {
    let ctx = make_context(p, prec)?;
    let (field_data, primes) = load_field(field)?;
    let sctx = icc::SplitPrimeContext::new(&field_data, ctx).map_err(|e| classify_icc(&e))?;
    let mut basis =
        icc::character_space_basis(&field_data, &sctx).map_err(|e| classify_icc(&e))?;
    let p_primes: Vec<&PrimeIdealData> =
        primes.iter().filter(|q| q.residue_char == p).collect();
    for chi in &mut basis {
        if !p_primes.is_empty() {
            chi.calibrate_branches(&p_primes, &sctx)
                .map_err(|e| classify_icc(&e))?;
        }
    }
    let characters = basis
        .iter()
        .map(|chi| {
            let residual = icc::unit_equation_residual(chi, &field_data, &sctx)
                .map_err(|e| classify_icc(&e))?;
            Ok(CharacterOutput {
                label: chi.label,
                trace: [
                    PadicNumberJson::from_number(&chi.trace[0]),
                    PadicNumberJson::from_number(&chi.trace[1]),
                ],
                branch_constants: [
                    PadicNumberJson::from_number(&chi.branches[0].log_p),
                    PadicNumberJson::from_number(&chi.branches[1].log_p),
                ],
                unit_equation_residual: PadicNumberJson::from_number(&residual),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(IccBasisOutput {
        manifest: ManifestEcho {
            command: "icc basis".into(),
            p,
            prec,
            seed,
            inputs: vec![field.display().to_string()],
        },
        d: field_data.d,
        class_number: field_data.class_number,
        dimension: characters.len(),
        characters,
    })
}

// ------------------------------------------------------------- hensel solve

#[derive(Serialize)]
pub struct HenselSolveOutput {
    manifest: ManifestEcho,
    target_depth: u32,
    reports: Vec<RootReportJson>,
}

pub fn cmd_hensel_solve(
    input: &Path,
    depth: Option<u32>,
    budget: Option<u64>,
    seed: u64,
) -> CliResult<HenselSolveOutput> {
    let job: HenselJobJson = read_json(input)?;
    let ctx = make_context(job.p, job.prec)?;
    let raw = job
        .system
        .to_system(&ctx)
        .map_err(|e| classify_json(&e))?;
    let sys = if raw.is_normalized() {
        raw
    } else {
        raw.rescale_and_normalize()
            .map_err(|e| classify_series(&e))?
            .0
    };
    let mut cfg = job.config.to_config().map_err(|e| classify_json(&e))?;
    if let Some(n) = depth {
        cfg = quadchab::hensel::SearchConfig::with_fallback(
            n,
            cfg.first_fallback_depth.min(n),
        )
        .map_err(|e| classify_hensel(&e))?;
    }
    if let Some(b) = budget {
        cfg.budget = b;
    }
    let reports = quadchab::hensel::solve_system(&sys, &cfg).map_err(|e| classify_hensel(&e))?;
    Ok(HenselSolveOutput {
        manifest: ManifestEcho {
            command: "hensel solve".into(),
            p: job.p,
            prec: job.prec,
            seed,
            inputs: vec![input.display().to_string()],
        },
        target_depth: cfg.target_depth,
        reports: reports
            .iter()
            .map(|r| RootReportJson::from_report(r, cfg.target_depth))
            .collect(),
    })
}

// ---------------------------------------------------------------- qc alphas

#[derive(Serialize)]
pub struct QcAlphasOutput {
    manifest: ManifestEcho,
    alphas: BTreeMap<String, Vec<AlphaEntry>>,
    relations: Vec<Vec<PadicNumberJson>>,
}

#[derive(Serialize)]
struct AlphaEntry {
    i: usize,
    j: usize,
    value: PadicNumberJson,
}

fn parse_matrix(
    rows: &[Vec<ScalarJson>],
    ctx: &PadicContext,
) -> CliResult<Vec<Vec<PadicNumber>>> {
    rows.iter()
        .map(|row| {
            row.iter()
                .map(|s| s.to_number(ctx).map_err(|e| classify_json(&e)))
                .collect()
        })
        .collect()
}

pub fn cmd_qc_alphas(input: &Path, seed: u64) -> CliResult<QcAlphasOutput> {
    let job: AlphaJobJson = read_json(input)?;
    let ctx = make_context(job.p, job.prec)?;
    let f = FunctionalMatrix::new(parse_matrix(&job.functionals, &ctx)?)
        .map_err(|e| classify_qc(&e))?;
    let mut alphas = BTreeMap::new();
    for (label, table) in &job.heights {
        let h = HeightTable::new(parse_matrix(table, &ctx)?).map_err(|e| classify_qc(&e))?;
        let a = qc::solve_alpha(&f, &h).map_err(|e| classify_qc(&e))?;
        let entries = a
            .iter()
            .map(|((i, j), v)| AlphaEntry {
                i: *i,
                j: *j,
                value: PadicNumberJson::from_number(v),
            })
            .collect();
        alphas.insert(label.clone(), entries);
    }
    let relations = qc::relation_functions(&f)
        .map_err(|e| classify_qc(&e))?
        .into_iter()
        .map(|row| row.iter().map(PadicNumberJson::from_number).collect())
        .collect();
    Ok(QcAlphasOutput {
        manifest: ManifestEcho {
            command: "qc alphas".into(),
            p: job.p,
            prec: job.prec,
            seed,
            inputs: vec![input.display().to_string()],
        },
        alphas,
        relations,
    })
}

// ----------------------------------------------------------------- qc tsets

#[derive(Serialize)]
pub struct QcTsetsOutput {
    manifest: ManifestEcho,
    /// T-sets per character label; bielliptic tables yield one per k.
    hyperelliptic: BTreeMap<String, Vec<PadicNumberJson>>,
    bielliptic: BTreeMap<String, BTreeMap<String, Vec<PadicNumberJson>>>,
}

struct CharacterSetup {
    label: String,
    chi: IdeleClassCharacter,
}

fn setup_characters(
    labels: &[String],
    field: &QuadraticFieldData,
    sctx: &icc::SplitPrimeContext,
    primes: &[PrimeIdealData],
) -> CliResult<Vec<CharacterSetup>> {
    let p = sctx.ctx.p();
    let p_primes: Vec<&PrimeIdealData> =
        primes.iter().filter(|q| q.residue_char == p).collect();
    labels
        .iter()
        .map(|label| {
            let mut chi = match label.as_str() {
                "cyclotomic" => IdeleClassCharacter::cyclotomic(&sctx.ctx),
                "anticyclotomic" => icc::anticyclotomic_character(field, sctx)
                    .map_err(|e| classify_icc(&e))?,
                other => {
                    return Err(CliError::Input(format!(
                        "unknown character label {other:?} (use cyclotomic or anticyclotomic)"
                    )))
                }
            };
            if !p_primes.is_empty() {
                chi.calibrate_branches(&p_primes, sctx)
                    .map_err(|e| classify_icc(&e))?;
            }
            Ok(CharacterSetup {
                label: label.clone(),
                chi,
            })
        })
        .collect()
}

fn find_prime<'a>(primes: &'a [PrimeIdealData], label: &str) -> CliResult<&'a PrimeIdealData> {
    primes
        .iter()
        .find(|q| q.label == label)
        .ok_or_else(|| CliError::Input(format!("prime {label:?} not in the field fixture")))
}

fn bielliptic_data(
    tables: &[BiellipticPrimeJson],
    chi: &IdeleClassCharacter,
    field: &QuadraticFieldData,
    sctx: &icc::SplitPrimeContext,
    primes: &[PrimeIdealData],
) -> CliResult<Vec<BiellipticPrimeData>> {
    let parse_multiples = |mults: &[String], chi_q: &PadicNumber| -> CliResult<Vec<PadicNumber>> {
        mults
            .iter()
            .map(|m| {
                let r = quadchab::json::parse_rational(m).map_err(|e| classify_json(&e))?;
                chi_q.scale_rational(&r).map_err(|e| classify_padic(&e))
            })
            .collect()
    };
    tables
        .iter()
        .map(|t| {
            let q = find_prime(primes, &t.prime)?;
            let chi_q =
                icc::local_value_away_from_p(chi, q, field, sctx).map_err(|e| classify_icc(&e))?;
            let one = |s: &String| -> CliResult<PadicNumber> {
                let r = quadchab::json::parse_rational(s).map_err(|e| classify_json(&e))?;
                chi_q.scale_rational(&r).map_err(|e| classify_padic(&e))
            };
            Ok(BiellipticPrimeData {
                label: t.prime.clone(),
                chi_q_pi: chi_q.clone(),
                ord_a0: t.ord_a0,
                w_unit: [
                    parse_multiples(&t.w_unit.e1, &chi_q)?,
                    parse_multiples(&t.w_unit.e2, &chi_q)?,
                ],
                w_plus: [
                    parse_multiples(&t.w_plus.e1, &chi_q)?,
                    parse_multiples(&t.w_plus.e2, &chi_q)?,
                ],
                h_q_branch_point: [one(&t.h_q.e1)?, one(&t.h_q.e2)?],
            })
        })
        .collect()
}

pub fn cmd_qc_tsets(input: &Path, seed: u64) -> CliResult<QcTsetsOutput> {
    let job: TsetJobJson = read_json(input)?;
    let ctx = make_context(job.p, job.prec)?;
    let guard = job.guard.unwrap_or(2);
    let (field, primes) = match (&job.field, &job.field_file) {
        (Some(f), _) => f.to_field().map_err(|e| classify_json(&e))?,
        (None, Some(path)) => load_field(&crate::resolve_relative(input, path))?,
        (None, None) => {
            return Err(CliError::Input(
                "tset job needs a field or field_file".into(),
            ))
        }
    };
    let sctx = icc::SplitPrimeContext::new(&field, ctx).map_err(|e| classify_icc(&e))?;
    let chars = setup_characters(&job.characters, &field, &sctx, &primes)?;
    let mut hyper = BTreeMap::new();
    let mut biell = BTreeMap::new();
    for cs in &chars {
        if !job.hyperelliptic_tables.is_empty() {
            let tables = job
                .hyperelliptic_tables
                .iter()
                .map(|t| {
                    let q = find_prime(&primes, &t.prime)?;
                    let chi_q = icc::local_value_away_from_p(&cs.chi, q, &field, &sctx)
                        .map_err(|e| classify_icc(&e))?;
                    let mults = t
                        .multiples
                        .iter()
                        .map(|m| quadchab::json::parse_rational(m).map_err(|e| classify_json(&e)))
                        .collect::<CliResult<Vec<_>>>()?;
                    qc::LocalHeightValueSet::from_multiples(t.prime.clone(), &mults, &chi_q)
                        .map_err(|e| classify_qc(&e))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let t = qc::assemble_tset_hyperelliptic(&ctx, &tables, guard)
                .map_err(|e| classify_qc(&e))?;
            hyper.insert(
                cs.label.clone(),
                t.values().iter().map(PadicNumberJson::from_number).collect(),
            );
        }
        if !job.bielliptic_tables.is_empty() {
            let data = bielliptic_data(&job.bielliptic_tables, &cs.chi, &field, &sctx, &primes)?;
            let mut per_k = BTreeMap::new();
            for k in [1usize, 2] {
                let t = qc::assemble_tset_bielliptic(&ctx, &data, k, guard)
                    .map_err(|e| classify_qc(&e))?;
                per_k.insert(
                    format!("k{k}"),
                    t.values().iter().map(PadicNumberJson::from_number).collect(),
                );
            }
            biell.insert(cs.label.clone(), per_k);
        }
    }
    Ok(QcTsetsOutput {
        manifest: ManifestEcho {
            command: "qc tsets".into(),
            p: job.p,
            prec: job.prec,
            seed,
            inputs: vec![input.display().to_string()],
        },
        hyperelliptic: hyper,
        bielliptic: biell,
    })
}

// ------------------------------------------------------------------- qc run

#[derive(Serialize)]
pub struct QcRunOutput {
    manifest: ManifestEcho,
    tsets: BTreeMap<String, BTreeMap<String, Vec<PadicNumberJson>>>,
    alphas: BTreeMap<String, Vec<AlphaEntry>>,
    relations: Vec<Vec<PadicNumberJson>>,
    pairs: Vec<PairOutput>,
    summary: Summary,
}

#[derive(Serialize)]
struct PairOutput {
    label: String,
    k: usize,
    orbit: Vec<String>,
    reports: Vec<PairReportOutput>,
}

#[derive(Serialize)]
struct PairReportOutput {
    branch: qc::PairBranch,
    target_indices: (usize, usize),
    status: RootStatus,
    residue: Vec<u64>,
    approximation: Vec<PadicNumberJson>,
    uniqueness_radius: Option<i64>,
    filter: Option<FilterVerdict>,
}

#[derive(Serialize)]
struct Summary {
    pairs: usize,
    reports: usize,
    certified: usize,
    residual: usize,
    excluded_by_filter: usize,
}

fn load_series_ref(
    r: &SeriesRefJson,
    base: &Path,
    ctx: &PadicContext,
) -> CliResult<TruncatedSeries> {
    let json: SeriesJson = match r {
        SeriesRefJson::Inline(s) => s.clone(),
        SeriesRefJson::File { series_file } => read_json(&crate::resolve_relative(base, series_file))?,
    };
    json.to_series(ctx).map_err(|e| classify_json(&e))
}

pub fn cmd_qc_run(
    bundle_path: &Path,
    depth: Option<u32>,
    budget: Option<u64>,
    seed: u64,
) -> CliResult<QcRunOutput> {
    let bundle: BundleJson = read_json(bundle_path)?;
    let ctx = make_context(bundle.p, bundle.prec)?;
    let guard = bundle.guard.unwrap_or(2);
    let seed = if bundle.seed != 0 { bundle.seed } else { seed };
    let (field, primes) = match (&bundle.field, &bundle.field_file) {
        (Some(f), _) => f.to_field().map_err(|e| classify_json(&e))?,
        (None, Some(path)) => load_field(&crate::resolve_relative(bundle_path, path))?,
        (None, None) => {
            return Err(CliError::Input("bundle needs a field or field_file".into()))
        }
    };
    let sctx = icc::SplitPrimeContext::new(&field, ctx).map_err(|e| classify_icc(&e))?;
    let chars = setup_characters(&bundle.characters, &field, &sctx, &primes)?;
    if chars.is_empty() {
        return Err(CliError::Input("bundle selects no characters".into()));
    }

    // Consistency gate: supplied local-height expansions must satisfy the
    // quasi-parallelogram law before anything else runs.
    for check in &bundle.consistency_checks {
        let h_plus = load_series_ref(&check.h_plus, bundle_path, &ctx)?;
        let h_minus = load_series_ref(&check.h_minus, bundle_path, &ctx)?;
        let h_p = load_series_ref(&check.h_p, bundle_path, &ctx)?;
        let h_r = load_series_ref(&check.h_r, bundle_path, &ctx)?;
        let chi_term = load_series_ref(&check.chi_term, bundle_path, &ctx)?;
        let residual = qc::quasi_parallelogram_residual(&h_plus, &h_minus, &h_p, &h_r, &chi_term)
            .map_err(|e| classify_qc(&e))?;
        if !residual.is_zero() {
            return Err(CliError::Input(format!(
                "consistency check {:?} failed: quasi-parallelogram residual {residual}",
                check.label
            )));
        }
    }

    // Alphas and relations, when functional data is present.
    let mut alphas_out = BTreeMap::new();
    let mut relations_out = Vec::new();
    let mut alpha_values: BTreeMap<String, AlphaCoefficients> = BTreeMap::new();
    if let Some(fm) = &bundle.functional_matrix {
        let f = FunctionalMatrix::new(parse_matrix(fm, &ctx)?).map_err(|e| classify_qc(&e))?;
        if let Some(tables) = &bundle.height_tables {
            for (label, table) in tables {
                let h =
                    HeightTable::new(parse_matrix(table, &ctx)?).map_err(|e| classify_qc(&e))?;
                let a = qc::solve_alpha(&f, &h).map_err(|e| classify_qc(&e))?;
                alphas_out.insert(
                    label.clone(),
                    a.iter()
                        .map(|((i, j), v)| AlphaEntry {
                            i: *i,
                            j: *j,
                            value: PadicNumberJson::from_number(v),
                        })
                        .collect(),
                );
                alpha_values.insert(label.clone(), a);
            }
        }
        relations_out = qc::relation_functions(&f)
            .map_err(|e| classify_qc(&e))?
            .into_iter()
            .map(|row| row.iter().map(PadicNumberJson::from_number).collect())
            .collect();
    }

    // Target sets per character and k.
    let mut tsets_out = BTreeMap::new();
    let mut tsets: BTreeMap<(String, usize), TSet> = BTreeMap::new();
    if !bundle.w_tables.is_empty() {
        for cs in &chars {
            let data = bielliptic_data(&bundle.w_tables, &cs.chi, &field, &sctx, &primes)?;
            let mut per_k = BTreeMap::new();
            for k in [1usize, 2] {
                let t = qc::assemble_tset_bielliptic(&ctx, &data, k, guard)
                    .map_err(|e| classify_qc(&e))?;
                per_k.insert(
                    format!("k{k}"),
                    t.values().iter().map(PadicNumberJson::from_number).collect(),
                );
                tsets.insert((cs.label.clone(), k), t);
            }
            tsets_out.insert(cs.label.clone(), per_k);
        }
    }

    // Search configuration with CLI overrides.
    let mut cfg = bundle.search.to_config().map_err(|e| classify_json(&e))?;
    if let Some(n) = depth {
        cfg = quadchab::hensel::SearchConfig::with_fallback(n, cfg.first_fallback_depth.min(n))
            .map_err(|e| classify_hensel(&e))?;
    }
    if let Some(b) = budget {
        cfg.budget = b;
    }

    // Residue pairs.
    let resolve_targets = |sel: &TargetSelectorJson, k: usize| -> CliResult<TSet> {
        match sel {
            TargetSelectorJson::Named(name) => {
                if name == "zero" {
                    return Ok(TSet::singleton_zero(&ctx));
                }
                let label = match name.strip_prefix("tset") {
                    Some("") => chars[0].label.clone(),
                    Some(rest) => rest
                        .strip_prefix(':')
                        .map(str::to_string)
                        .ok_or_else(|| CliError::Input(format!("bad target selector {name:?}")))?,
                    None => return Err(CliError::Input(format!("bad target selector {name:?}"))),
                };
                tsets
                    .get(&(label.clone(), k))
                    .cloned()
                    .ok_or_else(|| {
                        CliError::Input(format!(
                            "target selector references missing T-set {label:?} for k = {k}"
                        ))
                    })
            }
            TargetSelectorJson::Explicit(values) => {
                let vals = values
                    .iter()
                    .map(|s| {
                        let r = quadchab::json::parse_rational(s).map_err(|e| classify_json(&e))?;
                        Ok(ctx.from_rational(&r))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                TSet::from_values(&ctx, vals, guard).map_err(|e| classify_qc(&e))
            }
        }
    };

    let mut pair_outputs = Vec::new();
    let mut total_reports = 0;
    let mut certified = 0;
    let mut residual = 0;
    let mut excluded = 0;
    for pair in &bundle.residue_pairs {
        if pair.components.len() != 2 || pair.targets.len() != 2 {
            return Err(CliError::Input(format!(
                "pair {:?} must have exactly two components and two targets",
                pair.label
            )));
        }
        let comp0 = load_series_ref(&pair.components[0], bundle_path, &ctx)?;
        let comp1 = load_series_ref(&pair.components[1], bundle_path, &ctx)?;
        let t0 = resolve_targets(&pair.targets[0], pair.k)?;
        let t1 = resolve_targets(&pair.targets[1], pair.k)?;
        let rho = RhoSystem {
            label: pair.label.clone(),
            components: [comp0, comp1],
            targets: [t0, t1],
            symmetry: pair.symmetry,
            orbit: pair.orbit.clone(),
        };
        let reports = qc::solve_residue_pair(&rho, &cfg).map_err(|e| classify_qc(&e))?;
        let filter = match &pair.congruence_filter {
            None => None,
            Some(f) => Some(CongruenceFilter {
                integral_series: load_series_ref(&f.integral, bundle_path, &ctx)?,
                base_integral: {
                    let r = quadchab::json::parse_rational(&f.base_integral)
                        .map_err(|e| classify_json(&e))?;
                    ctx.from_rational(&r)
                },
                reduction_index: f.reduction_index,
                reduction_order: f.reduction_order,
            }),
        };
        let mut report_outputs = Vec::new();
        for r in &reports {
            let verdict = match (&filter, r.report.status) {
                (Some(f), RootStatus::Certified) => {
                    let v = qc::apply_congruence_filter(f, &r.report.approximation)
                        .map_err(|e| classify_qc(&e))?;
                    if matches!(v, FilterVerdict::Excluded { .. }) {
                        excluded += 1;
                    }
                    Some(v)
                }
                _ => None,
            };
            match r.report.status {
                RootStatus::Certified => certified += 1,
                RootStatus::ResidualModPn => residual += 1,
            }
            total_reports += 1;
            report_outputs.push(PairReportOutput {
                branch: r.branch,
                target_indices: r.target_indices,
                status: r.report.status,
                residue: r.report.residue_mod(cfg.target_depth).unwrap_or_default(),
                approximation: r
                    .report
                    .approximation
                    .iter()
                    .map(PadicNumberJson::from_number)
                    .collect(),
                uniqueness_radius: r.report.uniqueness_radius,
                filter: verdict,
            });
        }
        pair_outputs.push(PairOutput {
            label: pair.label.clone(),
            k: pair.k,
            orbit: pair.orbit.clone(),
            reports: report_outputs,
        });
    }

    Ok(QcRunOutput {
        manifest: ManifestEcho {
            command: "qc run".into(),
            p: bundle.p,
            prec: bundle.prec,
            seed,
            inputs: vec![bundle_path.display().to_string()],
        },
        tsets: tsets_out,
        alphas: alphas_out,
        relations: relations_out,
        pairs: pair_outputs,
        summary: Summary {
            pairs: bundle.residue_pairs.len(),
            reports: total_reports,
            certified,
            residual,
            excluded_by_filter: excluded,
        },
    })
}
