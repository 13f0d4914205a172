use std::fs;
use std::path::{Path, PathBuf};

use bmo_core::bmo_map::{
    condition_i_fit, default_family, evaluate_pairs, exhaustive_records, round_trip_iii_to_i, map_check,
    operator_norm_estimate, prop_i_iii_pipeline, sample_pairs, alpha_grid, PointMap,
};
use bmo_core::io::{self, Cell, Table};
use bmo_core::oscillation::{bmo_norm, dual_norm, jn_profile, jn_profile_with, jn_summary, weighted_median};
use bmo_core::space::{build_space, Generator, SpaceSpec};
use bmo_core::uchiyama::{
    choose_q, density_functional, level_bound_check, necessity_check, q_admissible, uchiyama_construct,
    verify_construction, ConstructionParams, IndicatorSet,
};
use bmo_core::{Error, MetricMeasureSpace, Result, ScalarField};
use serde_json::{json, Value};

use crate::{Cli, Command, Kind, Outcome};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Tags a parse or validation error with the file it came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::Json(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_space(path: &Path) -> Result<MetricMeasureSpace> {
    in_file(path, io::read_space(&read(path)?))
}

fn load_field(space: &MetricMeasureSpace, path: &Path) -> Result<ScalarField> {
    in_file(path, io::read_field(space, &read(path)?))
}

fn load_sets(space: &MetricMeasureSpace, paths: &[PathBuf]) -> Result<Vec<IndicatorSet>> {
    paths.iter().map(|p| in_file(p, io::read_set(space, &read(p)?))).collect()
}

fn load_map(space: &MetricMeasureSpace, path: &Path) -> Result<PointMap> {
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    in_file(path, io::read_map(space, &label, &read(path)?))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::GenSpace {
            kind,
            size,
            exponent,
            normalize,
        } => gen_space(cli, *kind, *size, *exponent, *normalize),
        Command::BmoNorm { space, field } => bmo_norm_cmd(space, field),
        Command::DualNorm { space, field } => dual_norm_cmd(cli, space, field),
        Command::JnProfile { space, field, lambdas } => jn_profile_cmd(space, field, lambdas),
        Command::Uchiyama {
            space,
            sets,
            lambda,
            q,
            depth,
            c_d,
        } => uchiyama_cmd(space, sets, *lambda, *q, *depth, *c_d),
        Command::VerifyConstruction {
            space,
            sets,
            fields,
            lambda,
            c2,
        } => verify_cmd(cli, space, sets, fields, *lambda, *c2),
        Command::Density { space, sets, c_d } => density_cmd(space, sets, *c_d),
        Command::MapCheck {
            space,
            map,
            trials,
            exhaustive,
            gamma,
            lambda,
        } => map_check_cmd(cli, space, map, *trials, *exhaustive, *gamma, *lambda),
        Command::ComposeNorm { space, map, family } => compose_norm_cmd(cli, space, map, family),
        Command::GotohRoundtrip { space, map, trials } => roundtrip_cmd(cli, space, map, *trials),
    }
}

fn gen_space(cli: &Cli, kind: Kind, size: usize, exponent: f64, normalize: bool) -> Result<Outcome> {
    let generator = match kind {
        Kind::Grid1d => Generator::Grid1d { len: size, exponent },
        Kind::Grid2d => Generator::Grid2d { side: size, exponent },
        Kind::Path => Generator::Path { len: size },
        Kind::BinaryTree => Generator::BinaryTree {
            depth: u32::try_from(size).map_err(|_| Error::Invalid(format!("depth {size} is too large")))?,
        },
        Kind::RandomTree => Generator::RandomTree { n: size, seed: cli.seed },
    };
    let spec = SpaceSpec { generator, normalize };
    let space = build_space(&spec)?;
    let doc = io::write_space(&space);
    let mut table = Table::new(&["id", "weight"]);
    for (i, &w) in space.weights().iter().enumerate() {
        table.push(&[Cell::Int(i), Cell::Real(w)]);
    }
    let result = json!({
        "spec": spec,
        "label": space.label(),
        "n": space.len(),
        "canonical_balls": space.canonical_count(),
        "diameter": space.diameter(),
        "min_distance": space.min_distance(),
        "total_measure": space.total_measure(),
        "doubling": space.doubling(),
    });
    let mut out = Outcome::new(result, table);
    out.files.push(("space.json".into(), doc.clone()));
    out.stdout = Some(doc);
    Ok(out)
}

fn per_ball_table(space: &MetricMeasureSpace, extra: &str, score: impl Fn(&[usize]) -> f64) -> Table {
    let mut table = Table::new(&["center", "radius", "measure", extra]);
    for cb in space.canonical() {
        table.push(&[
            Cell::Int(cb.ball.center),
            Cell::Real(cb.ball.radius),
            Cell::Real(cb.measure),
            Cell::Real(score(cb.members)),
        ]);
    }
    table
}

fn bmo_norm_cmd(space: &Path, field: &Path) -> Result<Outcome> {
    let s = load_space(space)?;
    let f = load_field(&s, field)?;
    let norm = bmo_norm(&s, &f);
    let table = per_ball_table(&s, "oscillation", |members| deviation(&s, &f, members, None));
    Ok(Outcome::new(
        json!({ "norm": norm.value, "ball": norm.ball, "canonical_balls": s.canonical_count() }),
        table,
    ))
}

/// Mean of `|f - c|` over `members`, with `c` the average when `None`.
fn deviation(space: &MetricMeasureSpace, f: &ScalarField, members: &[usize], center: Option<f64>) -> f64 {
    let measure: f64 = members.iter().map(|&y| space.weight(y)).sum();
    let c = center.unwrap_or_else(|| members.iter().map(|&y| f[y] * space.weight(y)).sum::<f64>() / measure);
    members.iter().map(|&y| (f[y] - c).abs() * space.weight(y)).sum::<f64>() / measure
}

fn dual_norm_cmd(cli: &Cli, space: &Path, field: &Path) -> Result<Outcome> {
    let s = load_space(space)?;
    let f = load_field(&s, field)?;
    let dual = dual_norm(&s, &f);
    let norm = bmo_norm(&s, &f);
    let slack = cli.tol * norm.value.max(1.0);
    let lower = 0.5 * norm.value;
    let table = per_ball_table(&s, "median_deviation", |members| {
        deviation(&s, &f, members, Some(weighted_median(&s, &f, members)))
    });
    let result = json!({
        "dual_norm": dual.value,
        "ball": dual.ball,
        "bmo_norm": norm.value,
        "bmo_ball": norm.ball,
        "sandwich_holds": dual.value >= lower - slack && dual.value <= norm.value + slack,
    });
    let out = Outcome::new(result, table);
    Ok(if dual.value < lower - slack || dual.value > norm.value + slack {
        out.fail(
            format!("dual norm {} is outside [{lower}, {}]", dual.value, norm.value),
            json!({ "dual": dual, "bmo": norm }),
        )
    } else {
        out
    })
}

fn jn_profile_cmd(space: &Path, field: &Path, lambdas: &[f64]) -> Result<Outcome> {
    let s = load_space(space)?;
    let f = load_field(&s, field)?;
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Invalid(format!("levels must be positive, got {l}")));
    }
    let profile = if lambdas.is_empty() {
        jn_profile(&s, &f)
    } else {
        jn_profile_with(&s, &f, lambdas)
    };
    let summary = jn_summary(&s, &f);
    let mut table = Table::new(&["center", "radius", "measure", "lambda", "tail", "bound"]);
    for r in &profile.records {
        let bound = 2.0 * r.measure * (-summary.constant * r.lambda / profile.norm).exp();
        table.push(&[
            Cell::Int(r.ball.center),
            Cell::Real(r.ball.radius),
            Cell::Real(r.measure),
            Cell::Real(r.lambda),
            Cell::Real(r.tail),
            Cell::Real(bound),
        ]);
    }
    let violations = if summary.constant.is_finite() {
        profile.violations(summary.constant)
    } else {
        Vec::new()
    };
    let result = json!({ "summary": summary, "records": profile.records.len(), "violations": violations.len() });
    let out = Outcome::new(result, table);
    Ok(match violations.first() {
        Some(v) => out.fail(
            format!("{} tails exceed the bound at A = {}", violations.len(), summary.constant),
            to_value(v)?,
        ),
        None => out,
    })
}

fn uchiyama_cmd(
    space: &Path,
    sets: &[PathBuf],
    lambda: f64,
    q: Option<u32>,
    depth: Option<u32>,
    c_d: Option<f64>,
) -> Result<Outcome> {
    let s = load_space(space)?;
    let sets = load_sets(&s, sets)?;
    let true_c_d = s.doubling().c_d;
    let base = c_d.unwrap_or(true_c_d);
    let n_sets = sets.len();
    let default_q = choose_q(true_c_d, n_sets.max(2))?;
    let q = q.unwrap_or(default_q);
    let mut params = ConstructionParams::new(lambda, q, base);
    if let Some(d) = depth {
        params = params.with_depth(d);
    }
    let trace = uchiyama_construct(&s, &sets, &params)?;
    let admissible = q_admissible(true_c_d, n_sets, q);
    let mut notes = Vec::new();
    if !admissible {
        notes.push(format!(
            "q = {q} is below the admissible {default_q} for c_D = {true_c_d}; the level bound is reported but not asserted"
        ));
    }
    if base != true_c_d {
        notes.push(format!(
            "density exponents use base {base} in place of c_D = {true_c_d}; the density hypothesis is checked in that base"
        ));
    }
    let check = verify_construction(&s, &trace.fields, &sets, lambda)?;
    let bound = level_bound_check(&s, &sets, &trace);

    let mut header = vec!["id".to_string()];
    header.extend((0..n_sets).map(|j| format!("f_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    for x in 0..s.len() {
        let mut row = vec![Cell::Int(x)];
        row.extend(trace.fields.iter().map(|f| Cell::Real(f[x])));
        table.push(&row);
    }
    let levels: Vec<Value> = trace
        .levels
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "radius": l.radius,
                "removed": l.removal.iter().map(Vec::len).collect::<Vec<_>>(),
                "assigned": l.assignment.len(),
                "checks": l.checks,
            })
        })
        .collect();
    let result = json!({
        "params": trace.params,
        "c_d": true_c_d,
        "q_admissible": admissible,
        "notes": notes,
        "depth": trace.depth,
        "trivial": trace.trivial,
        "levels": levels,
        "nonzero_on_sets": trace.nonzero_on_sets,
        "construction": check,
        "level_bound": bound,
    });
    let mut out = Outcome::new(result, table);
    for (j, f) in trace.fields.iter().enumerate() {
        out.files.push((format!("f{j}.txt"), io::write_field(f)));
    }
    out.files.push(("trace.json".into(), io::to_report(&trace)?));
    if check.verdict.is_fail() {
        out = out.fail(check.verdict.to_string(), to_value(&check)?);
    }
    if admissible && bound.violations > 0 {
        out = out.fail(format!("{} level bound violations", bound.violations), to_value(&bound)?);
    }
    Ok(out)
}

fn verify_cmd(
    cli: &Cli,
    space: &Path,
    sets: &[PathBuf],
    fields: &[PathBuf],
    lambda: f64,
    c2: Option<f64>,
) -> Result<Outcome> {
    let s = load_space(space)?;
    let sets = load_sets(&s, sets)?;
    let fields: Vec<ScalarField> = fields.iter().map(|p| load_field(&s, p)).collect::<Result<_>>()?;
    let check = verify_construction(&s, &fields, &sets, lambda)?;
    let c_d = s.doubling().c_d;
    let c2 = c2.unwrap_or(check.scaled_norm);
    let necessity = necessity_check(&s, &fields, &sets, lambda, c2, c_d)?;
    let density = density_functional(&s, &sets, c_d)?;
    let agree = (necessity.density - density.value).abs() <= cli.tol * density.value.max(1.0);

    let mut table = Table::new(&["j", "norm", "sup_on_set"]);
    for (j, (n, sup)) in check.norms.iter().zip(&check.sup_on_sets).enumerate() {
        table.push(&[Cell::Int(j), Cell::Real(*n), Cell::Real(*sup)]);
    }
    let result = json!({
        "c2": c2,
        "construction": check,
        "necessity": necessity,
        "density": density,
        "densities_agree": agree,
    });
    let mut out = Outcome::new(result, table);
    if check.verdict.is_fail() {
        out = out.fail(check.verdict.to_string(), to_value(&check)?);
    }
    if necessity.verdict.is_fail() {
        out = out.fail(necessity.verdict.to_string(), to_value(&necessity)?);
    }
    if !agree {
        out = out.fail(
            format!("necessity density {} differs from the density functional {}", necessity.density, density.value),
            json!({ "necessity": necessity.density, "functional": density }),
        );
    }
    Ok(out)
}

fn density_cmd(space: &Path, sets: &[PathBuf], c_d: Option<f64>) -> Result<Outcome> {
    let s = load_space(space)?;
    let sets = load_sets(&s, sets)?;
    let c_d = c_d.unwrap_or(s.doubling().c_d);
    let report = density_functional(&s, &sets, c_d)?;
    let mut header = vec!["center".to_string(), "radius".into(), "measure".into()];
    header.extend((0..sets.len()).map(|j| format!("ratio_{j}")));
    header.push("min".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    for cb in s.canonical() {
        let ratios: Vec<f64> = sets.iter().map(|e| e.measure_in(&s, cb.members) / cb.measure).collect();
        let mut row = vec![Cell::Int(cb.ball.center), Cell::Real(cb.ball.radius), Cell::Real(cb.measure)];
        row.extend(ratios.iter().map(|&r| Cell::Real(r)));
        row.push(Cell::Real(ratios.iter().copied().fold(f64::INFINITY, f64::min)));
        table.push(&row);
    }
    Ok(Outcome::new(json!({ "c_d": c_d, "density": report }), table))
}

fn record_table(records: &[bmo_core::bmo_map::TrialRecord]) -> Table {
    let mut table = Table::new(&["label", "x", "y"]);
    for r in records {
        table.push(&[Cell::Text(&r.label), Cell::Real(r.x), Cell::Real(r.y)]);
    }
    table
}

fn map_check_cmd(
    cli: &Cli,
    space: &Path,
    map: &Path,
    trials: usize,
    exhaustive: bool,
    gamma: f64,
    lambda: Option<f64>,
) -> Result<Outcome> {
    let s = load_space(space)?;
    let m = load_map(&s, map)?;
    let records = if exhaustive {
        exhaustive_records(&s, &m)?
    } else {
        evaluate_pairs(&s, &m, &sample_pairs(&s, trials, cli.seed))
    };
    let fit = condition_i_fit(&records, &alpha_grid())?;
    let lambda = lambda.unwrap_or(if fit.k.is_finite() && fit.k > 0.0 {
        (gamma / fit.k).powf(1.0 / fit.alpha)
    } else {
        gamma
    });
    let family = default_family(&s, cli.seed)?;
    let report = map_check(&s, &m, records, gamma, lambda, &family)?;
    let table = record_table(&report.records);
    let implication = report.implication.clone();
    let mut out = Outcome::new(to_value(&report)?, table);
    if implication.verdict.is_fail() {
        out = out.fail(implication.verdict.to_string(), to_value(&implication)?);
    }
    Ok(out)
}

fn compose_norm_cmd(cli: &Cli, space: &Path, map: &Path, family: &str) -> Result<Outcome> {
    if family != "default" {
        return Err(Error::Invalid(format!("unknown field family `{family}`; the only family is `default`")));
    }
    let s = load_space(space)?;
    let m = load_map(&s, map)?;
    let fam = default_family(&s, cli.seed)?;
    let est = operator_norm_estimate(&s, &m, &fam)?;
    let mut table = Table::new(&["field", "ratio"]);
    for (label, r) in &est.ratios {
        table.push(&[Cell::Text(label), Cell::Real(*r)]);
    }
    let result = json!({ "family": family, "fields": fam.len(), "estimate": est });
    let out = Outcome::new(result, table);
    Ok(if est.scaling_deviation > cli.tol {
        out.fail(
            format!("norm ratios change by {} under scaling", est.scaling_deviation),
            json!({ "scaling_deviation": est.scaling_deviation }),
        )
    } else {
        out
    })
}

fn roundtrip_cmd(cli: &Cli, space: &Path, map: &Path, trials: usize) -> Result<Outcome> {
    let s = load_space(space)?;
    let m = load_map(&s, map)?;
    let family = default_family(&s, cli.seed)?;
    let est = operator_norm_estimate(&s, &m, &family)?;
    let pairs = sample_pairs(&s, trials, cli.seed);
    let round_trip = round_trip_iii_to_i(&s, &m, &pairs, est.value)?;
    let records = evaluate_pairs(&s, &m, &pairs);
    let fit = condition_i_fit(&records, &alpha_grid())?;
    let pipeline = if fit.k.is_finite() && fit.k > 0.0 {
        Some(prop_i_iii_pipeline(&s, &m, &fit, &family)?)
    } else {
        None
    };

    let mut table = Table::new(&["label", "input_density", "predicted", "measured", "verdict"]);
    for r in &round_trip.records {
        let verdict = r.verdict.to_string();
        table.push(&[
            Cell::Text(&r.label),
            Cell::Real(r.input_density),
            Cell::Real(r.predicted),
            Cell::Real(r.measured),
            Cell::Text(&verdict),
        ]);
    }
    let result = json!({
        "operator_norm": est.value,
        "round_trip": round_trip,
        "condition_i": { "k": fit.k, "alpha": fit.alpha },
        "pipeline": pipeline,
    });
    let mut out = Outcome::new(result, table);
    if round_trip.verdict.is_fail() {
        let witness = round_trip.records.iter().find(|r| r.verdict.is_fail());
        out = out.fail(round_trip.verdict.to_string(), to_value(&witness)?);
    }
    if let Some(p) = pipeline.as_ref().filter(|p| p.verdict.is_fail()) {
        out = out.fail(p.verdict.to_string(), json!({ "k": p.k, "alpha": p.alpha, "bound": p.bound }));
    }
    Ok(out)
}
