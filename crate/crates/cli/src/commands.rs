use monoresp::limitlaw::{chernoff_table, d_quantiles};
use monoresp::lrt::invert_profile;
use monoresp::simulate::{self, qq_pairs, ModelSpec};
use monoresp::{fit_unconstrained, FitOptions, Grid, LrProfile, Method, ParametricFamily, Statistic};
use serde_json::json;

use crate::input::{load_table, read_sample, write_csv, write_json, Provenance};
use crate::{CiArgs, CliError, DataArgs, FitArgs, LimitArgs, LimitKind, ModelArgs, Preset, TableArgs, TestArgs};

fn options(d: &DataArgs) -> FitOptions {
    FitOptions {
        tol: d.tol,
        max_iter: d.max_iter,
        method: match d.method {
            crate::MethodArg::Auto => Method::Auto,
            crate::MethodArg::Icm => Method::Icm,
        },
        ..FitOptions::default()
    }
}

fn table_of(t: &TableArgs) -> Result<monoresp::QuantileTable, CliError> {
    load_table(t.table.as_deref(), t.table_dir.as_deref())
}

fn table_info(t: &monoresp::QuantileTable) -> serde_json::Value {
    json!({
        "statistic": t.statistic.as_str(),
        "seed": t.seed,
        "n_paths": t.n_samples(),
        "T": t.t,
        "delta": t.delta,
    })
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let sample = read_sample(&a.data.input)?;
    let mut prov = Provenance::new("fit", a, None);
    prov.note_sample(&sample);
    let fit = fit_unconstrained(&a.data.family, &sample, &options(&a.data))?;
    let z = sample.z();
    let block_z: Vec<(f64, f64)> = fit.blocks.iter().map(|b| (z[b.start], z[b.end - 1])).collect();
    let result = json!({
        "n": sample.len(),
        "jumps": fit.psi_hat.jumps().collect::<Vec<_>>(),
        "block_z": block_z,
        "fit": fit,
    });
    write_json(a.out.as_deref(), &prov, &result)
}

pub fn test(a: &TestArgs) -> Result<(), CliError> {
    let table = table_of(&a.table)?;
    let sample = read_sample(&a.data.input)?;
    let mut prov = Provenance::new("test", a, None);
    prov.note_sample(&sample);
    if !a.data.family.contains(a.theta0) {
        return Err(CliError::Usage(format!("theta0 = {} is outside the parameter space", a.theta0)));
    }
    let profile = LrProfile::new(&a.data.family, &sample, a.z0, &options(&a.data))?;
    let r = profile.result(a.theta0)?;
    let result = json!({
        "z0": a.z0,
        "theta0": a.theta0,
        "estimate": profile.center(),
        "statistic": r.two_log_lambda,
        "p_value": table.survival(r.two_log_lambda),
        "diff_interval": r.diff_interval,
        "fenchel": r.fit.fenchel,
        "fenchel_constrained": r.fit0.fit.fenchel,
        "table": table_info(&table),
    });
    write_json(a.out.as_deref(), &prov, &result)
}

pub fn ci(a: &CiArgs) -> Result<(), CliError> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("level {} must lie in (0, 1)", a.level)));
    }
    let table = table_of(&a.table)?;
    let sample = read_sample(&a.data.input)?;
    let mut prov = Provenance::new("ci", a, None);
    prov.note_sample(&sample);
    let profile = LrProfile::new(&a.data.family, &sample, a.z0, &options(&a.data))?;
    let ci = invert_profile(&profile, a.level, table.quantile(a.level))?;
    let result = json!({
        "z0": a.z0,
        "interval": ci,
        "table": table_info(&table),
    });
    write_json(a.out.as_deref(), &prov, &result)
}

pub fn limit(a: &LimitArgs) -> Result<(), CliError> {
    let grid = Grid::new(a.t, a.delta).map_err(|e| CliError::Usage(e.to_string()))?;
    let n = a.n_paths as usize;
    let table = match a.statistic {
        LimitKind::D => d_quantiles(n, &grid, a.seed)?,
        LimitKind::Chernoff => chernoff_table(n, &grid, a.seed, Statistic::ChernoffArgmin)?,
        LimitKind::ChernoffSlope => chernoff_table(n, &grid, a.seed, Statistic::ChernoffSlope)?,
    };
    let prov = Provenance::new("limit", a, Some(a.seed));
    let mut out = crate::input::open_out(a.out.as_deref())?;
    table.write_csv(&mut out, &prov.lines())?;
    out.flush()?;
    Ok(())
}

fn model(m: &ModelArgs) -> Result<ModelSpec, CliError> {
    let base = match m.model {
        Preset::ExampleD => ModelSpec::example_d(),
        Preset::Gaussian => ModelSpec::gaussian_regression(1.0)?,
        Preset::Binary => ModelSpec::binary_choice(),
    };
    ModelSpec::new(
        m.family.unwrap_or(base.family),
        m.psi.unwrap_or(base.psi),
        m.covariate.unwrap_or(base.covariate),
        m.z0.unwrap_or(base.z0),
    )
    .map_err(|e| CliError::Usage(e.to_string()))
}

fn study_prov(study: &str, spec: &ModelSpec, m: &ModelArgs, extra: serde_json::Value) -> Provenance {
    let config = json!({
        "study": study,
        "model": spec,
        "reps": m.reps,
        "seed": m.seed,
        "settings": extra,
    });
    Provenance::new(&format!("mc {study}"), &config, Some(m.seed))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn mc_lrt(m: &ModelArgs, n: usize, theta0: Option<f64>) -> Result<(), CliError> {
    let spec = model(m)?;
    let theta0 = theta0.unwrap_or(spec.truth());
    let out = simulate::mc_lrt(&spec, n, m.reps, Some(theta0), m.seed)?;
    let prov = study_prov("lrt", &spec, m, json!({ "n": n, "theta0": theta0 }));
    let summary = [
        format!("failures={}", out.failures),
        format!("max_fenchel_violation={:e}", out.max_fenchel_violation),
    ];
    let rows = out.values.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt(*v)]);
    write_csv(m.out.as_deref(), &prov, &summary, &["index", "two_log_lambda"], rows)
}

pub fn mc_estimator(m: &ModelArgs, n_list: &[usize]) -> Result<(), CliError> {
    let spec = model(m)?;
    let report = simulate::mc_estimator(&spec, n_list, m.reps, m.seed)?;
    let prov = study_prov("estimator", &spec, m, json!({ "n_list": n_list }));
    let summary = [
        format!("log_rmse_slope={}", report.slope),
        format!("max_fenchel_violation={:e}", report.max_fenchel_violation),
    ];
    let rows = report
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt(r.rmse), fmt(r.bias), r.failures.to_string()]);
    write_csv(m.out.as_deref(), &prov, &summary, &["n", "rmse", "bias", "failures"], rows)
}

pub fn mc_iterations(m: &ModelArgs, n: usize, tol: f64, max_iter: usize) -> Result<(), CliError> {
    let spec = model(m)?;
    let opts = FitOptions {
        tol,
        max_iter,
        ..FitOptions::default()
    };
    let h = simulate::iteration_histogram(&spec, n, m.reps, m.seed, &opts)?;
    let prov = study_prov("iterations", &spec, m, json!({ "n": n, "tol": tol, "max_iter": max_iter }));
    let summary = [
        format!("median={}", h.median()),
        format!("not_converged={}", h.overflow),
        format!("max_fenchel_violation={:e}", h.max_fenchel_violation),
    ];
    let rows = h
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, c)| vec![k.to_string(), c.to_string()]);
    write_csv(m.out.as_deref(), &prov, &summary, &["iterations", "count"], rows)
}

pub fn mc_coverage(m: &ModelArgs, n: usize, level: f64, t: &TableArgs) -> Result<(), CliError> {
    let table = table_of(t)?;
    let spec = model(m)?;
    let r = simulate::coverage(&spec, n, m.reps, level, &table, m.seed)?;
    let prov = study_prov("coverage", &spec, m, json!({ "n": n, "level": level, "table": table_info(&table) }));
    let row = vec![
        r.covered.to_string(),
        r.total.to_string(),
        fmt(r.proportion),
        r.failures.to_string(),
        fmt(r.mean_length),
    ];
    write_csv(
        m.out.as_deref(),
        &prov,
        &[],
        &["covered", "total", "proportion", "failures", "mean_length"],
        [row],
    )
}

pub fn mc_qq(m: &ModelArgs, n: usize, t: &TableArgs) -> Result<(), CliError> {
    let table = table_of(t)?;
    let spec = model(m)?;
    let out = simulate::mc_lrt(&spec, n, m.reps, None, m.seed)?;
    let prov = study_prov("qq", &spec, m, json!({ "n": n, "table": table_info(&table) }));
    let summary = [format!("failures={}", out.failures)];
    let rows = qq_pairs(&out.values, &table)
        .into_iter()
        .map(|(v, q)| vec![fmt(v), fmt(q)]);
    write_csv(m.out.as_deref(), &prov, &summary, &["two_log_lambda", "d_quantile"], rows)
}
