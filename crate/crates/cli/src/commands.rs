//! Subcommand pipelines. Each one evaluates the configured experiment
//! in-process and hands CSV/JSON artifacts to an [`OutputDir`].

use std::fmt::Write as _;
use std::time::Instant;

use serde_json::{json, Value};

use dtwa_core::analysis::{
    contour_difference, eta_crossover, light_cone, CorrelationField, CrossoverRow, LightCone,
};
use dtwa_core::dtwa::{run_dtwa, RunConfig};
use dtwa_core::oracle_ed::run_ed;
use dtwa_core::oracle_ising::{dtwa_error_prediction, ising_observables};
use dtwa_core::{Component, Couplings, Model, ObservableSeries};

use crate::config::{ExperimentConfig, Source};
use crate::error::CliError;
use crate::output::OutputDir;

/// Observables of one evaluated experiment.
pub struct Evaluation {
    pub alpha: f64,
    pub series: ObservableSeries,
    pub fields: Vec<CorrelationField>,
    pub diagnostics: Value,
}

impl Evaluation {
    /// `time,observable,mean,stderr` for the series and every field.
    pub fn series_csv(&self) -> String {
        let mut csv = self.series.to_csv();
        for field in &self.fields {
            csv.push_str(&field.csv_rows());
        }
        csv
    }
}

pub fn evaluate(
    config: &ExperimentConfig,
    source: Source,
    alpha: f64,
    workers: Option<usize>,
) -> Result<Evaluation, CliError> {
    let lattice = config.lattice()?;
    let request = config.observable_request(&lattice)?;
    let times = config.times()?;
    let couplings = Couplings::power_law(lattice, config.model, config.coupling, alpha)?;
    let (series, fields, diagnostics) = match source {
        Source::Dtwa => {
            let run = RunConfig {
                trajectories: config.n_trajectories,
                master_seed: config.master_seed,
                times,
                integrator: config.integrator,
                observables: request,
                bootstrap_resamples: config.analysis.bootstrap_resamples,
            };
            let out = run_dtwa(&run, &couplings, workers)?;
            (out.series, out.fields, json!(out.diagnostics))
        }
        Source::OracleIsing => {
            let out = ising_observables(&couplings, &times, &request)?;
            (out.series, out.fields, Value::Null)
        }
        Source::OracleEd => {
            let (out, d) = run_ed(&couplings, &times, &request, &config.krylov)?;
            (out.series, out.fields, json!(d))
        }
    };
    Ok(Evaluation {
        alpha,
        series,
        fields,
        diagnostics,
    })
}

/// `dtwa`, `oracle-ising` and `oracle-ed`: one run, raw observables out.
pub fn run_single(
    config: &ExperimentConfig,
    source: Source,
    workers: Option<usize>,
    out: &mut OutputDir,
) -> Result<Value, CliError> {
    let start = Instant::now();
    let eval = evaluate(config, source, config.alpha()?, workers)?;
    out.write("series.csv", &eval.series_csv())?;
    let mut summary = header(config, source_name(source), eval.alpha);
    if let Some(sx) = eval.series.get(dtwa_core::observables::COLLECTIVE_X) {
        if let (Some(first), Some(last)) = (sx.first(), sx.last()) {
            let _ = writeln!(
                summary,
                "S_x: {:.6} at t = {} -> {:.6} +- {:.2e} at t = {}",
                first.mean,
                eval.series.times[0],
                last.mean,
                last.stderr,
                eval.series.times[eval.series.times.len() - 1]
            );
        }
    }
    let _ = writeln!(summary, "{} correlation field(s)", eval.fields.len());
    out.write("summary.txt", &summary)?;
    Ok(json!({
        "source": source_name(source),
        "diagnostics": eval.diagnostics,
        "wall_seconds": start.elapsed().as_secs_f64(),
    }))
}

/// `analyze-lightcone`: field -> contour -> power-law fit per threshold.
pub fn analyze_lightcone(
    config: &ExperimentConfig,
    workers: Option<usize>,
    out: &mut OutputDir,
) -> Result<Value, CliError> {
    let start = Instant::now();
    let eval = evaluate(config, config.source, config.alpha()?, workers)?;
    let lattice = config.lattice()?;
    let j_min = config.fit_start(&lattice);
    out.write("series.csv", &eval.series_csv())?;
    let mut summary = header(config, "analyze-lightcone", eval.alpha);
    let mut fits = Vec::new();
    for (f, field) in eval.fields.iter().enumerate() {
        for &threshold in &config.analysis.thresholds {
            let cone = light_cone(field, threshold, j_min)?;
            let name = format!("contour_{}_f{f}_c{threshold}.csv", field.component);
            out.write(&name, &cone.contour.to_csv())?;
            let _ = writeln!(summary, "{}", describe_cone(field, threshold, &cone));
            fits.push(json!({
                "field": f,
                "component": field.component.to_string(),
                "reference": field.reference,
                "threshold": threshold,
                "j_min": j_min,
                "contour": name,
                "fit": fit_json(&cone),
            }));
        }
    }
    out.write("summary.txt", &summary)?;
    Ok(json!({
        "source": source_name(config.source),
        "diagnostics": eval.diagnostics,
        "fits": fits,
        "wall_seconds": start.elapsed().as_secs_f64(),
    }))
}

/// `compare`: DTWA against an exact oracle on the same config. Emits
/// `delta_tau.csv` and, for `C^yy`, `epsilon_yy.csv` with the observed
/// relative deviation next to the Ising prediction `|1 - cos^2(2 t J_ij)|`.
pub fn compare(
    config: &ExperimentConfig,
    workers: Option<usize>,
    out: &mut OutputDir,
) -> Result<Value, CliError> {
    let start = Instant::now();
    let alpha = config.alpha()?;
    let reference = config.reference.unwrap_or(match config.model {
        Model::Ising => Source::OracleIsing,
        Model::Xy => Source::OracleEd,
    });
    if reference == Source::Dtwa {
        return Err(CliError::Config("`reference`: must be an oracle".into()));
    }
    let dtwa = evaluate(config, Source::Dtwa, alpha, workers)?;
    let exact = evaluate(config, reference, alpha, workers)?;
    let lattice = config.lattice()?;
    let j_min = config.fit_start(&lattice);
    let couplings = Couplings::power_law(lattice, config.model, config.coupling, alpha)?;
    out.write("series_dtwa.csv", &dtwa.series_csv())?;
    out.write("series_reference.csv", &exact.series_csv())?;

    let mut summary = header(config, "compare", alpha);
    let _ = writeln!(summary, "reference: {}", source_name(reference));
    let mut delta = String::from("field,threshold,j,delta_tau\n");
    let mut epsilon = String::from("field,time,j,observed,stderr,predicted\n");
    let mut worst = Vec::new();
    for (f, (a, b)) in dtwa.fields.iter().zip(&exact.fields).enumerate() {
        for &threshold in &config.analysis.thresholds {
            let ca = dtwa_core::analysis::extract_contour(a, threshold)?;
            let cb = dtwa_core::analysis::extract_contour(b, threshold)?;
            match contour_difference(&ca, &cb, j_min) {
                Ok(rows) => {
                    let max = rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
                    for (j, d) in &rows {
                        let _ = writeln!(delta, "{f},{threshold},{j},{d}");
                    }
                    let _ = writeln!(
                        summary,
                        "field {f} C_{} threshold {threshold}: max |delta tau| = {max:.4} over {} separations",
                        a.component,
                        rows.len()
                    );
                    worst.push(
                        json!({"field": f, "threshold": threshold, "max_abs_delta_tau": max}),
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        summary,
                        "field {f} threshold {threshold}: no contour difference ({e})"
                    );
                }
            }
        }
        if a.component == Component::Yy {
            for (k, &t) in a.times.iter().enumerate() {
                for (jj, &site) in a.sites.iter().enumerate() {
                    let j = jj + 1;
                    let (obs, ex) = (a.at(k, j), b.at(k, j));
                    if ex.mean == 0.0 {
                        continue;
                    }
                    let predicted = match config.model {
                        Model::Ising => {
                            dtwa_error_prediction(&couplings, a.reference, site, t)?.to_string()
                        }
                        Model::Xy => String::new(),
                    };
                    let _ = writeln!(
                        epsilon,
                        "{f},{t},{j},{},{},{predicted}",
                        ((obs.mean - ex.mean) / ex.mean).abs(),
                        obs.stderr / ex.mean.abs()
                    );
                }
            }
        }
    }
    out.write("delta_tau.csv", &delta)?;
    out.write("epsilon_yy.csv", &epsilon)?;
    out.write("summary.txt", &summary)?;
    Ok(json!({
        "reference": source_name(reference),
        "j_min": j_min,
        "contour_differences": worst,
        "diagnostics": {"dtwa": dtwa.diagnostics, "reference": exact.diagnostics},
        "wall_seconds": start.elapsed().as_secs_f64(),
    }))
}

/// `crossover`: `eta(alpha)` over an explicit exponent list, using the first
/// correlation field and the first threshold.
pub fn crossover(
    config: &ExperimentConfig,
    workers: Option<usize>,
    out: &mut OutputDir,
) -> Result<Value, CliError> {
    let start = Instant::now();
    let lattice = config.lattice()?;
    let j_min = config.fit_start(&lattice);
    let threshold = config.analysis.thresholds[0];
    let mut rows = Vec::new();
    let mut table = String::from("alpha,eta,eta_stderr,points,status\n");
    let mut diagnostics = Vec::new();
    for alpha in config.alphas()? {
        let eval = evaluate(config, config.source, alpha, workers)?;
        let field = eval.fields.first().ok_or_else(|| {
            CliError::Config("`observables.correlations`: crossover needs a correlation".into())
        })?;
        let cone = light_cone(field, threshold, j_min)?;
        out.write(&format!("contour_alpha{alpha}.csv"), &cone.contour.to_csv())?;
        match &cone.fit {
            Ok(fit) => {
                let stderr = fit.eta_stderr.map_or(String::new(), |s| s.to_string());
                let _ = writeln!(table, "{alpha},{},{stderr},{},ok", fit.eta, fit.points);
            }
            Err(e) => {
                let _ = writeln!(table, "{alpha},,,0,\"{e}\"");
            }
        }
        diagnostics.push(json!({"alpha": alpha, "diagnostics": eval.diagnostics}));
        rows.push(CrossoverRow {
            alpha,
            fit: cone.fit,
        });
    }
    let result = eta_crossover(rows);
    out.write("eta.csv", &table)?;
    let mut summary = header(config, "crossover", f64::NAN);
    let _ = writeln!(summary, "threshold {threshold}, fit from j = {j_min}");
    summary.push_str(&table);
    let _ = writeln!(
        summary,
        "strictly increasing: {}; increasing within errors: {}",
        result.strictly_increasing, result.increasing_within_errors
    );
    out.write("summary.txt", &summary)?;
    Ok(json!({
        "source": source_name(config.source),
        "threshold": threshold,
        "j_min": j_min,
        "strictly_increasing": result.strictly_increasing,
        "increasing_within_errors": result.increasing_within_errors,
        "runs": diagnostics,
        "wall_seconds": start.elapsed().as_secs_f64(),
    }))
}

pub fn source_name(source: Source) -> &'static str {
    match source {
        Source::Dtwa => "dtwa",
        Source::OracleIsing => "oracle-ising",
        Source::OracleEd => "oracle-ed",
    }
}

fn header(config: &ExperimentConfig, what: &str, alpha: f64) -> String {
    let mut s = format!(
        "{what}: {} model on {}x{} lattice, J = {}",
        config.model, config.lattice.nx, config.lattice.ny, config.coupling
    );
    if alpha.is_finite() {
        let _ = write!(s, ", alpha = {alpha}");
    }
    let _ = writeln!(
        s,
        ", n_t = {}, seed = {}",
        config.n_trajectories, config.master_seed
    );
    s
}

fn describe_cone(field: &CorrelationField, threshold: f64, cone: &LightCone) -> String {
    let crossed = cone.contour.crossed().count();
    match &cone.fit {
        Ok(fit) => format!(
            "C_{} from site {} threshold {threshold}: {crossed} crossed, eta = {:.4} +- {} ({} points)",
            field.component,
            field.reference,
            fit.eta,
            fit.eta_stderr.map_or("n/a".into(), |s| format!("{s:.4}")),
            fit.points
        ),
        Err(e) => format!(
            "C_{} from site {} threshold {threshold}: {crossed} crossed, no fit ({e})",
            field.component, field.reference
        ),
    }
}

fn fit_json(cone: &LightCone) -> Value {
    match &cone.fit {
        Ok(fit) => json!(fit),
        Err(e) => json!({"error": e.to_string()}),
    }
}
