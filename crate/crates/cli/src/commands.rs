use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lppl_core::calendar::{day_number_to_decimal_year, decimal_year_to_day_number, format_time};
use lppl_core::model::synth_lppl_at;
use lppl_core::scan::start_grid;
use lppl_core::timeseries::emit_csv;
use lppl_core::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{Outputs, Provenance};
use crate::CliError;

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let provenance = Provenance::new(cli.command.name(), &cli.command);
    let mut out = Outputs::new(&cli.out_dir, provenance);
    match &cli.command {
        Command::Fit(a) => fit(a, &mut out)?,
        Command::Scan(a) => scan(a, &mut out)?,
        Command::Crashes(a) => crashes(a, &mut out)?,
        Command::Lagcorr(a) => lagcorr(a, &mut out)?,
        Command::Pca(a) => pca(a, &mut out)?,
        Command::Synth(SynthCommand::Lppl(a)) => synth_lppl(a, &mut out)?,
        Command::Synth(SynthCommand::Feedback(a)) => synth_feedback(a, &mut out)?,
    }
    Ok(out.written().to_vec())
}

fn load(path: &Path) -> Result<PriceSeries, CliError> {
    Ok(load_csv(path, &CsvConfig::default())?)
}

fn fit(args: &FitArgs, out: &mut Outputs) -> Result<(), CliError> {
    let series = load(&args.input)?;
    let t_start = args.start.unwrap_or(series.first_time());
    let t_last = args.last.unwrap_or(series.last_time());
    let window = Window::covering(&series, t_start, t_last)?;
    let (times, prices) = series.window_slices(&window);

    let (record, fitted): (Value, Vec<f64>) = match args.model {
        ModelArg::Exp => {
            let e = fit_exponential(&series, &window)?;
            let fitted = times.iter().map(|t| e.intercept + e.growth_rate * t).collect();
            let record = json!({
                "model": "exp",
                "growth_rate": e.growth_rate,
                "intercept": e.intercept,
                "rmse": e.rmse,
                "n_points": window.len(),
                "window": window,
            });
            (record, fitted)
        }
        ModelArg::Lppl | ModelArg::PowerLaw => {
            let kind = if args.model == ModelArg::Lppl {
                ModelKind::Lppl
            } else {
                ModelKind::PowerLaw
            };
            let config = args.fit.config();
            let result = fit_window(&series, &window, kind, &config)?;
            let fitted = times
                .iter()
                .map(|&t| eval_lppl(&result.params, t))
                .collect::<Result<Vec<_>>>()?;
            let mut record = serde_json::to_value(&result).map_err(|e| CliError::analysis(e.to_string()))?;
            if result.params.c != 0.0 {
                record["scaling_ratio"] = json!(scaling_ratio(&result.params));
            }
            record["tc_date"] = json!(format_time(result.params.tc));
            (record, fitted)
        }
    };

    let mut plot = String::from("t,observed,model\n");
    let mut residuals = String::from("t,residual\n");
    for ((t, p), m) in times.iter().zip(prices).zip(&fitted) {
        let y = p.ln();
        let _ = writeln!(plot, "{t},{y},{m}");
        let _ = writeln!(residuals, "{t},{}", y - m);
    }
    out.json("fit.json", &record)?;
    out.csv("fit_plot.csv", plot.as_bytes())?;
    out.csv("fit_residuals.csv", residuals.as_bytes())?;
    Ok(())
}

fn scan(args: &ScanArgs, out: &mut Outputs) -> Result<(), CliError> {
    let series = load(&args.input)?;
    let t_last = args.t_last.unwrap_or(series.last_time());
    let starts = match args.starts.trim().parse::<usize>() {
        Ok(count) => {
            let earliest = args.earliest.unwrap_or(series.first_time());
            let latest = args.latest.unwrap_or(earliest + 0.5 * (t_last - earliest));
            start_grid(earliest, latest, count)
        }
        Err(_) => args
            .starts
            .split(',')
            .map(|s| lppl_core::calendar::parse_time(s).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if starts.is_empty() {
        return Err(CliError::usage("--starts must name at least one start"));
    }
    let kind = match args.model {
        FittedModel::Lppl => ModelKind::Lppl,
        FittedModel::PowerLaw => ModelKind::PowerLaw,
    };
    let config = args.fit.config();
    let report = scan_shrinking_windows(&series, t_last, &starts, kind, &config)?;

    let mut hist = String::from("bin_center,count\n");
    for (c, n) in report.tc_histogram.centers().iter().zip(&report.tc_histogram.counts) {
        let _ = writeln!(hist, "{c},{n}");
    }
    let mut fits = String::from("t_start,t_last,n_points,tc,m,omega,b,c,rmse,converged,usable\n");
    for f in &report.fits {
        let p = &f.params;
        let _ = writeln!(
            fits,
            "{},{},{},{},{},{},{},{},{},{},{}",
            f.window.t_start,
            f.window.t_last,
            f.n_points,
            p.tc,
            p.m,
            p.omega,
            p.b,
            p.c,
            f.rmse,
            f.converged,
            f.is_usable()
        );
    }
    let mut record = serde_json::to_value(&report).map_err(|e| CliError::analysis(e.to_string()))?;
    record["ci80_dates"] = json!([format_time(report.ci80.0), format_time(report.ci80.1)]);
    out.json("scan.json", &record)?;
    out.csv("scan_histogram.csv", hist.as_bytes())?;
    out.csv("scan_fits.csv", fits.as_bytes())?;
    Ok(())
}

fn crashes(args: &CrashArgs, out: &mut Outputs) -> Result<(), CliError> {
    let series = load(&args.input)?;
    if !(args.threshold > 0.0 && args.threshold < 1.0) || !(args.horizon_days > 0.0) {
        return Err(CliError::usage(
            "threshold must lie in (0, 1) and the horizon must be positive",
        ));
    }
    let config = CrashConfig {
        threshold: args.threshold,
        horizon_days: args.horizon_days,
    };
    let events = detect_crashes(&series, &config);
    let mut csv = String::from("peak_date,trough_date,drawdown,duration_days\n");
    for e in &events {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            format_time(e.peak_time),
            format_time(e.trough_time),
            e.drawdown,
            e.duration_days
        );
    }
    out.csv("crashes.csv", csv.as_bytes())?;
    out.json("crashes.json", &json!({ "config": config, "events": events }))?;
    Ok(())
}

fn lagcorr(args: &LagArgs, out: &mut Outputs) -> Result<(), CliError> {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let lc = cross_correlation_lag(&a, &b, &args.steps, args.max_lag, !args.levels)?;
    let mut csv = String::from("step_days,lag_days,coefficient\n");
    for (step, row) in lc.steps_days.iter().zip(&lc.coefficients) {
        for (lag, c) in lc.lags.iter().zip(row) {
            let _ = writeln!(csv, "{step},{lag},{c}");
        }
    }
    out.csv("lagcorr.csv", csv.as_bytes())?;
    out.json("lagcorr.json", &lc)?;
    Ok(())
}

fn pca(args: &PcaArgs, out: &mut Outputs) -> Result<(), CliError> {
    let series = args.input.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let panel = build_panel(&series, args.step_days, args.scaling.into())?;
    let pc = first_principal_component(&panel)?;
    let mut weights = String::from("asset,weight\n");
    for (name, w) in panel.assets.iter().zip(&pc.weights) {
        let _ = writeln!(weights, "{name},{w}");
    }
    let mut component = Vec::new();
    emit_csv(&pc.component_series, &mut component)?;
    out.csv("pca_weights.csv", weights.as_bytes())?;
    out.csv("pca_component.csv", &component)?;
    out.json(
        "pca.json",
        &json!({
            "assets": panel.assets,
            "scaling": panel.scaling,
            "returns": panel.matrix.nrows(),
            "weights": pc.weights,
            "eigenvalue": pc.eigenvalue,
            "explained_fraction": pc.explained_fraction,
            "iterations": pc.iterations,
        }),
    )?;
    Ok(())
}

/// Decimal-year times every `every_days` from `start`, while `keep` holds.
fn day_grid(start: f64, every_days: u32, mut keep: impl FnMut(usize, f64) -> bool) -> Result<Vec<f64>, CliError> {
    if every_days == 0 {
        return Err(CliError::usage("--every-days must be positive"));
    }
    let d0 = decimal_year_to_day_number(start);
    let mut times = Vec::new();
    loop {
        let t = day_number_to_decimal_year(d0 + (times.len() as u64 * every_days as u64) as f64);
        if !keep(times.len(), t) {
            break;
        }
        times.push(t);
    }
    Ok(times)
}

fn write_series(series: &PriceSeries, name: &Path, out: &mut Outputs) -> Result<(), CliError> {
    let mut body = Vec::new();
    emit_csv(series, &mut body)?;
    out.csv(name, &body)
}

fn synth_lppl(args: &SynthLpplArgs, out: &mut Outputs) -> Result<(), CliError> {
    let params = LpplParams {
        a: args.a,
        b: args.b,
        c: args.c,
        m: args.m,
        omega: args.omega,
        phi: args.phi,
        tc: args.tc,
    };
    let last = args.last + 1e-9;
    let times = day_grid(args.start, args.every_days, |_, t| t <= last)?;
    let noise = NoiseSpec {
        sigma: args.sigma,
        seed: args.seed,
    };
    let series = synth_lppl_at(&params, &times, noise, "synthetic-lppl")?;
    write_series(&series, &args.output, out)
}

fn synth_feedback(args: &SynthFeedbackArgs, out: &mut Outputs) -> Result<(), CliError> {
    let ode = FeedbackOde::new(args.p0, args.c)?;
    let times = day_grid(args.start, args.every_days, |i, _| i < args.n)?;
    let t0 = times.first().copied().unwrap_or(args.start);
    let prices = times
        .iter()
        .map(|&t| ode.price_at(t - t0))
        .collect::<Result<Vec<_>>>()?;
    let series = PriceSeries::new(times, prices, "synthetic-feedback")?;
    write_series(&series, &args.output, out)
}
