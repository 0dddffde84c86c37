use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use unravel::commonbasis::{common_basis, dual_consistency};
use unravel::dynamics::{contraction_scan, monotonicity_violations, time_grid};
use unravel::entropy::{bs_entropy, umegaki, unr_entropy};
use unravel::experiments::{haar_experiment, summarize};
use unravel::formats::{
    contraction_csv, fmt_float, haar_csv, read_density, read_json, read_model, CommonBasisJson, LdpConfigJson,
};
use unravel::ldp::{ball_probability_mc, rate_curve, LdpExperiment};
use unravel::states::{half_trace_norm, DensityMatrix, RngStream};
use unravel::{Error, Tolerances};

use crate::{Base, Cli, Command, Failure, Which};

/// Largest `|D_BS − D_UNR| / max(1, D_BS)` accepted by `haar-experiment`.
const GAP_TOL: f64 = 1e-8;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let seed = cli.global.seed;
    let tol = cli.global.tolerances();
    match &cli.command {
        Command::Entropy {
            rho,
            sigma,
            which,
            base,
            out,
        } => {
            let (rho, sigma) = read_pair(rho, sigma, &tol)?;
            let report = entropy_report(&rho, &sigma, *which, *base, seed)?;
            emit_json(out.as_deref(), &report)
        }
        Command::CommonBasis { rho, sigma, out } => {
            let (rho, sigma) = read_pair(rho, sigma, &tol)?;
            let cb = common_basis(&rho, &sigma)?;
            let rho_residual = half_trace_norm(&(cb.rho_reconstruction() - rho.matrix()))?;
            let sigma_residual = half_trace_norm(&(cb.sigma_reconstruction() - sigma.matrix()))?;
            let report = json!({
                "seed": seed,
                "common_basis": CommonBasisJson::from_basis(&cb),
                "rho_reconstruction_residual": rho_residual,
                "sigma_reconstruction_residual": sigma_residual,
                "dual_consistency_error": dual_consistency(&cb, &rho)?,
                "biorthogonality_error": cb.biorthogonality_error(),
            });
            emit_json(out.as_deref(), &report)
        }
        Command::HaarExperiment { dim, samples, out } => {
            let rows = haar_experiment(*dim, *samples, &RngStream::new(seed, 0))?;
            write_file(out, &haar_csv(&rows))?;
            let summary = summarize(*dim, seed, &rows);
            emit_json(None, &serde_json::to_value(&summary).map_err(|e| Failure::Io(e.to_string()))?)?;
            if summary.ordering_violations > 0 {
                return Err(Failure::Property(format!(
                    "{} pairs have D_U > D_BS",
                    summary.ordering_violations
                )));
            }
            if summary.max_relative_gap > GAP_TOL {
                return Err(Failure::Property(format!(
                    "relative |D_BS - D_UNR| reached {:e}",
                    summary.max_relative_gap
                )));
            }
            Ok(())
        }
        Command::Contraction {
            model,
            rho,
            sigma,
            t_max,
            steps,
            slack,
            out,
        } => {
            if !(t_max.is_finite() && *t_max > 0.0) || *steps == 0 {
                return Err(Error::InvalidArgument(format!("need t_max > 0 and steps >= 1, got {t_max} and {steps}")).into());
            }
            if !slack.is_finite() {
                return Err(Error::InvalidArgument(format!("slack = {slack} must be finite")).into());
            }
            let model = read_model(model)?;
            let (rho, sigma) = read_pair(rho, sigma, &tol)?;
            let series = contraction_scan(&model, &rho, &sigma, &time_grid(*t_max, *steps))?;
            write_file(out, &contraction_csv(&series))?;
            let violations = monotonicity_violations(&series, *slack);
            let summary = json!({
                "seed": seed,
                "t_max": t_max,
                "steps": steps,
                "slack": slack,
                "initial": series.first().map(|p| p.1),
                "final": series.last().map(|p| p.1),
                "violations": violations.iter().map(|&k| series[k].0).collect::<Vec<_>>(),
            });
            emit_json(None, &summary)?;
            if !violations.is_empty() {
                return Err(Failure::Property(format!(
                    "D_BS increased by more than {slack:e} at {} time steps",
                    violations.len()
                )));
            }
            Ok(())
        }
        Command::Ldp { experiment, out } => {
            let config: LdpConfigJson = read_json(experiment)?;
            let rho = config.rho.to_state(&tol)?;
            let sigma = config.sigma.to_state(&tol)?;
            let mut exp = LdpExperiment::new(rho, sigma, config.epsilon, config.sample_sizes.clone())?;
            if let Some(reference) = &config.reference {
                exp = exp.with_reference(reference.to_ensemble()?)?;
            }
            let points = rate_curve(&exp)?;
            let root = RngStream::new(seed, 0);
            let mut csv = String::from("n,prob,rate,tolerance_budget");
            if config.mc_trials.is_some() {
                csv.push_str(",mc_prob,mc_stderr");
            }
            csv.push('\n');
            for (i, p) in points.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{}",
                    p.n,
                    fmt_float(p.prob),
                    fmt_float(p.rate),
                    fmt_float(p.tolerance_budget)
                ));
                if let Some(trials) = config.mc_trials {
                    let (mc, se) = ball_probability_mc(&exp, p.n, trials, &root.child(i as u64))?;
                    csv.push_str(&format!(",{},{}", fmt_float(mc), fmt_float(se)));
                }
                csv.push('\n');
            }
            write_file(out, &csv)?;
            let summary = json!({
                "seed": seed,
                "epsilon": exp.epsilon(),
                "atoms": exp.atoms(),
                "d_bs": exp.d_bs()?,
                "points": points,
            });
            emit_json(None, &summary)
        }
    }
}

fn read_pair(rho: &Path, sigma: &Path, tol: &Tolerances) -> Result<(DensityMatrix, DensityMatrix), Failure> {
    let rho = read_density(rho, tol)?;
    let sigma = read_density(sigma, tol)?;
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        }
        .into());
    }
    rho.require_faithful("rho")?;
    sigma.require_faithful("sigma")?;
    Ok((rho, sigma))
}

fn entropy_report(rho: &DensityMatrix, sigma: &DensityMatrix, which: Which, base: Base, seed: u64) -> Result<Value, Failure> {
    let scale = match base {
        Base::Nats => 1.0,
        Base::Bits => std::f64::consts::LN_2.recip(),
    };
    let bs = bs_entropy(rho, sigma)?;
    let unr = unr_entropy(rho, sigma)?;
    let mut values = serde_json::Map::new();
    if matches!(which, Which::Umegaki | Which::All) {
        values.insert("umegaki".into(), json!(umegaki(rho, sigma)? * scale));
    }
    if matches!(which, Which::Bs | Which::All) {
        values.insert("bs".into(), json!(bs * scale));
    }
    if matches!(which, Which::Unr | Which::All) {
        values.insert("unr".into(), json!(unr * scale));
    }
    let cb = common_basis(rho, sigma)?;
    Ok(json!({
        "seed": seed,
        "base": match base { Base::Nats => "nats", Base::Bits => "bits" },
        "values": values,
        "bs_unr_residual": (bs - unr).abs() * scale,
        "gram_condition_number": cb.gram_condition_number(),
    }))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
