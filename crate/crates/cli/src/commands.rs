use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use phasediff::estimator::{
    derive_seed, mle_estimate, monte_carlo_covariance, residual_estimate, sample_outcomes, simulate_adaptive,
    MonteCarloOptions, OutcomeCounts, SearchDomain,
};
use phasediff::sagnac::{
    calibration_scan, device_intensities_noisy, hwp1_input, synthesize_mixed, uniform_alpha_grid, DeviceConfig,
    Interpolation, CALIBRATION_CSV_HEADER,
};
use phasediff::theory::{effective_fisher, printed_qfi_delta, qfi_closed_form, qfi_matrix, QFI_STEP};
use phasediff::weak::{analytic_fisher, outcome_probabilities, tradeoff_boundary, tradeoff_region, tradeoff_scan};
use phasediff::{MeasurementStrength, ParamPoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::grid::parse_grid;
use crate::output::{json_string, Cell, Format, Table};
use crate::{ConfigError, Run};

pub struct Output {
    pub main: String,
    pub extra_files: Vec<(PathBuf, String)>,
}

impl Output {
    fn single(main: String) -> Self {
        Self {
            main,
            extra_files: Vec::new(),
        }
    }
}

fn grid_or(values: &Option<Vec<f64>>, default: &str) -> Result<Vec<f64>, ConfigError> {
    match values {
        Some(v) => Ok(v.clone()),
        None => parse_grid(default),
    }
}

fn scalar(values: &Option<Vec<f64>>, name: &str, default: f64) -> Result<f64, ConfigError> {
    match values.as_deref() {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(_) => Err(ConfigError(format!("--{name} takes a single value for this command"))),
    }
}

fn require_seed(run: &Run, why: &str) -> Result<u64, ConfigError> {
    run.seed.ok_or_else(|| ConfigError(format!("--seed is required {why}")))
}

fn positive(name: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError(format!("--{name} must be positive, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<f64, ConfigError> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError(format!("--{name} must be non-negative, got {x}")))
    }
}

pub fn qfi(run: &Run) -> anyhow::Result<Output> {
    let deltas = grid_or(&run.delta, "0:2:21")?;
    let mut t = Table::new(&[
        "delta",
        "h_pp",
        "h_dd",
        "h_pp_numeric",
        "h_dd_numeric",
        "h_dd_printed",
        "printed_form_differs",
    ]);
    for &d in &deltas {
        let closed = qfi_closed_form(d)?;
        // the numeric SLD value is pointwise, so at δ = 0 its H_δδ is 0
        let numeric = qfi_matrix(ParamPoint::new(0.0, d)?, QFI_STEP)?;
        let printed = printed_qfi_delta(d);
        t.push(vec![
            d.into(),
            closed.pp.into(),
            closed.dd.into(),
            numeric.pp.into(),
            numeric.dd.into(),
            printed.into(),
            ((printed - closed.dd).abs() > 1e-8).into(),
        ]);
    }
    Ok(Output::single(t.render(run.format)))
}

pub fn tradeoff(run: &Run) -> anyhow::Result<Output> {
    let delta = scalar(&run.delta, "delta", 1.0)?;
    let phi = scalar(&run.phi, "phi", 0.0)?;
    let thetas = grid_or(&run.theta, "0:pi/2:91")?;
    let mut t = Table::new(&["theta", "ratio_phi", "ratio_delta", "sum", "identifiable"]);
    for row in tradeoff_scan(delta, phi, &thetas)? {
        t.push(vec![
            row.theta.into(),
            row.ratio_phi.into(),
            row.ratio_delta.into(),
            row.sum.into(),
            row.identifiable.into(),
        ]);
    }
    Ok(Output::single(t.render(run.format)))
}

pub fn region(run: &Run) -> anyhow::Result<Output> {
    let thetas = grid_or(&run.theta, "0:pi/2:91")?;
    let deltas = grid_or(&run.delta, "0.05:3:60")?;
    let grid = tradeoff_region(&thetas, &deltas)?;
    let boundary = deltas
        .iter()
        .map(|&d| tradeoff_boundary(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["theta", "delta", "phi_favoured", "boundary_theta"]);
    for (i, &theta) in thetas.iter().enumerate() {
        for (j, &delta) in deltas.iter().enumerate() {
            t.push(vec![theta.into(), delta.into(), grid[i][j].into(), boundary[j].into()]);
        }
    }
    Ok(Output::single(t.render(run.format)))
}

pub fn fisher(run: &Run) -> anyhow::Result<Output> {
    let phis = grid_or(&run.phi, "0")?;
    let deltas = grid_or(&run.delta, "0.3")?;
    let thetas = grid_or(&run.theta, "pi/4")?;
    let mut t = Table::new(&[
        "phi",
        "delta",
        "theta",
        "f_pp",
        "f_dd",
        "f_pd",
        "effective_pp",
        "effective_dd",
        "h_pp",
        "h_dd",
        "tradeoff_sum",
    ]);
    for &phi in &phis {
        for &delta in &deltas {
            for &theta in &thetas {
                let f = analytic_fisher(phi, delta, MeasurementStrength::new(theta)?)?;
                let (ep, ed) = effective_fisher(&f).unwrap_or((f64::NAN, f64::NAN));
                let h = qfi_closed_form(delta)?;
                t.push(vec![
                    phi.into(),
                    delta.into(),
                    theta.into(),
                    f.pp.into(),
                    f.dd.into(),
                    f.pd.into(),
                    ep.into(),
                    ed.into(),
                    h.pp.into(),
                    h.dd.into(),
                    (f.pp / h.pp + f.dd / h.dd).into(),
                ]);
            }
        }
    }
    Ok(Output::single(t.render(run.format)))
}

fn device_config(run: &Run) -> anyhow::Result<DeviceConfig> {
    let omega = scalar(&run.omega_deg, "omega-deg", 8.0)?;
    let noise = non_negative("noise", run.noise.unwrap_or(0.0))?;
    let cfg = DeviceConfig {
        noise_rel_std: noise,
        ..DeviceConfig::with_omega(omega)
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn simulate(run: &Run) -> anyhow::Result<Output> {
    let cfg = device_config(run)?;
    let step = positive("calibration-step", run.calibration_step.unwrap_or(1.0))?;
    let alphas = uniform_alpha_grid(step)?;
    let columns: Vec<&'static str> = CALIBRATION_CSV_HEADER.split(',').collect();
    let mut t = Table::new(&columns);
    if cfg.noise_rel_std > 0.0 {
        let seed = require_seed(run, "when --noise is positive")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &a in &alphas {
            let rec = device_intensities_noisy(&cfg, hwp1_input(a), &mut rng)?;
            let s = rec.signals();
            t.push(vec![
                a.into(),
                rec.i_pp.into(),
                rec.i_pm.into(),
                rec.i_m.into(),
                s.s_z.into(),
                s.s_x.into(),
            ]);
        }
    } else {
        let table = calibration_scan(&cfg, &alphas)?;
        for r in &table.rows {
            t.push(vec![
                r.alpha_deg.into(),
                r.i_pp.into(),
                r.i_pm.into(),
                r.i_m.into(),
                r.s_z.into(),
                r.s_x.into(),
            ]);
        }
    }
    Ok(Output::single(t.render(run.format)))
}

pub fn estimate(run: &Run) -> anyhow::Result<Output> {
    let phi = scalar(&run.phi, "phi", 0.0)?;
    let delta = scalar(&run.delta, "delta", 0.3)?;
    let theta = MeasurementStrength::new(scalar(&run.theta, "theta", FRAC_PI_4)?)?;
    let truth = ParamPoint::new(phi, delta)?;
    let shots = run.shots.unwrap_or(100_000);
    if shots == 0 {
        return Err(ConfigError("--shots must be at least 1".into()).into());
    }
    let domain = SearchDomain::default();
    let mut t = Table::new(&[
        "phi_hat",
        "delta_hat",
        "converged",
        "log_likelihood",
        "trapped_at_zero",
        "at_delta_edge",
        "rotation",
    ]);
    let (e, rotation) = match (&run.counts, run.stage1) {
        (Some(_), Some(_)) => return Err(ConfigError("--counts and --stage1 are exclusive".into()).into()),
        (Some(c), None) => (mle_estimate(&OutcomeCounts::new(c.clone())?, theta, &domain)?, 0.0),
        (None, Some(split)) => {
            let seed = require_seed(run, "to sample counts")?;
            let a = simulate_adaptive(truth, theta, shots, split, seed, &domain)?;
            (a.fin, a.rotation)
        }
        (None, None) => {
            let seed = require_seed(run, "to sample counts")?;
            let p = outcome_probabilities(phi, delta, theta)?;
            (mle_estimate(&sample_outcomes(&p, shots, seed)?, theta, &domain)?, 0.0)
        }
    };
    t.push(vec![
        e.phi_hat.into(),
        e.delta_hat.into(),
        e.converged.into(),
        e.log_likelihood.into(),
        e.trapped_at_zero.into(),
        e.at_delta_edge.into(),
        rotation.into(),
    ]);
    Ok(Output::single(t.render(run.format)))
}

const SWEEP_COLUMNS: [&str; 18] = [
    "delta0",
    "phi_hat",
    "delta_hat",
    "trapped_at_zero",
    "reps",
    "mean_phi",
    "mean_delta",
    "var_phi",
    "var_delta",
    "cov",
    "correlation",
    "orientation",
    "trapped_fraction",
    "m_prime",
    "expected_var_phi",
    "expected_var_delta",
    "expected_cov",
    "expected_correlation",
];

const SAMPLE_COLUMNS: [&str; 6] = ["delta0", "rep", "seed", "phi_hat", "delta_hat", "trapped_at_zero"];

pub fn experiment(run: &Run) -> anyhow::Result<Output> {
    let cfg = DeviceConfig {
        noise_rel_std: run.noise.unwrap_or(0.01),
        ..device_config(run)?
    };
    non_negative("noise", cfg.noise_rel_std)?;
    let phi0 = scalar(&run.phi, "phi", 3.18)?;
    let deltas = grid_or(&run.delta, "0.05:0.5:10")?;
    let reps = run.reps.unwrap_or(10_000);
    if reps == 1 {
        return Err(ConfigError("--reps must be 0 (noiseless sweep only) or at least 2".into()).into());
    }
    let step = positive("calibration-step", run.calibration_step.unwrap_or(0.1))?;
    let m_prime = positive("m-prime", run.m_prime.unwrap_or(4e5))?;
    let seed = if reps > 0 {
        Some(require_seed(run, "for Monte Carlo repetitions")?)
    } else {
        None
    };

    let clean = DeviceConfig {
        noise_rel_std: 0.0,
        ..cfg
    };
    let calibration = calibration_scan(&clean, &uniform_alpha_grid(step)?)?;
    let domain = SearchDomain::default();

    let mut sweep = Table::new(&SWEEP_COLUMNS);
    let mut samples = Table::new(&SAMPLE_COLUMNS);
    let mut json_points = Vec::new();
    for (k, &d0) in deltas.iter().enumerate() {
        let truth = ParamPoint::new(phi0, d0)?;
        let e = residual_estimate(
            &synthesize_mixed(phi0, d0, &clean)?,
            &calibration,
            Interpolation::Linear,
            &domain,
        )?;
        let mut row: Vec<Cell> = vec![
            d0.into(),
            e.phi_hat.into(),
            e.delta_hat.into(),
            e.trapped_at_zero.into(),
        ];
        let mut point = json!({
            "delta0": d0,
            "noiseless": { "phi_hat": e.phi_hat, "delta_hat": e.delta_hat, "trapped_at_zero": e.trapped_at_zero },
        });
        match seed {
            Some(seed) => {
                let opts = MonteCarloOptions {
                    repetitions: reps,
                    seed: derive_seed(seed, k as u64),
                    m_prime,
                    calibration_step_deg: step,
                    interpolation: Interpolation::Linear,
                    domain,
                };
                let r = monte_carlo_covariance(truth, &cfg, &opts)?;
                let c = r.covariance;
                let (ev, ed, ec, er) = match r.expected {
                    Some(b) => (b.var_phi, b.var_delta, b.cov, b.correlation()),
                    None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
                };
                row.extend([
                    Cell::Int(reps as u64),
                    r.mean[0].into(),
                    r.mean[1].into(),
                    c[0][0].into(),
                    c[1][1].into(),
                    c[0][1].into(),
                    r.correlation.into(),
                    r.orientation.into(),
                    r.trapped_fraction.into(),
                    m_prime.into(),
                    ev.into(),
                    ed.into(),
                    ec.into(),
                    er.into(),
                ]);
                for (i, ((s, t), sd)) in r.samples.iter().zip(&r.trapped).zip(&r.seeds).enumerate() {
                    samples.push(vec![
                        d0.into(),
                        (i as u64).into(),
                        (*sd).into(),
                        s.0.into(),
                        s.1.into(),
                        (*t).into(),
                    ]);
                }
                point["monte_carlo"] = json!({
                    "phi_hat": r.samples.iter().map(|s| s.0).collect::<Vec<_>>(),
                    "delta_hat": r.samples.iter().map(|s| s.1).collect::<Vec<_>>(),
                    "mean": r.mean,
                    "cov": c,
                    "correlation": r.correlation,
                    "orientation": r.orientation,
                    "trapped_fraction": r.trapped_fraction,
                    "m_prime": m_prime,
                    "expected_cov": r.expected.map(|b| b.as_matrix()),
                    "seeds": r.seeds,
                });
            }
            None => {
                row.push(Cell::Int(0));
                row.extend(std::iter::repeat_n(Cell::Num(f64::NAN), SWEEP_COLUMNS.len() - 5));
            }
        }
        sweep.push(row);
        json_points.push(point);
    }

    match run.format {
        Format::Csv => {
            let extra = match &run.samples {
                Some(p) => vec![(p.clone(), samples.to_csv())],
                None => Vec::new(),
            };
            Ok(Output {
                main: sweep.to_csv(),
                extra_files: extra,
            })
        }
        Format::Json => {
            let doc: Value = json!({
                "omega_deg": cfg.omega_deg,
                "theta": cfg.theta()?.radians(),
                "phi0": phi0,
                "noise_rel_std": cfg.noise_rel_std,
                "calibration_step_deg": step,
                "seed": seed,
                "sweep": json_points,
            });
            let extra = match &run.samples {
                Some(p) => vec![(p.clone(), samples.to_csv())],
                None => Vec::new(),
            };
            Ok(Output {
                main: json_string(&doc),
                extra_files: extra,
            })
        }
    }
}
