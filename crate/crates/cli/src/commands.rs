use std::fs;
use std::io::{self, Write};
use std::path::Path;

use tat_core::bench::{loglog_slope, median_seconds};
use tat_core::exact::{grad_exact, grad_fd};
use tat_core::format::{parse_instance, write_instance, write_matrix};
use tat_core::hardness::{
    avg_estimate, b_emp, derivative_bound, f_lambda, f_prime, gh_terms, majority,
    make_hard_instance,
};
use tat_core::{grad_fast, grad_fast_with_range, AttnInstance, Limits, TatError};

use crate::{BenchArgs, BenchEngine, CheckArgs, Command, Engine, GenArgs, GradArgs, ProbeArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// Floor on the relative finite-difference tolerance; central differences
/// at step 1e-5 cannot do better in double precision.
const FD_REL_FLOOR: f64 = 1e-5;

#[derive(Debug)]
enum Failure {
    Core(TatError),
    Tolerance(String),
}

impl From<TatError> for Failure {
    fn from(e: TatError) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(TatError::Io(e))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Core(TatError::Io(io::Error::other(e)))
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> u8 {
    let result = match command {
        Command::Gen(a) => gen(a),
        Command::Grad(a) => grad(a),
        Command::Check(a) => check(a),
        Command::Bench(a) => bench(a),
        Command::Probe(a) => probe(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                TatError::Validation(_) => {
                    eprintln!("run `tat --help` for usage");
                    EXIT_VALIDATION
                }
                TatError::Numerical(_) => EXIT_NUMERICAL,
                TatError::Io(_) => EXIT_IO,
            }
        }
        Err(Failure::Tolerance(msg)) => {
            eprintln!("FAIL: {msg}");
            EXIT_NUMERICAL
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load(path: &Path) -> Result<AttnInstance, Failure> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text).map_err(|e| match e {
        TatError::Validation(msg) => {
            TatError::Validation(format!("{}: {msg}", path.display())).into()
        }
        other => other.into(),
    })
}

fn gen(a: GenArgs) -> Outcome {
    let inst = AttnInstance::random(a.n, a.d, a.bound, a.seed)?;
    emit(&write_instance(&inst), a.out.as_deref())
}

fn grad(a: GradArgs) -> Outcome {
    let inst = load(&a.input)?;
    let limits = Limits::from_env();
    let g = match a.engine {
        Engine::Exact => grad_exact(&inst, &limits)?,
        Engine::Fast => {
            let rep = grad_fast(&inst, a.eps, &limits)?;
            eprintln!(
                "fast: degree {} ranks k1={} k3={} k5={} eps_target {:e}",
                rep.degree, rep.k1, rep.k3, rep.k5, rep.eps_target
            );
            for t in &rep.stage_timings {
                log::info!("stage {}: {:.6} s", t.stage, t.seconds);
            }
            rep.g_tilde
        }
    };
    emit(&write_matrix(&g), a.out.as_deref())
}

fn check(a: CheckArgs) -> Outcome {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(TatError::Validation(format!("tol must be positive, got {}", a.tol)).into());
    }
    let inst = load(&a.input)?;
    let limits = Limits::from_env();
    let rep = grad_fast(&inst, a.eps, &limits)?;
    let mut fast = rep.g_tilde;
    if let Some(delta) = a.perturb {
        fast.data_mut()[0] += delta;
    }
    let exact = grad_exact(&inst, &limits)?;
    let err = fast.max_abs_diff(&exact)?;
    eprintln!(
        "fast vs exact: linf {err:e} (tol {:e}, eps_target {:e})",
        a.tol, rep.eps_target
    );
    let mut failures = Vec::new();
    if !(err <= a.tol) {
        failures.push(format!("fast vs exact {err:e} > tol {:e}", a.tol));
    }

    if inst.n <= limits.fd_max_n && inst.d <= limits.fd_max_d {
        let fd = grad_fd(&inst, a.fd_step, &limits)?;
        let rel_tol = a.tol.max(FD_REL_FLOOR);
        let floor = 1e-3 * exact.max_abs();
        let worst = exact
            .data()
            .iter()
            .zip(fd.data())
            .map(|(e, f)| (e - f).abs() / e.abs().max(floor).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        eprintln!("exact vs finite differences: max relative {worst:e} (tol {rel_tol:e})");
        if !(worst <= rel_tol) {
            failures.push(format!(
                "exact vs finite differences {worst:e} > {rel_tol:e}"
            ));
        }
    } else {
        eprintln!(
            "finite differences skipped: n = {}, d = {} above caps {} / {}",
            inst.n, inst.d, limits.fd_max_n, limits.fd_max_d
        );
    }

    if failures.is_empty() {
        eprintln!("OK");
        Ok(())
    } else {
        Err(Failure::Tolerance(failures.join("; ")))
    }
}

#[derive(serde::Serialize)]
struct BenchRow {
    n: usize,
    d: usize,
    eps: Option<f64>,
    degree_g: Option<usize>,
    k1: Option<usize>,
    k5: Option<usize>,
    method: &'static str,
    wall_seconds: f64,
    linf_err_vs_exact: Option<f64>,
    seed: u64,
}

fn bench(a: BenchArgs) -> Outcome {
    if a.n_list.is_empty() || a.n_list.contains(&0) {
        return Err(TatError::Validation("n-list must hold positive sizes".into()).into());
    }
    let limits = Limits::from_env();
    let run_fast = matches!(a.engine, BenchEngine::Fast | BenchEngine::Both);
    let run_exact = matches!(a.engine, BenchEngine::Exact | BenchEngine::Both);
    if run_exact {
        if let Some(&n) = a.n_list.iter().find(|&&n| n > limits.exact_cap) {
            return Err(TatError::Validation(format!(
                "n = {n} exceeds the exact-engine cap {} (set TAT_EXACT_CAP to raise it)",
                limits.exact_cap
            ))
            .into());
        }
    }

    let instances = a
        .n_list
        .iter()
        .map(|&n| AttnInstance::random(n, a.d, a.bound, a.seed))
        .collect::<Result<Vec<_>, _>>()?;
    // One argument bound for the whole sweep keeps the series degree fixed.
    let range = instances
        .iter()
        .map(AttnInstance::exp_arg_bound)
        .fold(0.0, f64::max);

    let mut writer: csv::Writer<Box<dyn Write>> = csv::Writer::from_writer(match &a.csv {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(io::stdout()),
    });
    let mut fast_times = Vec::new();
    let mut exact_times = Vec::new();

    for inst in &instances {
        let n = inst.n;
        if run_fast {
            let (secs, rep) = median_seconds(a.repeats, || {
                grad_fast_with_range(inst, a.eps, range, &limits)
            })?;
            let err = if n <= a.oracle_max_n && n <= limits.exact_cap {
                Some(rep.g_tilde.max_abs_diff(&grad_exact(inst, &limits)?)?)
            } else {
                None
            };
            writer.serialize(BenchRow {
                n,
                d: a.d,
                eps: Some(a.eps),
                degree_g: Some(rep.degree),
                k1: Some(rep.k1),
                k5: Some(rep.k5),
                method: "fast",
                wall_seconds: secs,
                linf_err_vs_exact: err,
                seed: a.seed,
            })?;
            writer.flush()?;
            fast_times.push((n as f64, secs));
        }
        if run_exact {
            let (secs, _) = median_seconds(a.repeats, || grad_exact(inst, &limits))?;
            writer.serialize(BenchRow {
                n,
                d: a.d,
                eps: None,
                degree_g: None,
                k1: None,
                k5: None,
                method: "exact",
                wall_seconds: secs,
                linf_err_vs_exact: None,
                seed: a.seed,
            })?;
            writer.flush()?;
            exact_times.push((n as f64, secs));
        }
    }

    for (name, times) in [("fast", &fast_times), ("exact", &exact_times)] {
        if times.len() >= 2 && times.iter().all(|&(_, t)| t > 0.0) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = times.iter().copied().unzip();
            eprintln!("{name}: log-log slope {:.3}", loglog_slope(&xs, &ys)?);
        }
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ProbeRow {
    lambda: f64,
    f: f64,
    f_prime: f64,
}

fn probe(a: ProbeArgs) -> Outcome {
    if a.grid == 0 {
        return Err(TatError::Validation("grid must be at least 1".into()).into());
    }
    let hi = make_hard_instance(a.n, a.d, a.ba, a.seed)?;
    let bound = derivative_bound(&hi);
    let mut failures = Vec::new();

    let mut writer = csv::Writer::from_writer(io::stdout());
    for k in 0..=a.grid {
        let lambda = k as f64 / a.grid as f64;
        let fp = f_prime(&hi, lambda)?;
        writer.serialize(ProbeRow {
            lambda,
            f: f_lambda(&hi, lambda)?,
            f_prime: fp,
        })?;
        if !(fp.abs() <= bound) {
            failures.push(format!("|f'({lambda})| = {:e} > {bound:e}", fp.abs()));
        }
        let lower = (majority(hi.n) as f64).powi(2) * (2.0 * hi.ba * lambda).exp();
        let upper = (hi.n as f64).powi(4) * (2.0 * hi.ba * lambda).exp();
        for i in 0..hi.n {
            let (_, h) = gh_terms(&hi, lambda, i)?;
            if !(h >= lower * (1.0 - 1e-12) && h <= upper * (1.0 + 1e-12)) {
                failures.push(format!(
                    "h({lambda}, {i}) = {h:e} outside [{lower:e}, {upper:e}]"
                ));
            }
        }
    }
    writer.flush()?;

    let delta = f_lambda(&hi, 1.0)? - f_lambda(&hi, 0.0)?;
    let b = b_emp(&hi)?;
    let s_t = avg_estimate(&hi, a.t)?;
    let err = (s_t - delta).abs();
    let allowed = b / a.t as f64;
    eprintln!("derivative bound 8·Ba·n·d = {bound:e}");
    eprintln!("s_t = {s_t:e}, f(1) - f(0) = {delta:e}, |diff| = {err:e}, b_emp/t = {allowed:e}");
    if !(err <= allowed) {
        failures.push(format!("averaging error {err:e} > b_emp/t = {allowed:e}"));
    }

    if failures.is_empty() {
        eprintln!("OK");
        Ok(())
    } else {
        Err(Failure::Tolerance(failures.join("; ")))
    }
}
