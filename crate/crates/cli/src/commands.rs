//! One function per experiment. Each writes `<experiment>_<params>.csv|json`.

use cllab::asymptotics::{CascadeOptions, ExpansionSet, PolyObservable, SQRT3};
use cllab::fp::density1d::solve_complex_density;
use cllab::fp::{solve_steady, Grid2D, SteadyOptions, SteadyState};
use cllab::gauge::{eigen_csv, run_eigen, run_su2_onelink, u1_cool_check, EigenConfig, EigenState, HolonomyCosine};
use cllab::io::{coefficient_table, EstimateRecord, FitRecord, GridSidecar};
use cllab::model::{exact_expectation_quartic, strip_half_width, ComplexPoint, QuarticModel};
use cllab::sampler::{estimate_many, run_chains, SamplerConfig};
use cllab::tails::{boundary_term, diagonal_profile, fit_power_tail, marginals, TailFit};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, RunConfig};
use crate::output::{f17, tag, Outputs};
use crate::CliError;

fn z2(z: Complex64) -> Complex64 {
    z * z
}

pub fn dispatch(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let name = cfg.experiment.name();
    let r = match cfg.experiment {
        Experiment::QuarticScan => quartic_scan(cfg, out),
        Experiment::FpSolve => fp_solve(cfg, out),
        Experiment::Tails => tails(cfg, out),
        Experiment::Boundary => boundary(cfg, out),
        Experiment::Asymptotics => asymptotics(cfg, out),
        Experiment::Su2 => su2(cfg, out),
        Experiment::U1CoolCheck => u1(cfg, out),
        Experiment::Eigen => eigen(cfg, out),
    };
    r.map_err(|e| e.context(name))
}

fn steady(cfg: &RunConfig, b: f64) -> Result<SteadyState, CliError> {
    let model = QuarticModel::new(b)?;
    let grid = cfg.fp.grid()?;
    solve_steady(&model, grid, cfg.fp.backend, &cfg.fp.steady_options()).map_err(|e| CliError::Core(e.into()))
}

#[derive(Debug, Clone, Default)]
struct ScanRow {
    b: f64,
    cl: Option<(Complex64, f64, usize)>,
    fp: Option<Complex64>,
    exact: Option<Complex64>,
    errors: Vec<String>,
}

fn scan_point(cfg: &RunConfig, b: f64) -> ScanRow {
    let mut row = ScanRow { b, ..Default::default() };
    match exact_expectation_quartic(b, z2) {
        Ok(v) => row.exact = Some(v),
        Err(e) => row.errors.push(format!("exact: {e}")),
    }
    if cfg.scan.method.runs_cl() {
        let run = QuarticModel::new(b)
            .and_then(|m| run_chains(&m, &cfg.sampler.sampler_config(cfg.seed), cfg.sampler.chains))
            .and_then(|t| Ok((estimate_many(&t, z2)?, t.iter().map(|t| t.overflow_count).sum())));
        match run {
            Ok((est, ov)) => row.cl = Some((est.mean, est.stderr.im, ov)),
            Err(e) => row.errors.push(format!("cl: {e}")),
        }
    }
    if cfg.scan.method.runs_fp() {
        // At B = 0 the density lives on the real axis; the 2-D solve has no strip to resolve.
        let fp = if b == 0.0 {
            let f = &cfg.fp;
            solve_complex_density(0.0, f.x_min, f.x_max, f.n, f.dt, f.tol, f.max_t).map(|d| d.expectation(z2)).map_err(CliError::from)
        } else {
            steady(cfg, b).map(|st| st.p.expectation(z2))
        };
        match fp {
            Ok(v) => row.fp = Some(v),
            Err(e) => row.errors.push(format!("fp: {e}")),
        }
    }
    row
}

fn opt17(x: Option<f64>) -> String {
    x.map(f17).unwrap_or_else(|| "NaN".into())
}

fn quartic_scan(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let rows: Vec<ScanRow> = cfg.scan.b_list.par_iter().map(|&b| scan_point(cfg, b)).collect();
    let mut csv = String::from("B,im_O_cl,im_O_fp,im_O_exact,stderr,overflow_count\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f17(r.b),
            opt17(r.cl.map(|c| c.0.im)),
            opt17(r.fp.map(|c| c.im)),
            opt17(r.exact.map(|c| c.im)),
            opt17(r.cl.map(|c| c.1)),
            r.cl.map(|c| c.2).unwrap_or(0)
        ));
    }
    let method = format!("{:?}", cfg.scan.method).to_lowercase();
    let base = format!("quartic-scan_B{}_{method}", cfg.scan.b_list.iter().map(|b| tag(*b)).collect::<Vec<_>>().join("-"));
    out.csv(&format!("{base}.csv"), &csv)?;
    let summary: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "B": r.b,
                "cl": r.cl.map(|c| json!({"re": c.0.re, "im": c.0.im, "stderr_im": c.1, "overflow_count": c.2})),
                "fp": r.fp.map(|c| json!({"re": c.re, "im": c.im})),
                "exact": r.exact.map(|c| json!({"re": c.re, "im": c.im})),
                "errors": r.errors,
            })
        })
        .collect();
    out.json(&format!("{base}.json"), json!({ "rows": summary }))
}

fn fp_solve(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let b = cfg.fp_solve.b;
    let st = steady(cfg, b)?;
    let g = st.p.grid;
    let backend = serde_json::to_value(st.backend)?;
    let base = format!("fp-solve_B{}_{}_{}x{}", tag(b), backend.as_str().unwrap_or("fp"), g.n, g.m);
    out.csv(&format!("{base}.csv"), &st.p.to_csv())?;
    let mean = st.p.expectation(z2);
    let exact = exact_expectation_quartic(b, z2)?;
    let mut v = serde_json::to_value(GridSidecar::from(&st))?;
    v["B"] = json!(b);
    v["mean_re"] = json!(mean.re);
    v["mean_im"] = json!(mean.im);
    v["exact_re"] = json!(exact.re);
    v["exact_im"] = json!(exact.im);
    out.json(&format!("{base}.json"), v)
}

fn fit_json(f: cllab::Result<TailFit>) -> Value {
    match f {
        Ok(f) => serde_json::to_value(FitRecord::from(&f)).expect("plain record"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn tails(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let t = &cfg.tails;
    let st = steady(cfg, t.b)?;
    let (mx, my) = marginals(&st.p);
    let diag = diagonal_profile(&st.p);
    let base = format!("tails_B{}", tag(t.b));
    out.csv(&format!("{base}_px.csv"), &mx.to_csv())?;
    out.csv(&format!("{base}_py.csv"), &my.to_csv())?;
    out.csv(&format!("{base}_diagonal.csv"), &diag.to_csv())?;
    out.json(
        &format!("{base}.json"),
        json!({
            "B": t.b,
            "px": fit_json(fit_power_tail(&mx, t.window_x[0], t.window_x[1])),
            "py": fit_json(fit_power_tail(&my, t.window_y[0], t.window_y[1])),
            "diagonal": fit_json(fit_power_tail(&diag, t.window_diagonal[0], t.window_diagonal[1])),
            "steady": GridSidecar::from(&st),
        }),
    )
}

fn boundary(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let bs = &cfg.boundary;
    let st = steady(cfg, bs.b)?;
    let model = QuarticModel::new(bs.b)?;
    let g = st.p.grid;
    let mut csv = String::from("y,re_E,im_E\n");
    let mut window = Vec::new();
    for j in 0..g.m {
        let y = g.y(j);
        if y < 0.0 {
            continue;
        }
        let e = boundary_term(&st.p, &model, z2, y)?;
        csv.push_str(&format!("{},{},{}\n", f17(y), f17(e.re), f17(e.im)));
        if y >= bs.window[0] && y <= bs.window[1] {
            window.push(e.re);
        }
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n.max(1.0);
    let std = (window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let base = format!("boundary_B{}", tag(bs.b));
    out.csv(&format!("{base}.csv"), &csv)?;
    out.json(
        &format!("{base}.json"),
        json!({
            "B": bs.b,
            "window": bs.window,
            "n_rows": window.len(),
            "plateau_re": mean,
            "plateau_std": std,
            "strip_half_width": strip_half_width(bs.b).ok(),
            "steady": GridSidecar::from(&st),
        }),
    )
}

fn asymptotics(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let a = &cfg.asymptotics;
    let grid = Grid2D::new(-a.x_max, a.x_max, -a.y_max, a.y_max, a.n, a.m)?;
    let opts = CascadeOptions { steady: SteadyOptions { dt: a.dt, max_t: a.max_t, ..Default::default() }, level_tol: a.level_tol };
    let obs = PolyObservable::monomial(a.power);
    let set = ExpansionSet::build(a.order, grid, &opts, &obs)?;
    let terms = set.obs_coeffs.len();
    let mut csv = String::from("eps,re_series,im_series,re_integer,im_integer,re_exact,im_exact\n");
    for &eps in &a.eps_list {
        let s = set.observable_at(eps, terms);
        let d = set.observable_integer_orders(eps);
        let ex = exact_expectation_quartic(SQRT3 - eps, |z| obs.eval(z))?;
        csv.push_str(&format!("{},{},{},{},{},{},{}\n", f17(eps), f17(s.re), f17(s.im), f17(d.re), f17(d.im), f17(ex.re), f17(ex.im)));
    }
    let base = format!("asymptotics_L{}_{}x{}", a.order, a.n, a.m);
    out.csv(&format!("{base}.csv"), &csv)?;
    let direct: Vec<Value> = set.obs_direct.iter().enumerate().map(|(l, c)| json!({"l": l, "re": c.re, "im": c.im})).collect();
    out.json(
        &format!("{base}.json"),
        json!({
            "table": coefficient_table(&set.obs_coeffs),
            "direct": direct,
            "level_residuals": set.cascade.residuals,
        }),
    )
}

fn su2(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let s = &cfg.su2;
    let sc = SamplerConfig { initial_point: ComplexPoint::new(s.x0, s.y0), ..cfg.sampler.sampler_config(cfg.seed) };
    let (trajs, run) = run_su2_onelink(s.a, s.b, &sc, cfg.sampler.chains, s.cooled)?;
    let base = format!("su2_A{}_B{}_{}", tag(s.a), tag(s.b), if s.cooled { "cooled" } else { "uncooled" });
    if let Some(t) = trajs.first() {
        out.csv(&format!("{base}.csv"), &t.to_csv())?;
    }
    let rec = EstimateRecord::new("su2_onelink", &[("A", s.a), ("B", s.b)], &run.estimate, run.overflow_count, cfg.seed);
    let mut v = serde_json::to_value(rec)?;
    v["exact_re"] = json!(run.exact.re);
    v["exact_im"] = json!(run.exact.im);
    v["sigmas"] = json!(run.sigmas);
    v["pole_rejections"] = json!(run.pole_rejections);
    v["cooled"] = json!(s.cooled);
    out.json(&format!("{base}.json"), v)
}

fn u1(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let u = &cfg.u1;
    let rep = u1_cool_check(u.n_links, &HolonomyCosine { a: u.a, b: u.b }, u.dt, u.steps, cfg.seed)?;
    out.json(&format!("u1-cool-check_N{}.json", u.n_links), serde_json::to_value(rep)?)
}

/// `log lambda_j = s (j - (n-1)/2) + i (2 pi j / n + 0.4 - mean)`, so the product is one.
pub fn eigen_initial(n: usize, n_links: usize, spread: f64) -> Result<EigenState, CliError> {
    let phases: Vec<f64> = (0..n).map(|j| std::f64::consts::TAU * j as f64 / n as f64 + 0.4).collect();
    let mean = phases.iter().sum::<f64>() / n as f64;
    let lambda = (0..n).map(|j| Complex64::new(spread * (j as f64 - 0.5 * (n as f64 - 1.0)), phases[j] - mean).exp()).collect();
    Ok(EigenState::new(lambda, n_links)?)
}

fn eigen(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let e = &cfg.eigen;
    let ec = EigenConfig {
        n: e.n,
        n_links: e.n_links,
        a: e.a,
        b: e.b,
        j_zero: e.j_zero,
        dt: e.dt,
        steps: e.steps,
        record_every: e.record_every,
        paths: e.paths,
        seed: cfg.seed,
        renormalize: true,
    };
    let init = eigen_initial(e.n, e.n_links, e.init_spread)?;
    let run = run_eigen(&init, &ec)?;
    let base = format!("eigen_n{}_N{}_A{}_B{}", e.n, e.n_links, tag(e.a), tag(e.b));
    out.csv(&format!("{base}.csv"), &eigen_csv(&run.times, &run.first_path))?;
    let slopes: Vec<f64> = run.mean_sq_norm.windows(2).zip(run.times.windows(2)).map(|(v, t)| (v[1] - v[0]) / (t[1] - t[0])).collect();
    let max_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.json(
        &format!("{base}.json"),
        json!({
            "times": run.times,
            "mean_sq_norm": run.mean_sq_norm,
            "mean_trace_re": run.mean_trace.iter().map(|c| c.re).collect::<Vec<_>>(),
            "mean_trace_im": run.mean_trace.iter().map(|c| c.im).collect::<Vec<_>>(),
            "max_product_defect": run.max_product_defect,
            "max_slope": max_slope,
        }),
    )
}
