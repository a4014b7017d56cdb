//! Subcommand implementations. Each validates its inputs completely before
//! computing anything or creating the output directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use glvar::asymptotics::{predict_energy, PredictionReport};
use glvar::fhat::{tabulate_fhat, FhatTable, TabulationConfig};
use glvar::fieldgen::{build_lattice, default_schedules, MagneticProfile};
use glvar::glsolve::{diagnose_minimizer, minimize, write_trace, Init, Mode, SolveConfig};
use glvar::io::{read_checkpoint, read_real_field, write_checkpoint};
use glvar::refcell::{cell_inequalities, csv_row, ordering_slack, solve_cell, BoundaryCondition, CellProblem, CellResult, CSV_HEADER};
use glvar::vortex::{classify_squares, detect_vortices, measure_convergence_report, vorticity_measure, DetectConfig, MeasureReport, VortexSet};
use glvar::{energy, GaugeField, Grid2D, OrderParameter, Params};

use crate::settings::Settings;
use crate::svg::{bar_chart, heatmap, phase_map, Raster};
use crate::CliError;

pub const SCHEMA_PREDICTION: &str = glvar::asymptotics::PREDICTION_SCHEMA;
pub const SCHEMA_MINIMIZE: &str = "glvar-minimize-v1";
pub const SCHEMA_VORTICES: &str = "glvar-vortices-v1";
pub const SCHEMA_REPORT: &str = "glvar-report-v1";

/// `max|psi|` allowed for a converged minimizer.
pub const MAX_PSI_SLACK: f64 = 1e-6;

fn create_out(s: &Settings) -> Result<PathBuf, CliError> {
    let dir = s.out_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

/// JSON object with schema tag, tool version and config hash next to
/// `body`'s fields.
fn write_json(path: &Path, s: &Settings, schema: &str, body: impl Serialize) -> Result<(), CliError> {
    let mut v = json!({ "schema": schema, "glvar_version": env!("CARGO_PKG_VERSION"), "config_hash": s.hash() });
    let body = serde_json::to_value(body).map_err(|e| CliError::Failure(e.to_string()))?;
    match body {
        Value::Object(m) => v.as_object_mut().unwrap().extend(m.into_iter().filter(|(k, _)| k != "schema")),
        other => {
            v["data"] = other;
        }
    }
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &v)?;
        writeln!(w)
    })
}

fn write_svg(path: &Path, s: &Settings, body: &str) -> Result<(), CliError> {
    let comment = format!("<!-- {} -->\n", s.preamble().join("; "));
    let body = body.replacen('\n', &format!("\n{comment}"), 1);
    write_file(path, |w| w.write_all(body.as_bytes()))
}

pub fn profile(s: &Settings) -> Result<MagneticProfile, CliError> {
    let thr: f64 = s.get("nondegeneracy")?;
    let kind = s.raw("profile");
    if kind == "custom" {
        let path = s.input("profile_file")?.ok_or_else(|| CliError::Usage("custom profile needs profile_file".into()))?;
        return Ok(MagneticProfile::custom(read_real_field(&path)?, thr)?);
    }
    let d: Vec<f64> = s.list("domain")?;
    if d.len() != 4 || !(d[2] > d[0] && d[3] > d[1]) {
        return Err(CliError::Usage("domain needs x0,y0,x1,y1 with x1 > x0 and y1 > y0".into()));
    }
    let g = Grid2D::covering([d[0], d[1]], [d[2] - d[0], d[3] - d[1]], s.get("cells")?)?;
    Ok(match kind {
        "constant" => MagneticProfile::constant(g, s.get("beta")?, thr)?,
        "affine" => {
            let sl: Vec<f64> = s.list("slope")?;
            if sl.len() != 2 {
                return Err(CliError::Usage("slope needs two components".into()));
            }
            MagneticProfile::affine(g, s.get("offset")?, [sl[0], sl[1]], thr)?
        }
        "x1" => MagneticProfile::x1(g, thr)?,
        other => return Err(CliError::Usage(format!("unknown profile '{other}'"))),
    })
}

fn params(s: &Settings) -> Result<Params, CliError> {
    Ok(Params::new(s.get("kappa")?, s.get("H")?)?)
}

fn load_table(path: &Path) -> Result<FhatTable, CliError> {
    let f = File::open(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    Ok(FhatTable::read_csv(BufReader::new(f))?)
}

fn load_state(path: &Path, b0: &MagneticProfile, p: &Params) -> Result<(OrderParameter, GaugeField), CliError> {
    let (psi, stream) = read_checkpoint(path)?;
    if !psi.grid().same_shape(b0.grid()) {
        return Err(CliError::Usage(format!("checkpoint grid {}x{} does not match the profile grid {}x{}", psi.grid().nx(), psi.grid().ny(), b0.grid().nx(), b0.grid().ny())));
    }
    let a = GaugeField::from_stream(*psi.grid(), stream.into_values(), p.kappa_h())?;
    Ok((psi, a))
}

fn ordering_label(rows: &[&CellResult]) -> &'static str {
    let e = |bc| rows.iter().find(|r| r.problem.bc == bc).map(|r| r.energy);
    match (e(BoundaryCondition::Dirichlet), e(BoundaryCondition::Periodic), e(BoundaryCondition::Neumann)) {
        (Some(d), Some(p), Some(n)) => {
            let slack = ordering_slack(rows[0].problem.r);
            if n <= p + slack && p <= d + slack {
                "ok"
            } else {
                "violated"
            }
        }
        _ => "na",
    }
}

pub fn refcell(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let bs: Vec<f64> = s.list("b")?;
    let ks: Vec<f64> = s.list("R2pi")?;
    let bcs: Vec<BoundaryCondition> = if s.raw("bc") == "all" {
        BoundaryCondition::ALL.to_vec()
    } else {
        s.raw("bc").split(',').map(|t| t.trim().parse().map_err(|e: glvar::Error| CliError::Usage(e.to_string()))).collect::<Result<_, _>>()?
    };
    let sigma: i8 = s.get("sigma")?;
    let density: f64 = s.get("density")?;
    let timings: bool = s.get("timings")?;
    if bs.is_empty() || ks.is_empty() || !(density > 0.0) {
        return Err(CliError::Usage("need nonempty b and R2pi lists and a positive density".into()));
    }
    let template = |b: f64, k: f64, bc| {
        let r = CellProblem::side_from_flux(k);
        let mut p = CellProblem::new(b, r, bc);
        p.sigma = sigma;
        p.cells = ((r * density).round() as usize).max(4);
        p.random_starts = s.get("random_starts")?;
        p.seed = s.get("seed")?;
        p.validate()?;
        Ok::<_, CliError>(p)
    };
    for &b in &bs {
        for &k in &ks {
            for &bc in &bcs {
                template(b, k, bc)?;
            }
        }
    }
    let out = create_out(s)?;
    let mut lines = Vec::new();
    let mut converged = true;
    let mut ordered = true;
    for &b in &bs {
        for &k in &ks {
            let all = BoundaryCondition::ALL.iter().all(|bc| bcs.contains(bc));
            let r = CellProblem::side_from_flux(k);
            let results: Vec<CellResult> = if all && b < 1.0 && r >= 1.0 {
                cell_inequalities(&template(b, k, BoundaryCondition::Dirichlet)?, false)?.1
            } else {
                bcs.iter().map(|&bc| Ok(solve_cell(&template(b, k, bc)?)?)).collect::<Result<_, CliError>>()?
            };
            let refs: Vec<&CellResult> = results.iter().collect();
            let label = ordering_label(&refs);
            ordered &= label != "violated";
            for bc in &bcs {
                let row = results.iter().find(|x| x.problem.bc == *bc).expect("solved");
                converged &= row.converged;
                lines.push(format!("{},{label}", csv_row(row, timings)));
            }
        }
    }
    let path = out.join("refcell.csv");
    write_file(&path, |w| {
        for l in s.preamble() {
            writeln!(w, "# {l}")?;
        }
        writeln!(w, "{CSV_HEADER},ordering")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    if !converged {
        return Err(CliError::NonConvergence("some cell solves did not converge (see refcell.csv)".into()));
    }
    if !ordered {
        return Err(CliError::Invariant("boundary-condition ordering violated (see refcell.csv)".into()));
    }
    Ok(vec![path])
}

pub fn fhat(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let bs: Vec<f64> = s.list("b")?;
    let cfg = TabulationConfig { flux: s.list("flux")?, density: s.get("density")?, random_starts: s.get("random_starts")?, seed: s.get("seed")? };
    if bs.is_empty() || cfg.flux.is_empty() || bs.iter().any(|b| !(*b > 0.0)) {
        return Err(CliError::Usage("need positive b values and a nonempty flux list".into()));
    }
    let out = create_out(s)?;
    let table = tabulate_fhat(&bs, &cfg)?;
    let path = out.join("fhat.csv");
    write_file(&path, |w| table.write_csv(w, &s.preamble()))?;
    if table.rows.iter().any(|r| !r.converged) {
        return Err(CliError::NonConvergence("some rows did not converge (see fhat.csv)".into()));
    }
    Ok(vec![path])
}

pub fn predict(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let table_path = s.input("table")?.expect("required key");
    let checkpoint = s.input("checkpoint")?;
    let p = params(s)?;
    let b0 = profile(s)?;
    let table = load_table(&table_path)?;
    let measured = match &checkpoint {
        Some(c) => {
            let (psi, a) = load_state(c, &b0, &p)?;
            Some(energy(&psi, &a, b0.field(), &p, None)?)
        }
        None => None,
    };
    let pred = predict_energy(&b0, p.kappa, p.field, &table)?;
    let report = PredictionReport::new(&b0, &pred, measured)?;
    let out = create_out(s)?;
    let path = out.join("prediction.json");
    write_json(&path, s, SCHEMA_PREDICTION, &report)?;
    Ok(vec![path])
}

fn solve_config(s: &Settings) -> Result<SolveConfig, CliError> {
    let mode = match s.raw("mode") {
        "psi-only" => Mode::PsiOnly,
        "coupled" => Mode::Coupled,
        m => return Err(CliError::Usage(format!("unknown mode '{m}'"))),
    };
    let init = match s.raw("init") {
        "uniform" => Init::Uniform,
        "random-phase" => Init::RandomPhase,
        "zero" => Init::Zero,
        m => return Err(CliError::Usage(format!("unknown init '{m}'"))),
    };
    Ok(SolveConfig {
        mode,
        init,
        tol: s.get("tol")?,
        max_iter: s.get("max_iter")?,
        restarts: s.get("restarts")?,
        seed: s.get("seed")?,
        c_res: s.get("c_res")?,
        min_coarse_cells: s.get("min_coarse_cells")?,
        coarse_tol: s.get("coarse_tol")?,
        prune_before_finest: s.get("prune")?,
        max_outer: s.get("max_outer")?,
        inner_iter: s.get("inner_iter")?,
        trace_every: s.get("trace_every")?,
    })
}

pub fn minimize_cmd(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let p = params(s)?;
    let b0 = profile(s)?;
    let cfg = solve_config(s)?;
    glvar::glsolve::check_resolution(b0.grid(), p.kappa, p.field, b0.sup_abs(), cfg.c_res)?;
    let out = create_out(s)?;
    let r = minimize(&b0, p.kappa, p.field, &cfg)?;
    let diag = diagnose_minimizer(&r.psi, &r.a, &b0, p.kappa, p.field)?;
    let ck = out.join("checkpoint.bin");
    write_checkpoint(&ck, &r.psi, &r.a)?;
    let trace = out.join("trace.csv");
    write_file(&trace, |w| write_trace(w, &r.trace, &s.preamble()))?;
    let summary = out.join("minimize.json");
    write_json(
        &summary,
        s,
        SCHEMA_MINIMIZE,
        json!({
            "energy": r.energy,
            "diagnostics": diag,
            "psi_stationarity": r.psi_stationarity,
            "converged": r.converged,
            "restart": r.restart,
            "restart_energies": r.restart_energies,
        }),
    )?;
    let files = vec![ck, trace, summary];
    if !r.converged {
        return Err(CliError::NonConvergence(format!("stationarity {:e} above target (outputs flagged)", r.psi_stationarity)));
    }
    if diag.max_psi > 1.0 + MAX_PSI_SLACK {
        return Err(CliError::Invariant(format!("max|psi| = {} exceeds 1", diag.max_psi)));
    }
    Ok(files)
}

/// Default test boxes: left and right halves, then four vertical strips.
pub fn default_regions(g: &Grid2D) -> Vec<([f64; 2], [f64; 2])> {
    let o = g.origin();
    let [lx, ly] = g.extent();
    let (x0, y0, x1, y1) = (o[0], o[1], o[0] + lx, o[1] + ly);
    let xm = 0.5 * (x0 + x1);
    let mut out = vec![([x0, y0], [xm, y1]), ([xm, y0], [x1, y1])];
    for k in 0..4 {
        out.push(([x0 + k as f64 * lx / 4.0, y0], [x0 + (k + 1) as f64 * lx / 4.0, y1]));
    }
    out
}

fn regions(s: &Settings, g: &Grid2D) -> Result<Vec<([f64; 2], [f64; 2])>, CliError> {
    let raw = s.raw("regions");
    if raw.is_empty() {
        return Ok(default_regions(g));
    }
    raw.split(';')
        .map(|b| {
            let v: Vec<f64> = b.split(',').map(|t| t.trim().parse()).collect::<Result<_, _>>().map_err(|_| CliError::Usage(format!("bad region '{b}'")))?;
            if v.len() != 4 {
                return Err(CliError::Usage(format!("region '{b}' needs four numbers")));
            }
            Ok(([v[0], v[1]], [v[2], v[3]]))
        })
        .collect()
}

fn vortex_rho(p: &Params) -> f64 {
    default_schedules(p.kappa, p.field).map(|s| s.rho_vortex).unwrap_or(0.0)
}

struct VortexOutputs {
    set: VortexSet,
    report: MeasureReport,
}

fn analyse_vortices(s: &Settings, psi: &OrderParameter, a: &GaugeField, b0: &MagneticProfile, p: &Params) -> Result<VortexOutputs, CliError> {
    let threshold: f64 = s.get("threshold")?;
    let set = detect_vortices(psi, Some(a), &DetectConfig { threshold, region: None })?;
    let mu = vorticity_measure(&set, p.kappa, p.field)?;
    let report = measure_convergence_report(&mu, b0, &regions(s, b0.grid())?, vortex_rho(p))?;
    Ok(VortexOutputs { set, report })
}

fn disks_json(set: &VortexSet) -> Value {
    json!({
        "threshold": set.threshold,
        "total_degree": set.total_degree(),
        "truncated": set.disks.iter().filter(|d| d.truncated).count(),
        "disks": set.disks.iter().map(|d| json!({ "x": d.center[0], "y": d.center[1], "r": d.radius, "d": d.degree })).collect::<Vec<_>>(),
    })
}

pub fn vortices(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let ck = s.input("checkpoint")?.expect("required key");
    let p = params(s)?;
    let b0 = profile(s)?;
    regions(s, b0.grid())?;
    let (psi, a) = load_state(&ck, &b0, &p)?;
    let v = analyse_vortices(s, &psi, &a, &b0, &p)?;
    let out = create_out(s)?;
    let json_path = out.join("vortices.json");
    write_json(&json_path, s, SCHEMA_VORTICES, disks_json(&v.set))?;
    let csv_path = out.join("measure.csv");
    write_file(&csv_path, |w| {
        for l in s.preamble() {
            writeln!(w, "# {l}")?;
        }
        v.report.write_csv(w)
    })?;
    Ok(vec![json_path, csv_path])
}

pub fn report(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let ck = s.input("checkpoint")?.expect("required key");
    let table_path = s.input("table")?.expect("required key");
    let p = params(s)?;
    let b0 = profile(s)?;
    let tau: f64 = s.get("tau")?;
    regions(s, b0.grid())?;
    let table = load_table(&table_path)?;
    let (psi, a) = load_state(&ck, &b0, &p)?;
    let measured = energy(&psi, &a, b0.field(), &p, None)?;
    let pred = predict_energy(&b0, p.kappa, p.field, &table)?;
    let prediction = PredictionReport::new(&b0, &pred, Some(measured))?;
    let diag = diagnose_minimizer(&psi, &a, &b0, p.kappa, p.field)?;
    let v = analyse_vortices(s, &psi, &a, &b0, &p)?;
    let classification = match default_schedules(p.kappa, p.field) {
        Ok(sch) if sch.subdivisions > 0 => {
            let lattice = build_lattice(&b0, sch.ell, sch.rho_vortex)?;
            let reference = glvar::fieldgen::build_f(&b0, p.kappa_h(), 1e-10)?;
            let c = classify_squares(&psi, &reference, &lattice, &table, p.kappa, p.field, sch.subdivisions, tau)?;
            json!({ "subdivisions": c.subdivisions, "delta": c.delta, "tau": c.tau, "nice": c.nice, "bad": c.bad, "skipped": c.skipped, "squares": lattice.len() })
        }
        Ok(_) => json!({ "error": "subdivision count is zero at these parameters" }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let out = create_out(s)?;
    let mut files = Vec::new();
    let path = out.join("report.json");
    write_json(
        &path,
        s,
        SCHEMA_REPORT,
        json!({
            "normal_state": diag.max_psi < 1e-3,
            "prediction": prediction,
            "diagnostics": diag,
            "vortices": { "count": v.set.disks.len(), "total_degree": v.set.total_degree(), "truncated": v.set.disks.iter().filter(|d| d.truncated).count() },
            "measure": v.report,
            "classification": classification,
        }),
    )?;
    files.push(path);

    let g = *psi.grid();
    let o = g.origin();
    let [lx, ly] = g.extent();
    let bounds = [o[0], o[1], o[0] + lx, o[1] + ly];
    let modulus: Vec<f64> = psi.values().iter().map(|z| z.norm()).collect();
    let panel = |name: &str, body: String| -> Result<PathBuf, CliError> {
        let f = out.join(name);
        write_svg(&f, s, &body)?;
        Ok(f)
    };
    files.push(panel("psi_abs.svg", heatmap("|psi|", &Raster { nx: g.nx(), ny: g.ny(), values: &modulus, bounds }, 0.0, 1.0))?);
    // Phase in the gauge of the stored potential, with detected disks.
    let phase: Vec<f64> = psi.values().iter().map(|z| z.arg()).collect();
    files.push(panel("phase.svg", phase_map("arg psi and vortex disks", &Raster { nx: g.nx(), ny: g.ny(), values: &phase, bounds }, &v.set.disks))?);
    let bv = b0.field().values();
    let (lo, hi) = bv.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    files.push(panel("b0.svg", heatmap("B0", &Raster { nx: g.nx(), ny: g.ny(), values: bv, bounds }, lo, hi))?);
    let labels: Vec<String> = v.report.regions.iter().map(|r| format!("[{:.2},{:.2}]", r.lo[0], r.hi[0])).collect();
    let mu: Vec<f64> = v.report.regions.iter().map(|r| r.mu).collect();
    let ib: Vec<f64> = v.report.regions.iter().map(|r| r.integral_b0).collect();
    files.push(panel("measure.svg", bar_chart("mu(S) and integral of B0 over S", &labels, [("mu", &mu), ("int B0", &ib)]))?);
    Ok(files)
}
