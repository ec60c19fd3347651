use std::path::Path;
use std::str::FromStr;

use ionjunction::config::KeyValues;
use ionjunction::field::{
    classify_electrode, find_rf_null, generate_rect_electrode_grid, presets, read_grid, read_layout, write_grid,
    write_layout, GridSpec, Layer, Role,
};
use ionjunction::flight::{
    alpha_sweep, experiment_from_config, measure_secular_frequency, post_transfer_drift, simulate,
    write_trajectory_csv, z_center_offset, FieldModel, FieldSource, Outcome, QuadraticModel, ResolvedRun, Schedule,
    TrajectoryRecord,
};
use ionjunction::junction::{region_map, AxisSpec};
use ionjunction::mathieu::{characteristic_exponent, floquet_stable, MathieuParams, DEFAULT_FLOQUET_STEPS};
use ionjunction::{BoundaryCurves, Vec3};
use rayon::prelude::*;

use crate::output::{self, create_file, write_manifest, write_text, Heatmap, Series, Table};
use crate::{CliError, Status};

pub const NAMES: [&str; 8] = [
    "stability-map",
    "boundary-curves",
    "junction-map",
    "transfer-sim",
    "alpha-sweep",
    "secular",
    "fieldgen",
    "null-find",
];

pub fn dispatch(name: &str, kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    output::create_dir(out)?;
    match name {
        "stability-map" => stability_map(kv, out),
        "boundary-curves" => boundary_curves(kv, out),
        "junction-map" => junction_map(kv, out),
        "transfer-sim" => transfer_sim(kv, out),
        "alpha-sweep" => sweep(kv, out),
        "secular" => secular(kv, out),
        "fieldgen" => fieldgen(kv, out),
        "null-find" => null_find(kv, out),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

/// `min:max:count`, or a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Range {
    min: f64,
    max: f64,
    count: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |w: &str| w.trim().parse::<f64>().map_err(|e| format!("{w:?}: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        let r = match parts.as_slice() {
            [v] => Range { min: num(v)?, max: num(v)?, count: 1 },
            [a, b, n] => Range {
                min: num(a)?,
                max: num(b)?,
                count: n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?,
            },
            _ => return Err(format!("expected min:max:count or a single value, got {s:?}")),
        };
        let ok = r.min.is_finite()
            && r.max.is_finite()
            && match r.count {
                0 => false,
                1 => r.min == r.max,
                _ => r.max > r.min,
            };
        if !ok {
            return Err(format!("empty or inverted range {s:?}"));
        }
        Ok(r)
    }
}

impl Range {
    /// Evenly spaced points including both ends.
    fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + i as f64 * step).collect()
    }

    fn axis(&self) -> Result<AxisSpec, CliError> {
        if self.count == 1 {
            Ok(AxisSpec::fixed(self.min))
        } else {
            AxisSpec::new(self.min, self.max, self.count).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

fn range(kv: &KeyValues, key: &str) -> Result<Range, CliError> {
    let raw = kv.raw(key).ok_or_else(|| CliError::Usage(format!("missing {key}")))?;
    raw.parse().map_err(|e| CliError::Usage(format!("{key}: {e}")))
}

fn vec3(kv: &KeyValues, key: &str) -> Result<Vec3, CliError> {
    match kv.get_list(key)? {
        Some(v) if v.len() == 3 => Ok(Vec3::new(v[0], v[1], v[2])),
        _ => Err(CliError::Usage(format!("{key} needs three comma-separated numbers"))),
    }
}

fn svg_requested(kv: &KeyValues) -> Result<bool, CliError> {
    Ok(kv.get::<bool>("svg")?.unwrap_or(false))
}

fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn exponent_from_trace(trace: f64) -> Option<f64> {
    let c = 0.5 * trace;
    (c.abs() <= 1.0).then(|| c.acos() / std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Hill,
    Floquet,
    Both,
}

fn stability_map(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let us = range(kv, "u")?.points();
    let vr = range(kv, "v")?;
    if vr.min < 0.0 {
        return Err(CliError::Usage("V range must be non-negative".into()));
    }
    let vs = vr.points();
    let method = match kv.raw("method").unwrap_or("both") {
        "hill" => Method::Hill,
        "floquet" => Method::Floquet,
        "both" => Method::Both,
        other => return Err(CliError::Usage(format!("unknown method {other:?}; use hill, floquet or both"))),
    };

    let cells: Vec<(f64, f64)> = us.iter().flat_map(|&u| vs.iter().map(move |&v| (u, v))).collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(u, v)| {
            let p = MathieuParams::new(u, v);
            let hill = (method != Method::Floquet).then(|| characteristic_exponent(p));
            let floquet = (method != Method::Hill).then(|| floquet_stable(p, DEFAULT_FLOQUET_STEPS));
            (hill, floquet)
        })
        .collect();

    let header: &[&str] = match method {
        Method::Hill => &["u", "v", "stable", "w"],
        Method::Floquet => &["u", "v", "stable", "w", "trace"],
        Method::Both => &["u", "v", "hill_stable", "floquet_stable", "agree", "w"],
    };
    let mut table = Table::create(&out.join("stability_map.csv"), "stability-map", 1, header)?;
    let mut stable = 0usize;
    let mut agree = 0usize;
    let mut colors = Vec::with_capacity(cells.len());
    for (&(u, v), (hill, floquet)) in cells.iter().zip(&results) {
        let w_hill = hill.filter(|h| h.stable).map(|h| h.w.re.to_string()).unwrap_or_default();
        let row: Vec<String> = match (hill, floquet) {
            (Some(h), None) => vec![u.to_string(), v.to_string(), flag(h.stable).into(), w_hill],
            (None, Some(f)) => vec![
                u.to_string(),
                v.to_string(),
                flag(f.stable).into(),
                exponent_from_trace(f.monodromy_trace).filter(|_| f.stable).map(|w| w.to_string()).unwrap_or_default(),
                f.monodromy_trace.to_string(),
            ],
            (Some(h), Some(f)) => {
                agree += usize::from(h.stable == f.stable);
                vec![
                    u.to_string(),
                    v.to_string(),
                    flag(h.stable).into(),
                    flag(f.stable).into(),
                    flag(h.stable == f.stable).into(),
                    w_hill,
                ]
            }
            (None, None) => unreachable!("at least one method runs"),
        };
        table.row(&row)?;
        let primary = hill.map(|h| h.stable).or(floquet.map(|f| f.stable)).unwrap_or(false);
        stable += usize::from(primary);
        let disagree = matches!((hill, floquet), (Some(h), Some(f)) if h.stable != f.stable);
        colors.push(match (disagree, primary) {
            (true, _) => "#d62728",
            (false, true) => "#2ca02c",
            (false, false) => "#f0f0f0",
        });
    }
    table.finish()?;
    println!("{} points, {stable} stable", cells.len());
    if method == Method::Both {
        println!("hill/floquet agreement: {agree}/{} ({:.3}%)", cells.len(), 100.0 * agree as f64 / cells.len() as f64);
    }
    if svg_requested(kv)? {
        let svg = output::heatmap(&Heatmap {
            title: "Mathieu stability (green stable, red disagreement)",
            xlabel: "U",
            ylabel: "V",
            xs: &us,
            ys: &vs,
            colors: &colors,
        });
        write_text(&out.join("stability_map.svg"), &svg)?;
    }
    write_manifest(out, "stability-map", kv)?;
    Ok(Status::Ok)
}

fn boundary_curves(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let v_max: f64 = kv.require("v_max")?;
    let knots: usize = kv.require("knots")?;
    let curves = BoundaryCurves::tabulate(v_max, knots)?;
    let mut table = Table::create(&out.join("boundary_curves.csv"), "boundary-curves", 1, &["v", "a0", "b1", "a1", "a0_slope"])?;
    for &v in curves.knots() {
        table.row([v, curves.a0(v)?, curves.b1(v)?, curves.a1(v)?, curves.a0_slope(v)?].map(|x| x.to_string()))?;
    }
    table.finish()?;
    println!("{knots} knots on V in [0, {v_max}]");
    if svg_requested(kv)? {
        let series = |label, color, values: &[f64]| Series {
            label,
            color,
            points: values.iter().zip(curves.knots()).map(|(&u, &v)| (u, v)).collect(),
        };
        use ionjunction::mathieu::Curve;
        let svg = output::line_plot(
            "Boundary curves",
            "U",
            "V",
            &[
                series("a0", "#1f77b4", curves.values(Curve::A0)),
                series("b1", "#ff7f0e", curves.values(Curve::B1)),
                series("a1", "#2ca02c", curves.values(Curve::A1)),
            ],
        );
        write_text(&out.join("boundary_curves.svg"), &svg)?;
    }
    write_manifest(out, "boundary-curves", kv)?;
    Ok(Status::Ok)
}

fn junction_map(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let (mu, beta, alpha) = (range(kv, "mu")?.axis()?, range(kv, "beta")?.axis()?, range(kv, "alpha")?.axis()?);
    let samples: usize = kv.require("samples")?;
    if samples < 64 {
        return Err(CliError::Usage("samples must be at least 64".into()));
    }
    let map = region_map(mu, beta, alpha, samples)?;
    let mut table = Table::create(
        &out.join("junction_map.csv"),
        "junction-map",
        1,
        &["mu", "beta", "alpha", "simple_stable", "transfer_stable", "banned", "mechanism"],
    )?;
    for c in &map.cells {
        table.row([
            c.params.mu.to_string(),
            c.params.beta.to_string(),
            c.params.alpha.to_string(),
            flag(c.simple_stable).into(),
            flag(c.transfer_stable).into(),
            flag(c.banned()).into(),
            c.mechanism.map(|m| m.name().to_string()).unwrap_or_default(),
        ])?;
    }
    table.finish()?;
    let count = |f: &dyn Fn(&ionjunction::junction::RegionCell) -> bool| map.cells.iter().filter(|c| f(c)).count();
    println!(
        "{} cells: {} simple-stable, {} transfer-stable, {} banned ({} with alpha < 0.3, {} with alpha > 1)",
        map.cells.len(),
        count(&|c| c.simple_stable),
        count(&|c| c.transfer_stable),
        map.banned_count(),
        count(&|c| c.banned() && c.params.alpha < 0.3),
        count(&|c| c.banned() && c.params.alpha > 1.0),
    );
    if svg_requested(kv)? {
        let (betas, alphas) = (map.beta.centers(), map.alpha.centers());
        for (im, m) in map.mu.centers().iter().enumerate() {
            let mut colors = Vec::with_capacity(betas.len() * alphas.len());
            for ib in 0..betas.len() {
                for ia in 0..alphas.len() {
                    let c = map.cell(im, ib, ia);
                    colors.push(match (c.transfer_stable, c.banned()) {
                        (true, _) => "#2ca02c",
                        (false, true) => "#d62728",
                        _ => "#f0f0f0",
                    });
                }
            }
            let title = format!("mu = {m:.4} (green transfer-stable, red banned)");
            let svg = output::heatmap(&Heatmap {
                title: &title,
                xlabel: "beta",
                ylabel: "alpha",
                xs: &betas,
                ys: &alphas,
                colors: &colors,
            });
            write_text(&out.join(format!("junction_mu{im:02}.svg")), &svg)?;
        }
    }
    write_manifest(out, "junction-map", kv)?;
    Ok(Status::Ok)
}

fn field_model(run: &ResolvedRun) -> Result<Box<dyn FieldModel>, CliError> {
    let exp = &run.experiment;
    Ok(match &run.config.source {
        FieldSource::Quadratic => Box::new(QuadraticModel::new(exp.geometry, exp.params)),
        FieldSource::Grid(trap) => Box::new(trap.field(&exp.params)?),
    })
}

fn describe(outcome: &Outcome, run: &ResolvedRun) -> String {
    match *outcome {
        Outcome::Confined => "confined".into(),
        Outcome::Lost { axis, time } => {
            format!("lost on {axis} at tau = {time:.3} ({:.4e} s)", run.scales.time_to_physical(time))
        }
    }
}

fn status(rec: &TrajectoryRecord) -> Status {
    if rec.outcome.confined() {
        Status::Ok
    } else {
        Status::Lost
    }
}

fn transfer_sim(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let run = experiment_from_config(kv)?;
    let rec = simulate(&run.experiment, &run.config)?;
    write_trajectory_csv(&rec, create_file(&out.join("trajectory.csv"))?)?;
    let p = run.experiment.params;
    println!("mu = {}, beta = {}, alpha = {}, gamma = {}", p.mu, p.beta, p.alpha, p.gamma());
    println!("outcome: {}", describe(&rec.outcome, &run));
    let model = field_model(&run)?;
    println!("mean |z - z_null|: {:.4} um", z_center_offset(&rec, model.as_ref(), 0.0));
    if matches!(run.experiment.schedule, Schedule::Transfer(_)) && rec.outcome.confined() {
        match post_transfer_drift(&rec, 1) {
            Some(d) => println!(
                "FLAG y drift after transfer: {d:.4e} um/tau ({:.4} m/s), monotone; y is not confined",
                run.scales.velocity_to_physical(d)
            ),
            None => println!("y after transfer: bounded motion (no monotone drift)"),
        }
    }
    if svg_requested(kv)? {
        let axis = |label, color, i: usize| Series {
            label,
            color,
            points: rec.samples.iter().map(|s| (s.time, s.position[i])).collect(),
        };
        let svg = output::line_plot(
            "Ion position",
            "tau",
            "position (um)",
            &[axis("x", "#1f77b4", 0), axis("y", "#ff7f0e", 1), axis("z", "#2ca02c", 2)],
        );
        write_text(&out.join("trajectory.svg"), &svg)?;
    }
    write_manifest(out, "transfer-sim", &run.settings)?;
    Ok(status(&rec))
}

fn sweep(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let run = experiment_from_config(kv)?;
    let alphas = range(kv, "alphas")?.points();
    let result = alpha_sweep(&run.experiment, &run.config, &alphas)?;
    let mut table = Table::create(&out.join("alpha_sweep.csv"), "alpha-sweep", 1, &["alpha", "outcome", "loss_axis", "loss_time"])?;
    for (a, o) in result.alphas.iter().zip(&result.outcomes) {
        let row = match o {
            Outcome::Confined => [a.to_string(), "confined".into(), String::new(), String::new()],
            Outcome::Lost { axis, time } => [a.to_string(), "lost".into(), axis.to_string(), time.to_string()],
        };
        table.row(&row)?;
    }
    table.finish()?;
    let show = |v: Option<f64>| v.map_or("none".to_string(), |a| a.to_string());
    println!("last confined alpha: {}", show(result.last_confined()));
    println!("first lost alpha: {}", show(result.first_lost()));
    write_manifest(out, "alpha-sweep", &run.settings)?;
    Ok(Status::Ok)
}

fn secular(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let run = experiment_from_config(kv)?;
    let rec = simulate(&run.experiment, &run.config)?;
    println!("outcome: {}", describe(&rec.outcome, &run));
    let mut table = Table::create(&out.join("secular.csv"), "secular", 1, &["axis", "omega_per_tau", "frequency_hz", "note"])?;
    for (i, name) in ["x", "y", "z"].iter().enumerate() {
        match measure_secular_frequency(&rec, i) {
            Ok(w) => {
                let hz = run.scales.frequency_to_hz(w);
                println!("{name}: {:.4} MHz ({w:.6} rad/tau)", hz / 1e6);
                table.row([name.to_string(), w.to_string(), hz.to_string(), String::new()])?;
            }
            Err(e) => {
                println!("{name}: {e}");
                table.row([name.to_string(), String::new(), String::new(), e.to_string()])?;
            }
        }
    }
    table.finish()?;
    write_manifest(out, "secular", &run.settings)?;
    Ok(status(&rec))
}

fn fieldgen(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let name = kv.raw("layout").unwrap_or("two-layer");
    let mut layout = match presets::by_name(name) {
        Ok(l) => l,
        Err(_) => {
            let file = std::fs::File::open(name).map_err(|e| CliError::Io(name.into(), e))?;
            read_layout(std::io::BufReader::new(file))?
        }
    };
    if let Some(order) = kv.get::<usize>("image_order")? {
        layout = layout.with_image_order(order);
    }
    let dims = vec3(kv, "dims")?;
    if dims.iter().any(|d| d.fract() != 0.0 || *d < 1.0) {
        return Err(CliError::Usage("dims must be positive integers".into()));
    }
    let spec = GridSpec::centered(vec3(kv, "center")?, vec3(kv, "extent")?, [dims.x as usize, dims.y as usize, dims.z as usize])
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (grid, report) = generate_rect_electrode_grid(&layout, &spec)?;
    write_grid(&grid, create_file(&out.join("field.grid"))?)?;
    write_layout(&layout, create_file(&out.join("layout.txt"))?)?;
    println!(
        "{} electrodes on {}x{}x{} points; image order {} (change from half order {:.2e})",
        grid.electrode_count(),
        spec.dims[0],
        spec.dims[1],
        spec.dims[2],
        report.image_order,
        report.image_convergence
    );
    write_manifest(out, "fieldgen", kv)?;
    Ok(Status::Ok)
}

fn null_find(kv: &KeyValues, out: &Path) -> Result<Status, CliError> {
    let path: String = kv.require("grid")?;
    let half: f64 = kv.require("plane_half_separation")?;
    let file = std::fs::File::open(&path).map_err(|e| CliError::Io(path.clone().into(), e))?;
    let grid = read_grid(std::io::BufReader::new(file))?;
    let mut layers = vec![Layer::Bottom];
    if grid.names().iter().any(|n| classify_electrode(n) == (Layer::Top, Role::Rf)) {
        layers.push(Layer::Top);
    }
    let mut table = Table::create(
        &out.join("null.csv"),
        "null-find",
        1,
        &["layer", "x", "y", "z", "height", "gradient_norm", "contrast", "kappa_z", "degenerate"],
    )?;
    for layer in layers {
        let n = find_rf_null(&grid, layer, half)?;
        let label = match layer {
            Layer::Bottom => "bottom",
            Layer::Top => "top",
        };
        let p = n.position;
        table.row([
            label.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            n.height.to_string(),
            n.gradient_norm.to_string(),
            n.contrast.to_string(),
            n.kappa_z.to_string(),
            flag(n.degenerate).into(),
        ])?;
        if n.degenerate {
            println!("{label}: FLAG degenerate, no isolated RF minimum (best point z = {:.3} um)", p.z);
        } else {
            println!(
                "{label}: null at ({:.3}, {:.3}, {:.3}) um, {:.3} um from the electrode plane",
                p.x, p.y, p.z, n.height
            );
        }
    }
    table.finish()?;
    write_manifest(out, "null-find", kv)?;
    Ok(Status::Ok)
}
