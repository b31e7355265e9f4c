use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use specfuse::forward::clip_boundary;
use specfuse::imageio::{
    self, read_color_image, read_image, render_image, render_kernel, save_rgb, Colormap,
    RasterFormat, ValueScale,
};
use specfuse::metrics::{centroid_offset, compare, write_sweep_csv, SimilarityReport, SweepRow};
use specfuse::regularizers::DtvParams;
use specfuse::solvers::{Algorithm, FusionProblem, SolverOutput, SolverParams, SolverTrace};
use specfuse::synth::{
    desk_scene, make_problem, read_bundle, write_bundle, DataScale, KernelKind, SynthSpec,
};
use specfuse::{Image, Shape2};

use crate::manifest::write_manifest;
use crate::{EvaluateArgs, FuseArgs, InputArgs, KernelChoice, SimulateArgs, SolverArgs, SweepArgs};

pub const EVALUATE_CSV_HEADER: &str = "channel,ssim,mse,psnr,final_objective";
const DEFAULT_KERNEL_SIZE: usize = 41;
const DEFAULT_SAMPLING: usize = 4;
const DESK_DATA_SIZE: usize = 100;

/// Worker count: `SPECFUSE_THREADS` if set, else the core count, capped by
/// the number of jobs.
fn thread_count(jobs: usize) -> Result<usize> {
    let requested = match std::env::var("SPECFUSE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("SPECFUSE_THREADS must be a positive integer, got {v:?}"))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(requested.min(jobs).max(1))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(jobs)?)
        .build()?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------------------
// simulate

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let r = args.kernel_size;
    ensure!(r % 2 == 1, "--kernel-size must be odd, got {r}");
    let kernel_shape = Shape2::square(r);
    let kernel = match args.kernel {
        KernelChoice::Disk => match args.radius {
            Some(radius) => KernelKind::Disk { radius },
            None => KernelKind::default_disk(kernel_shape),
        },
        KernelChoice::Gaussian => {
            let offset = (args.offset[0], args.offset[1]);
            match args.sigma {
                Some(sigma) => KernelKind::OffCenterGaussian { sigma, offset },
                None => KernelKind::default_gaussian(kernel_shape, offset),
            }
        }
        KernelChoice::Dirac => KernelKind::Dirac,
    };
    let margin = r / 2;
    let s = args.sampling;
    ensure!(s >= 1, "--sampling must be at least 1");

    let desk = args.source == "desk";
    let source = if desk {
        None
    } else {
        Some(read_color_image(Path::new(&args.source))?)
    };
    let data_shape = match (&args.data_size, &source) {
        (Some(d), _) => Shape2::new(d[0], d[1]),
        (None, None) => Shape2::square(DESK_DATA_SIZE),
        (None, Some(rgb)) => {
            let fit = |n: usize| n.saturating_sub(2 * margin) / s;
            Shape2::new(fit(rgb.shape().rows), fit(rgb.shape().cols))
        }
    };
    let spec = SynthSpec {
        kernel,
        kernel_shape,
        data_shape,
        sampling: s,
        noise_variance: args.noise_variance,
        side_info_shift: (args.shift[0], args.shift[1]),
        seed: args.seed,
    };
    let geometry = spec.geometry()?;
    let rgb = match source {
        Some(rgb) => rgb,
        None => desk_scene(geometry.image, args.scene_seed),
    };
    let problem = make_problem(&rgb, &spec)?;
    fs::create_dir_all(&args.out)?;
    write_bundle(&args.out, &problem, &spec)?;
    write_manifest(&args.out, "simulate", serde_json::to_value(args)?)?;
    println!(
        "wrote bundle to {} (data {}, image {}, kernel {})",
        args.out.display(),
        geometry.data,
        geometry.image,
        geometry.kernel
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// shared solve path

struct Inputs {
    /// `(channel index, data)` in channel order.
    channels: Vec<(usize, Image)>,
    side_info: Image,
    kernel: Shape2,
    sampling: usize,
}

fn load_inputs(input: &InputArgs) -> Result<Inputs> {
    let (channels, side_info, kernel, sampling) = match &input.bundle {
        Some(dir) => {
            let (problem, spec) = read_bundle(dir)
                .with_context(|| format!("reading bundle {}", dir.display()))?;
            (vec![problem.data], problem.side_info, spec.kernel_shape, spec.sampling)
        }
        None => {
            ensure!(!input.data.is_empty(), "give --bundle or at least one --data file");
            let side = input
                .side_info
                .as_ref()
                .ok_or_else(|| anyhow!("--data needs --side-info"))?;
            let data = input
                .data
                .iter()
                .map(|p| read_image(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let side = read_image(side).with_context(|| format!("reading {}", side.display()))?;
            (
                data,
                side,
                Shape2::square(DEFAULT_KERNEL_SIZE),
                DEFAULT_SAMPLING,
            )
        }
    };
    Ok(Inputs {
        channels: channels.into_iter().enumerate().collect(),
        side_info,
        kernel: input.kernel_size.map_or(kernel, Shape2::square),
        sampling: input.sampling.unwrap_or(sampling),
    })
}

fn solver_params(solver: &SolverArgs, lambda_u: f64, lambda_k: f64) -> SolverParams {
    SolverParams {
        lambda_u,
        lambda_k,
        alpha: if solver.algorithm == Algorithm::Ipalm {
            solver.alpha
        } else {
            0.0
        },
        theta: solver.theta,
        eta: solver.eta,
        max_iterations: solver.iterations,
        ..SolverParams::default()
    }
}

struct Solved {
    problem: FusionProblem,
    output: SolverOutput,
    scale: DataScale,
}

/// Scales the data to `[0, 1]` and runs the selected solver.
fn solve(
    data: &Image,
    side_info: &Image,
    kernel: Shape2,
    sampling: usize,
    gamma: f64,
    epsilon: f64,
    params: &SolverParams,
    algorithm: Algorithm,
) -> Result<Solved> {
    let scale = DataScale {
        min: data.min(),
        max: data.max(),
    };
    let dtv = DtvParams::new(gamma, epsilon)?;
    let problem = FusionProblem::new(scale.forward(data), side_info, kernel, sampling, &dtv)?;
    let init = problem.default_init()?;
    let output = algorithm.run(&problem, params, &init)?;
    Ok(Solved {
        problem,
        output,
        scale,
    })
}

/// Writes the meaningful part of `u` (data units and physical units), the
/// kernel, their renders and the trace into `dir`.
fn write_solution(dir: &Path, solved: &Solved, provenance: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let u = clip_boundary(solved.output.u(), solved.problem.geometry())?;
    let k = solved.output.k();
    let with_units = |units: &str| {
        let mut p = provenance.clone();
        p["units"] = json!(units);
        p["dataScale"] = json!(solved.scale);
        p
    };
    imageio::write_image_with_provenance(
        &dir.join("u.txt"),
        &u,
        RasterFormat::MatrixText,
        ValueScale::fit(&u),
        with_units("data"),
    )?;
    let physical = solved.scale.inverse(&u);
    imageio::write_image_with_provenance(
        &dir.join("u_physical.txt"),
        &physical,
        RasterFormat::MatrixText,
        ValueScale::fit(&physical),
        with_units("physical"),
    )?;
    imageio::write_image_with_provenance(
        &dir.join("k.txt"),
        k.image(),
        RasterFormat::MatrixText,
        ValueScale::fit(k.image()),
        with_units("kernel"),
    )?;
    save_rgb(&dir.join("u.png"), &render_image(&u, Colormap::Parula)?)?;
    save_rgb(&dir.join("k.png"), &render_kernel(k)?)?;
    write_text(&dir.join("trace.csv"), &solved.output.trace.to_csv())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// fuse

pub fn fuse(args: &FuseArgs) -> Result<()> {
    let inputs = load_inputs(&args.input)?;
    let selected: Vec<&(usize, Image)> = match &args.channels {
        None => inputs.channels.iter().collect(),
        Some(list) => list
            .iter()
            .map(|&c| {
                inputs
                    .channels
                    .get(c)
                    .ok_or_else(|| anyhow!("channel {c} out of range ({} given)", inputs.channels.len()))
            })
            .collect::<Result<_>>()?,
    };
    ensure!(!selected.is_empty(), "no channels selected");
    let params = solver_params(&args.solver, args.lambda_u, args.lambda_k);
    params.validate()?;
    fs::create_dir_all(&args.out)?;

    let results: Vec<Result<(usize, f64, (f64, f64))>> = pool(selected.len())?.install(|| {
        selected
            .par_iter()
            .map(|(channel, data)| {
                let solved = solve(
                    data,
                    &inputs.side_info,
                    inputs.kernel,
                    inputs.sampling,
                    args.gamma,
                    args.solver.epsilon,
                    &params,
                    args.solver.algorithm,
                )
                .with_context(|| format!("channel {channel}"))?;
                let provenance = json!({
                    "channel": channel,
                    "algorithm": args.solver.algorithm.name(),
                    "lambdaU": args.lambda_u,
                    "lambdaK": args.lambda_k,
                    "gamma": args.gamma,
                    "iterations": args.solver.iterations,
                });
                write_solution(&args.out.join(format!("channel_{channel}")), &solved, provenance)?;
                let objective = solved.output.trace.final_objective().unwrap_or(f64::NAN);
                Ok((*channel, objective, centroid_offset(solved.output.k())?))
            })
            .collect()
    });

    let mut summary = String::from("channel,final_objective,centroid_row_offset,centroid_col_offset\n");
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok((c, psi, (dr, dc))) => {
                summary.push_str(&format!("{c},{psi},{dr},{dc}\n"));
                println!("channel {c}: final objective {psi:.6}, kernel centroid offset ({dr:.3}, {dc:.3})");
            }
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    write_text(&args.out.join("summary.csv"), &summary)?;
    write_manifest(&args.out, "fuse", serde_json::to_value(args)?)?;
    if !failures.is_empty() {
        bail!("{} channel(s) failed: {}", failures.len(), failures.join("; "));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

/// Centered crop of `truth` to `shape`; the margins must be equal.
fn crop_to(truth: &Image, shape: Shape2) -> Result<Image> {
    let (tr, tc) = (truth.rows(), truth.cols());
    let fits = tr >= shape.rows
        && tc >= shape.cols
        && (tr - shape.rows) % 2 == 0
        && (tc - shape.cols) % 2 == 0;
    if !fits {
        return Err(specfuse::Error::ShapeMismatch {
            expected: shape,
            found: truth.shape(),
        }
        .into());
    }
    let (r0, c0) = ((tr - shape.rows) / 2, (tc - shape.cols) / 2);
    Ok(Image::from_fn(shape, |r, c| truth.get(r0 + r, c0 + c)))
}

fn channel_dirs(run: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(run).with_context(|| format!("reading {}", run.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(c) = name.strip_prefix("channel_").and_then(|c| c.parse::<usize>().ok()) {
            dirs.push((c, entry.path()));
        }
    }
    dirs.sort();
    ensure!(!dirs.is_empty(), "no channel_* directories in {}", run.display());
    Ok(dirs)
}

fn read_trace(path: &Path) -> Result<SolverTrace> {
    SolverTrace::from_csv(&fs::read_to_string(path)?)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = match (&args.truth, &args.bundle) {
        (Some(path), _) => read_image(path)?,
        (None, Some(dir)) => read_bundle(dir)?.0.truth_in_data_units(),
        (None, None) => bail!("give --truth or --bundle"),
    };
    let jobs: Vec<(usize, PathBuf, Option<PathBuf>)> = match &args.run {
        Some(run) => channel_dirs(run)?
            .into_iter()
            .map(|(c, dir)| {
                let trace = dir.join("trace.csv");
                (c, dir.join("u.txt"), trace.exists().then_some(trace))
            })
            .collect(),
        None => {
            ensure!(!args.reconstruction.is_empty(), "give --run or --reconstruction");
            ensure!(
                args.trace.is_empty() || args.trace.len() == args.reconstruction.len(),
                "--trace must be given once per --reconstruction"
            );
            args.reconstruction
                .iter()
                .enumerate()
                .map(|(c, p)| (c, p.clone(), args.trace.get(c).cloned()))
                .collect()
        }
    };

    let mut csv = format!("{EVALUATE_CSV_HEADER}\n");
    for (channel, path, trace) in jobs {
        let u = read_image(&path).with_context(|| format!("reading {}", path.display()))?;
        let reference = crop_to(&truth, u.shape())?;
        let SimilarityReport {
            ssim,
            mean_squared_error,
            psnr,
        } = compare(&u, &reference, args.range)?;
        let objective = match trace {
            Some(t) => read_trace(&t)?.final_objective(),
            None => None,
        };
        csv.push_str(&format!(
            "{channel},{ssim},{mean_squared_error},{psnr},{}\n",
            csv_opt(objective)
        ));
    }
    fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("evaluation.csv"), &csv)?;
    write_manifest(&args.out, "evaluate", serde_json::to_value(args)?)?;
    print!("{csv}");
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

pub fn sweep(args: &SweepArgs) -> Result<()> {
    ensure!(
        !args.lambda_u.is_empty() && !args.lambda_k.is_empty() && !args.gamma.is_empty(),
        "every sweep grid needs at least one value"
    );
    let (problem, spec) = read_bundle(&args.bundle)
        .with_context(|| format!("reading bundle {}", args.bundle.display()))?;
    let kernel = args.kernel_size.map_or(spec.kernel_shape, Shape2::square);
    let sampling = args.sampling.unwrap_or(spec.sampling);
    let truth = problem.truth_in_data_units();

    let mut cells = Vec::new();
    for &lu in &args.lambda_u {
        for &lk in &args.lambda_k {
            for &g in &args.gamma {
                cells.push((lu, lk, g));
            }
        }
    }
    fs::create_dir_all(&args.out)?;

    let rows: Vec<(SweepRow, Option<String>)> = pool(cells.len())?.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(lambda_u, lambda_k, gamma))| {
                let run = || -> Result<(SimilarityReport, f64)> {
                    let params = solver_params(&args.solver, lambda_u, lambda_k);
                    params.validate()?;
                    let solved = solve(
                        &problem.data,
                        &problem.side_info,
                        kernel,
                        sampling,
                        gamma,
                        args.solver.epsilon,
                        &params,
                        args.solver.algorithm,
                    )?;
                    let provenance = json!({
                        "cell": i,
                        "algorithm": args.solver.algorithm.name(),
                        "lambdaU": lambda_u,
                        "lambdaK": lambda_k,
                        "gamma": gamma,
                    });
                    write_solution(&args.out.join(format!("cells/cell_{i:03}")), &solved, provenance)?;
                    let u = clip_boundary(solved.output.u(), solved.problem.geometry())?;
                    let report = compare(&u, &crop_to(&truth, u.shape())?, 1.0)?;
                    let psi = solved
                        .output
                        .trace
                        .final_objective()
                        .ok_or_else(|| anyhow!("empty trace"))?;
                    Ok((report, psi))
                };
                let mut row = SweepRow {
                    lambda_u,
                    lambda_k,
                    gamma,
                    report: None,
                    final_objective: None,
                };
                match run() {
                    Ok((report, psi)) => {
                        row.report = Some(report);
                        row.final_objective = Some(psi);
                        (row, None)
                    }
                    Err(e) => (row, Some(format!("cell {i}: {e:#}"))),
                }
            })
            .collect()
    });

    let mut buf = Vec::new();
    let sweep_rows: Vec<SweepRow> = rows.iter().map(|(r, _)| r.clone()).collect();
    write_sweep_csv(&sweep_rows, &mut buf)?;
    let csv = String::from_utf8(buf)?;
    write_text(&args.out.join("sweep.csv"), &csv)?;
    write_manifest(&args.out, "sweep", serde_json::to_value(args)?)?;
    print!("{csv}");
    let failures: Vec<&String> = rows.iter().filter_map(|(_, e)| e.as_ref()).collect();
    for f in &failures {
        eprintln!("{f}");
    }
    if !failures.is_empty() {
        bail!("{} of {} sweep cells failed", failures.len(), rows.len());
    }
    Ok(())
}
