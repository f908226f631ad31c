use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use genfield::arch::ArchSpec;
use genfield::csvio::read_rows_from_path;
use genfield::fields::fields_table;
use genfield::footprint::{
    numeric_footprint, suggested_sim_base, verify_arch, Dims, MatchClass, Simulation, Upsampling,
};
use genfield::losses::{
    attr_loss, eval_metrics, identity_loss, landmark_loss, pose_loss, reconstruction_loss, total_loss, Embedding,
    EulerAngles, ImageTensor, LandmarkSet, LossWeights,
};
use genfield::regularizer::{estimate_stats, log_likelihood, log_likelihood_grad, regularized_objective, ChannelStats};
use genfield::sparsity::{mean_histogram, reuse_rates, topk_set, HIGH_FUNCTIONAL_THRESHOLD};
use genfield::style::{plan_by_gf, plan_by_layers, plan_config, style_layout, ControlSignal, StyleVector};

use crate::report::{Report, Section};
use crate::{ArchSource, Cli, Command, DimsArg, LossArgs, Outcome, PlanSelection};

/// Largest tolerated mismatch between analytic and finite-difference gradients.
pub const FD_TOLERANCE: f64 = 1e-6;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut report;
    let outcome = match &cli.command {
        Command::Fields { source } => {
            report = Report::new("fields");
            fields(&mut report, source)?
        }
        Command::Verify {
            source,
            semantics,
            sim_base,
            layers,
            dims,
            numeric,
        } => {
            report = Report::new("verify");
            let semantics: Upsampling = semantics.parse()?;
            verify(
                &mut report,
                source,
                semantics,
                *sim_base,
                layers.as_deref(),
                *dims,
                *numeric,
                cli.seed,
            )?
        }
        Command::Plan { source, selection } => {
            report = Report::new("plan");
            plan(&mut report, source, selection)?
        }
        Command::Analyze {
            deltas,
            top_k,
            bins,
            membership,
        } => {
            report = Report::new("analyze");
            analyze(&mut report, deltas, *top_k, *bins, membership.as_deref())?
        }
        Command::Stats { styles, epsilon } => {
            report = Report::new("stats");
            stats(&mut report, styles, *epsilon)?
        }
        Command::Loglik {
            stats,
            samples,
            grad,
            fd_check,
            fd_step,
            weight,
            base_loss,
            epsilon,
        } => {
            report = Report::new("loglik");
            let objective = weight.zip(*base_loss);
            loglik(
                &mut report,
                stats,
                samples,
                *grad,
                fd_check.then_some(*fd_step),
                objective,
                *epsilon,
            )?
        }
        Command::Losses(args) => {
            report = Report::new("losses");
            losses(&mut report, args)?
        }
    };
    report.param("format", cli.format.as_str()).param("seed", cli.seed);
    let text = report.render(cli.format);
    match &cli.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(outcome)
}

fn load_arch(source: &ArchSource, report: &mut Report) -> Result<ArchSpec> {
    match (&source.preset, &source.arch) {
        (Some(name), None) => {
            report.param("preset", name);
            let res = name
                .strip_prefix("stylegan2-")
                .and_then(|r| r.parse::<u32>().ok())
                .ok_or_else(|| anyhow!("unknown preset `{name}` (expected stylegan2-<resolution>)"))?;
            Ok(ArchSpec::stylegan2(res)?)
        }
        (None, Some(path)) => {
            report.param("arch", path.display());
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ArchSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))
        }
        _ => bail!("give exactly one of --preset or --arch"),
    }
}

/// Parses `FIRST..LAST`.
fn layer_range(text: &str) -> Result<(&str, &str)> {
    text.split_once("..")
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| anyhow!("layer range must look like FIRST..LAST, got `{text}`"))
}

fn fields(report: &mut Report, source: &ArchSource) -> Result<Outcome> {
    let arch = load_arch(source, report)?;
    let table = fields_table(&arch)?;
    let notes = table.notes();
    let mut columns = vec![
        "layer_id",
        "style_label",
        "input_resolution",
        "generative_field",
        "channels_in",
    ];
    if !notes.is_empty() {
        columns.push("footnote");
    }
    let mut s = Section::new("fields", &columns);
    let mut marker = 0;
    for r in &table.records {
        let mut row = vec![
            json!(r.layer_id),
            json!(r.style_label.clone().unwrap_or_default()),
            json!(r.input_resolution),
            json!(r.generative_field),
            json!(r.channels_in),
        ];
        if !notes.is_empty() {
            row.push(match r.discrepancy() {
                Some(_) => {
                    marker += 1;
                    json!(format!("[{marker}]"))
                }
                None => json!(""),
            });
        }
        s.push(row);
    }
    report.sections.push(s);
    let channels: u64 = table.records.iter().map(|r| u64::from(r.channels_in)).sum();
    report.note(format!("style dimensions (sum of channels_in): {channels}"));
    for (i, n) in notes.into_iter().enumerate() {
        report.note(format!("[{}] {n}", i + 1));
    }
    Ok(Outcome::Pass)
}

#[allow(clippy::too_many_arguments)]
fn verify(
    report: &mut Report,
    source: &ArchSource,
    semantics: Upsampling,
    sim_base: Option<u32>,
    layers: Option<&str>,
    dims: DimsArg,
    numeric: bool,
    seed: u64,
) -> Result<Outcome> {
    let arch = load_arch(source, report)?;
    let sim_base = match sim_base {
        Some(b) => b,
        None => suggested_sim_base(&arch)?,
    };
    let dims = match dims {
        DimsArg::OneD => Dims::One,
        DimsArg::TwoD => Dims::Two,
    };
    let range = match layers {
        Some(text) => {
            let (a, b) = layer_range(text)?;
            let (i, j) = (arch.index_of(a)?, arch.index_of(b)?);
            if i > j {
                bail!("layer range `{text}` is reversed");
            }
            i..=j
        }
        None => 0..=arch.len() - 1,
    };
    report
        .param("semantics", semantics.as_str())
        .param("sim_base", sim_base)
        .param("dims", if dims == Dims::One { "1D" } else { "2D" })
        .param(
            "layers",
            format!(
                "{}..{}",
                arch.layers()[*range.start()].id,
                arch.layers()[*range.end()].id
            ),
        )
        .param("numeric", numeric);

    let sim = Simulation::new(semantics, dims, sim_base);
    let results: Vec<_> = verify_arch(&arch, &sim)?
        .into_iter()
        .filter(|r| range.contains(&r.layer_index))
        .collect();

    let mut columns = vec![
        "layer_id",
        "analytic",
        "footprint",
        "semantics",
        "clipped",
        "match_class",
    ];
    if numeric {
        columns.push("numeric_footprint");
    }
    let mut s = Section::new("verify", &columns);
    let mut over = Vec::new();
    let mut disagree = Vec::new();
    for r in &results {
        let id = &arch.layers()[r.layer_index].id;
        let class = r.match_class();
        if class == MatchClass::OverBug {
            over.push(id.clone());
        }
        let mut row = vec![
            json!(id),
            json!(r.analytic),
            json!(r.footprint),
            json!(r.semantics.as_str()),
            json!(r.clipped),
            json!(class.as_str()),
        ];
        if numeric {
            let n = numeric_footprint(&arch, r.layer_index, &sim, seed)?;
            if n.footprint != r.footprint || n.clipped != r.clipped {
                disagree.push(id.clone());
            }
            row.push(json!(n.footprint));
        }
        s.push(row);
    }
    report.sections.push(s);
    if results.iter().any(|r| r.clipped) {
        report.note("clipped rows touched the simulation border; their footprint is a lower bound (raise --sim-base)");
    }
    if !over.is_empty() {
        report.note(format!("footprint exceeds the analytic field for: {}", over.join(", ")));
        return Ok(Outcome::CheckFailed(format!("{} OVER-BUG row(s)", over.len())));
    }
    if !disagree.is_empty() {
        report.note(format!(
            "numeric and boolean footprints disagree for: {}",
            disagree.join(", ")
        ));
        return Ok(Outcome::CheckFailed(format!(
            "{} executor disagreement(s)",
            disagree.len()
        )));
    }
    Ok(Outcome::Pass)
}

fn plan(report: &mut Report, source: &ArchSource, sel: &PlanSelection) -> Result<Outcome> {
    let arch = load_arch(source, report)?;
    let table = fields_table(&arch)?;
    let layout = style_layout(&arch);
    let plan = match (sel.config, sel.min_gf.zip(sel.max_gf), sel.layers.as_deref()) {
        (Some(c), None, None) => {
            report.param("config", c);
            plan_config(&table, &layout, c)?
        }
        (None, Some((lo, hi)), None) => {
            report.param("min_gf", lo).param("max_gf", hi);
            plan_by_gf(&table, &layout, lo, hi)?
        }
        (None, None, Some(text)) => {
            report.param("layers", text);
            let (a, b) = layer_range(text)?;
            plan_by_layers(&table, &layout, a, b)?
        }
        _ => bail!("give exactly one of --config, --min-gf/--max-gf or --layers"),
    };

    let mut summary = Section::new(
        "plan",
        &[
            "first_layer",
            "last_layer",
            "gf_min",
            "gf_max",
            "enabled_dims",
            "total_dims",
            "mask_rle",
        ],
    );
    summary.push(vec![
        json!(plan.enabled_layers.first()),
        json!(plan.enabled_layers.last()),
        json!(plan.gf_range.0),
        json!(plan.gf_range.1),
        json!(plan.enabled_dims()),
        json!(layout.total_dims()),
        json!(plan.mask_rle()),
    ]);
    let mut per_layer = Section::new(
        "layers",
        &["layer_id", "generative_field", "dim_start", "dim_end", "enabled"],
    );
    for (rec, range) in table.records.iter().zip(layout.ranges()) {
        per_layer.push(vec![
            json!(rec.layer_id),
            json!(rec.generative_field),
            json!(range.range().start),
            json!(range.range().end),
            json!(plan.enabled_layers.contains(&rec.layer_id)),
        ]);
    }
    report.sections.push(summary);
    report.sections.push(per_layer);
    Ok(Outcome::Pass)
}

fn analyze(report: &mut Report, path: &Path, top_k: usize, bins: usize, membership: Option<&Path>) -> Result<Outcome> {
    report
        .param("deltas", path.display())
        .param("top_k", top_k)
        .param("bins", bins);
    if let Some(m) = membership {
        report.param("membership", m.display());
    }
    let rows = read_rows_from_path(path)?;
    if rows.is_empty() {
        bail!("{}: no control signals", path.display());
    }
    let dims = rows[0].len();
    let tests: Vec<ControlSignal> = rows.into_iter().map(ControlSignal).collect();
    let sparsity = mean_histogram(&tests, bins)?;
    let sets = tests
        .iter()
        .map(|t| topk_set(&t.0, top_k))
        .collect::<genfield::Result<Vec<_>>>()?;
    let reuse = reuse_rates(&sets)?;

    let mut summary = Section::new(
        "summary",
        &["tests", "dims", "high_functional_mean", "top_k", "union_size"],
    );
    summary.push(vec![
        json!(sparsity.tests),
        json!(dims),
        json!(sparsity.high_functional_count),
        json!(top_k.min(dims)),
        json!(reuse.union_dims.len()),
    ]);
    let mut hist = Section::new("histogram", &["bin", "lower", "upper", "mean_count", "std_count"]);
    for (b, (m, s)) in sparsity.bins_mean.iter().zip(&sparsity.bins_std).enumerate() {
        hist.push(vec![
            json!(b),
            json!(b as f64 / bins as f64),
            json!((b + 1) as f64 / bins as f64),
            json!(m),
            json!(s),
        ]);
    }
    let mut rates = Section::new("reuse", &["dim", "rate"]);
    for (d, r) in &reuse.rates {
        rates.push(vec![json!(d), json!(r)]);
    }
    report.sections.extend([summary, hist, rates]);
    report.note(format!(
        "high-functional dimensions have normalized magnitude > {HIGH_FUNCTIONAL_THRESHOLD}"
    ));
    if !sparsity.zero_tests.is_empty() {
        let ids: Vec<String> = sparsity.zero_tests.iter().map(usize::to_string).collect();
        report.note(format!(
            "all-zero control signal in test(s) {}; normalized to zeros, their top-k picks the lowest indices",
            ids.join(", ")
        ));
    }
    if let Some(m) = membership {
        let file = File::create(m).with_context(|| format!("creating {}", m.display()))?;
        reuse.write_membership_csv(file)?;
    }
    Ok(Outcome::Pass)
}

fn read_styles(path: &Path) -> Result<Vec<StyleVector>> {
    Ok(read_rows_from_path(path)?.into_iter().map(StyleVector).collect())
}

fn stats(report: &mut Report, path: &Path, epsilon: f64) -> Result<Outcome> {
    report.param("styles", path.display()).param("epsilon", epsilon);
    let styles = read_styles(path)?;
    let st = estimate_stats(&styles, epsilon)?;
    let mut s = Section::new("stats", &["dim", "mu", "sigma"]);
    for (d, (m, sd)) in st.mu.iter().zip(&st.sigma).enumerate() {
        s.push(vec![json!(d), json!(m), json!(sd)]);
    }
    report.sections.push(s);
    report.param("samples", st.sample_count);
    Ok(Outcome::Pass)
}

fn max_fd_error(style: &StyleVector, st: &ChannelStats, analytic: &[f64], h: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut probe = style.clone();
    for (i, a) in analytic.iter().enumerate() {
        let x = probe.0[i];
        probe.0[i] = x + h;
        let plus = log_likelihood(&probe, st)?;
        probe.0[i] = x - h;
        let minus = log_likelihood(&probe, st)?;
        probe.0[i] = x;
        let n = (plus - minus) / (2.0 * h);
        worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1.0));
    }
    Ok(worst)
}

fn loglik(
    report: &mut Report,
    stats_path: &Path,
    samples: &Path,
    grad: bool,
    fd_step: Option<f64>,
    objective: Option<(f64, f64)>,
    epsilon: f64,
) -> Result<Outcome> {
    report
        .param("stats", stats_path.display())
        .param("samples", samples.display())
        .param("grad", grad)
        .param("fd_check", fd_step.is_some());
    if let Some(h) = fd_step {
        report.param("fd_step", h).param("fd_tolerance", FD_TOLERANCE);
    }
    if let Some((w, base)) = objective {
        report.param("weight", w).param("base_loss", base);
    }
    let file = File::open(stats_path).with_context(|| format!("opening {}", stats_path.display()))?;
    let st = ChannelStats::read_csv(file, epsilon).with_context(|| format!("reading {}", stats_path.display()))?;
    let styles = read_styles(samples)?;
    if styles.is_empty() {
        bail!("{}: no samples", samples.display());
    }

    let mut columns = vec!["sample", "loglik"];
    if objective.is_some() {
        columns.push("objective");
    }
    if fd_step.is_some() {
        columns.push("fd_max_error");
    }
    let mut values = Section::new("loglik", &columns);
    let mut gradients = Section::new("gradient", &["sample", "dim", "grad"]);
    let mut failures = Vec::new();
    for (i, s) in styles.iter().enumerate() {
        let mut row: Vec<Value> = vec![json!(i), json!(log_likelihood(s, &st)?)];
        if let Some((w, base)) = objective {
            row.push(json!(regularized_objective(base, s, &st, w)?));
        }
        if grad || fd_step.is_some() {
            let g = log_likelihood_grad(s, &st)?;
            if let Some(h) = fd_step {
                let err = max_fd_error(s, &st, &g, h)?;
                if err > FD_TOLERANCE {
                    failures.push(i);
                }
                row.push(json!(err));
            }
            if grad {
                for (d, v) in g.iter().enumerate() {
                    gradients.push(vec![json!(i), json!(d), json!(v)]);
                }
            }
        }
        values.push(row);
    }
    report.sections.push(values);
    if grad {
        report.sections.push(gradients);
    }
    if !failures.is_empty() {
        return Ok(Outcome::CheckFailed(format!(
            "gradient disagrees with finite differences beyond {FD_TOLERANCE} for {} sample(s)",
            failures.len()
        )));
    }
    Ok(Outcome::Pass)
}

fn pair<'a>(
    a: &'a Option<std::path::PathBuf>,
    b: &'a Option<std::path::PathBuf>,
    what: &str,
) -> Result<Option<(&'a Path, &'a Path)>> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => bail!("{what} needs both the attribute/identity and the output file"),
    }
}

fn first_face(path: &Path) -> Result<LandmarkSet> {
    let mut faces = LandmarkSet::read(path)?;
    Ok(faces.swap_remove(0))
}

fn losses(report: &mut Report, args: &LossArgs) -> Result<Outcome> {
    if args.lambdas.len() != 3 {
        bail!(
            "--lambdas takes exactly 3 comma-separated values, got {}",
            args.lambdas.len()
        );
    }
    if args.components.as_ref().is_some_and(|c| c.len() != 3) {
        bail!("--components takes exactly 3 comma-separated values");
    }
    let weights = LossWeights {
        identity: args.lambdas[0],
        attribute: args.lambdas[1],
        reconstruction: args.lambdas[2],
    };
    report
        .param("alpha", args.alpha)
        .param(
            "lambdas",
            args.lambdas.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        )
        .param("same_inputs", args.same_inputs)
        .param("landmarks", if args.all_landmarks { "all" } else { "inner" })
        .param("angle_unit", if args.degrees { "degrees" } else { "radians" });
    let angle = |v: f64| if args.degrees { v.to_degrees() } else { v };

    let mut comp = Section::new("components", &["component", "value"]);
    let (id, attr, rec) = if let Some(c) = &args.components {
        report.param("components", c.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        (c[0], c[1], c[2])
    } else {
        let embeddings = pair(&args.id_embedding, &args.out_embedding, "identity loss")?;
        let landmarks = pair(&args.attr_landmarks, &args.out_landmarks, "landmark loss")?;
        let poses = pair(&args.attr_pose, &args.out_pose, "pose loss")?;
        let images = pair(&args.attr_image, &args.out_image, "reconstruction loss")?;
        if embeddings.is_none() && landmarks.is_none() && poses.is_none() && images.is_none() {
            bail!("no loss inputs given (use file pairs or --components)");
        }
        for (key, p) in [
            ("embeddings", embeddings),
            ("landmarks", landmarks),
            ("poses", poses),
            ("images", images),
        ] {
            if let Some((a, b)) = p {
                report.param(key, format!("{},{}", a.display(), b.display()));
            }
        }

        let emb = embeddings
            .map(|(a, b)| Ok::<_, anyhow::Error>((Embedding::read(a)?, Embedding::read(b)?)))
            .transpose()?;
        let lms = landmarks
            .map(|(a, b)| Ok::<_, anyhow::Error>((first_face(a)?, first_face(b)?)))
            .transpose()?;
        let pos = poses
            .map(|(a, b)| Ok::<_, anyhow::Error>((EulerAngles::read(a)?, EulerAngles::read(b)?)))
            .transpose()?;

        let id = match &emb {
            Some((a, b)) => identity_loss(a, b)?,
            None => {
                report.note("identity inputs not given; identity loss taken as 0");
                0.0
            }
        };
        let lm = lms
            .as_ref()
            .map_or(0.0, |(a, b)| landmark_loss(a, b, !args.all_landmarks));
        let pose = pos.as_ref().map_or(0.0, |(a, b)| pose_loss(a, b));
        if lms.is_none() || pos.is_none() {
            report.note("attribute inputs incomplete; missing landmark or pose terms taken as 0");
        }
        let rec = match images {
            Some((a, b)) => {
                let ia = ImageTensor::read_pnm(a)?;
                let ib = ImageTensor::read_pnm(b)?;
                if !args.same_inputs {
                    report.note("reconstruction term gated off: inputs were not flagged as the same image");
                }
                reconstruction_loss(&ia, &ib, args.alpha, args.same_inputs)?
            }
            None => {
                report.note("image inputs not given; reconstruction loss taken as 0");
                0.0
            }
        };
        comp.push(vec![json!("landmark"), json!(lm)]);
        comp.push(vec![json!("pose"), json!(angle(pose))]);

        if let Some(res) = args.resolution {
            let (Some((ea, eb)), Some((la, lb)), Some((pa, pb))) = (&emb, &lms, &pos) else {
                bail!("--resolution needs embedding, landmark and pose inputs");
            };
            let m = eval_metrics(ea, eb, la, lb, pa, pb, res)?;
            let mut eval = Section::new("eval", &["metric", "value"]);
            eval.push(vec![json!("identity_cosine"), json!(m.identity)]);
            eval.push(vec![json!("expression"), json!(m.expression)]);
            let pose_msq = if args.degrees {
                m.pose.to_degrees().to_degrees()
            } else {
                m.pose
            };
            eval.push(vec![json!("pose_mean_sq"), json!(pose_msq)]);
            report.sections.push(eval);
        }
        (id, attr_loss(lm, pose), rec)
    };
    let total = total_loss(id, attr, rec, &weights);
    let mut rows = vec![
        vec![json!("identity"), json!(id)],
        vec![json!("attribute"), json!(attr)],
        vec![json!("reconstruction"), json!(rec)],
    ];
    rows.extend(std::mem::take(&mut comp.rows));
    rows.push(vec![json!("total"), json!(total)]);
    comp.rows = rows;
    report.sections.insert(0, comp);
    Ok(Outcome::Pass)
}
