use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use insole_core::dataset::{design_matrix, read_dataset, write_dataset};
use insole_core::domain::{
    standard_ladder, ChannelVector, LabeledSample, PhaseSchedule, PipelineConfig,
};
use insole_core::eval::{
    box_plot_svg, build_split, cross_validate, mae, report_csv, run_protocol, EvalError, PlotGroup,
    ProtocolConfig, Split, SplitSpec,
};
use insole_core::ingest::{preprocess_session, read_session, write_session};
use insole_core::pressmap::{
    fit_color_scale, render_features, write_png, ColorScale, PressmapError, RenderConfig,
    SensorLayout,
};
use insole_core::regress::{fit_model, save_model, ModelKind, Validation};
use insole_core::synth::{corpus_specs, generate_session, CorpusParams};
use serde_json::json;

use crate::config::ConfigArgs;
use crate::CliError;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes a line to standard output; a closed pipe is an output failure.
fn say(line: &str) -> Result<(), CliError> {
    writeln!(std::io::stdout(), "{line}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn load_samples(path: &Path) -> Result<Vec<LabeledSample>, CliError> {
    read_dataset(path).map_err(|e| CliError::Input(e.to_string()))
}

fn split_samples(samples: &[LabeledSample], cfg: &PipelineConfig) -> Result<Split, CliError> {
    build_split(samples, &SplitSpec::from_config(cfg)).map_err(eval_error)
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::MissingSession { .. } | EvalError::InvalidSpec(_) | EvalError::EmptyInput => {
            CliError::Input(e.to_string())
        }
        other => CliError::Compute(other.to_string()),
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serialisable value")
}

pub fn preprocess(
    manifests: &[PathBuf],
    out: &Path,
    skip_filter: bool,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let (cfg, _) = args.resolve()?;
    let mut samples = Vec::new();
    for path in manifests {
        let (manifest, rec) = read_session(path).map_err(|e| CliError::Input(e.to_string()))?;
        let prefiltered = skip_filter || manifest.prefiltered;
        let s = preprocess_session(&rec, &cfg, prefiltered)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        samples.extend(s);
    }
    create_dir(out)?;
    let dataset = out.join("dataset.csv");
    write_dataset(&dataset, &samples).map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!("wrote {} samples to {}", samples.len(), dataset.display());
    Ok(())
}

pub fn train(
    dataset: &Path,
    kind: ModelKind,
    out: &Path,
    cv: Option<usize>,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let (cfg, params) = args.resolve()?;
    let samples = load_samples(dataset)?;
    let split = split_samples(&samples, &cfg)?;
    let (x, y) = design_matrix(&samples, &split.train);
    let (xv, yv) = design_matrix(&samples, &split.val);
    let val = (!yv.is_empty()).then(|| Validation {
        x: xv.view(),
        y: &yv,
    });
    let trained = fit_model(kind, x.view(), &y, val, &params)
        .map_err(|e| CliError::Compute(format!("training {kind} failed: {e}")))?;
    if kind == ModelKind::Enet && !trained.report.converged {
        return Err(CliError::Compute(format!(
            "training enet did not converge after {} sweeps (recent objective values: {:?})",
            trained.report.epochs, trained.report.loss_tail
        )));
    }
    let val_mae = if yv.is_empty() {
        None
    } else {
        Some(mae(&trained.model.predict_batch(xv.view()), &yv).map_err(eval_error)?)
    };
    let cv_mae = match cv {
        Some(k) => Some(
            cross_validate(kind, &samples, &split.train, &params, k, cfg.split_seed)
                .map_err(eval_error)?,
        ),
        None => None,
    };
    save_model(&trained, out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let summary = json!({
        "model": kind,
        "n_train": split.train.len(),
        "n_val": split.val.len(),
        "val_mae": val_mae,
        "cv_mae": cv_mae,
        "report": trained.report,
    });
    say(&to_json(&summary))
}

pub fn evaluate(
    dataset: &Path,
    models: Vec<ModelKind>,
    report_path: &Path,
    plots: Option<&Path>,
    csv: Option<&Path>,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let (cfg, params) = args.resolve()?;
    let samples = load_samples(dataset)?;
    let report =
        run_protocol(&samples, &ProtocolConfig::new(&cfg, models, params)).map_err(eval_error)?;
    write_file(report_path, to_json(&report))?;
    if let Some(path) = csv {
        write_file(path, report_csv(&report))?;
    }
    if let Some(dir) = plots {
        create_dir(dir)?;
        let mut by_subject: Vec<PlotGroup> = Vec::new();
        for s in &report.per_subject {
            let entry = (s.model.to_string(), s.mae.clone());
            match by_subject.iter_mut().find(|(g, _)| *g == s.subject) {
                Some((_, v)) => v.push(entry),
                None => by_subject.push((s.subject.clone(), vec![entry])),
            }
        }
        let mut by_load: Vec<PlotGroup> = Vec::new();
        for l in &report.per_unseen_load {
            let group = format!("{} kg", l.load_kg);
            let entry = (l.model.to_string(), l.mae.clone());
            match by_load.iter_mut().find(|(g, _)| *g == group) {
                Some((_, v)) => v.push(entry),
                None => by_load.push((group, vec![entry])),
            }
        }
        write_file(
            &dir.join("mae_by_subject.svg"),
            box_plot_svg("MAE by subject (kg)", &by_subject),
        )?;
        write_file(
            &dir.join("mae_unseen_loads.svg"),
            box_plot_svg("MAE on unseen loads (kg)", &by_load),
        )?;
    }
    for o in &report.overall {
        say(&format!(
            "{:<5} MAE {:.3} kg (unseen loads {:.3} kg)",
            o.model, o.mae, o.mae_unseen
        ))?;
    }
    Ok(())
}

fn pressmap_error(e: PressmapError) -> CliError {
    match e {
        PressmapError::Io(_) | PressmapError::Image(_) => CliError::Io(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

pub fn render_maps(
    dataset: &Path,
    layout: Option<&Path>,
    scale_from: &str,
    out: &Path,
    limit: Option<usize>,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let (cfg, _) = args.resolve()?;
    let samples = load_samples(dataset)?;
    let layout = match layout {
        Some(p) => {
            SensorLayout::load(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
        }
        None => SensorLayout::default(),
    };
    let scale = if scale_from == "train" {
        let split = split_samples(&samples, &cfg)?;
        let train: Vec<ChannelVector> = split.train.iter().map(|&i| samples[i].features).collect();
        fit_color_scale(&train).map_err(pressmap_error)?
    } else {
        let text = fs::read_to_string(scale_from)
            .map_err(|e| CliError::Input(format!("{scale_from}: {e}")))?;
        let s: ColorScale = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{scale_from}: {e}")))?;
        ColorScale::new(s.v_min, s.v_max).map_err(pressmap_error)?
    };
    create_dir(out)?;
    write_file(&out.join("scale.json"), to_json(&scale))?;

    let todo = &samples[..limit.unwrap_or(samples.len()).min(samples.len())];
    let render_cfg = RenderConfig::default();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = todo.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = todo
            .chunks(chunk)
            .map(|part| {
                let layout = &layout;
                s.spawn(move || -> Result<(), CliError> {
                    for sample in part {
                        let img = render_features(&sample.features, layout, &scale, &render_cfg);
                        let name = format!(
                            "{}_{}_{}.png",
                            sample.subject_id, sample.session_index, sample.frame_timestamp_ms
                        );
                        write_png(&out.join(name), &img).map_err(pressmap_error)?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("render worker panicked"))
    })?;
    eprintln!("rendered {} maps into {}", todo.len(), out.display());
    Ok(())
}

pub fn synth(out: &Path, params: CorpusParams, jitter_ms: i64) -> Result<(), CliError> {
    create_dir(out)?;
    let schedule = PhaseSchedule::default();
    let ladder = standard_ladder();
    for mut spec in corpus_specs(&params) {
        spec.timestamp_jitter_ms = jitter_ms;
        let (rec, _) = generate_session(&spec, &schedule, &ladder)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let stem = format!("{}_{}", rec.subject_id, rec.session_index);
        let path = write_session(&rec, out, &stem).map_err(|e| CliError::Io(e.to_string()))?;
        say(&path.display().to_string())?;
    }
    Ok(())
}
