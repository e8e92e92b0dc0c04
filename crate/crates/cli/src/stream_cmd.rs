//! Session replay: a producer thread paces frames into a bounded queue and
//! the consumer runs the estimator, writing one JSON line per window.

use std::io::{self, Write};
use std::net::TcpStream;
use std::path::Path;
use std::sync::mpsc::sync_channel;
use std::thread;
use std::time::{Duration, Instant};

use insole_core::domain::Frame;
use insole_core::ingest::read_session;
use insole_core::regress::load_model;
use insole_core::stream::StreamEstimator;

use crate::config::ConfigArgs;
use crate::{CliError, Rate};

const QUEUE_DEPTH: usize = 64;

fn open_sink(tcp: Option<&str>) -> Result<Box<dyn Write>, CliError> {
    match tcp {
        Some(addr) => {
            let stream = TcpStream::connect(addr)
                .map_err(|e| CliError::Io(format!("connect {addr}: {e}")))?;
            stream.set_nodelay(true).ok();
            Ok(Box::new(stream))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

pub fn run(
    manifest: &Path,
    model_path: &Path,
    rate: Rate,
    tcp: Option<&str>,
    skip_filter: bool,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let (cfg, _) = args.resolve()?;
    let (m, rec) = read_session(manifest).map_err(|e| CliError::Input(e.to_string()))?;
    let trained = load_model(model_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", model_path.display())))?;
    let mut estimator = StreamEstimator::new(
        &trained.model,
        &cfg,
        &rec.schedule,
        rec.load_ladder.len(),
        skip_filter || m.prefiltered,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let mut sink = open_sink(tcp)?;
    let frames: Vec<Frame> = rec.frames;
    let lost = |e: io::Error| CliError::Io(format!("output closed: {e}"));

    let (tx, rx) = sync_channel::<Frame>(QUEUE_DEPTH);
    thread::scope(|s| {
        let frames = &frames;
        s.spawn(move || {
            let start = Instant::now();
            let t0 = frames.first().map_or(0, |f| f.timestamp_ms);
            for f in frames {
                if let Some(speedup) = rate.speedup() {
                    let due =
                        Duration::from_secs_f64((f.timestamp_ms - t0) as f64 / 1000.0 / speedup);
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        thread::sleep(wait);
                    }
                }
                // the consumer hung up after an error; stop producing
                if tx.send(f.clone()).is_err() {
                    break;
                }
            }
        });
        for frame in rx {
            let est = estimator
                .push(&frame)
                .map_err(|e| CliError::Compute(e.to_string()))?;
            if let Some(est) = est {
                let line = serde_json::to_string(&est).expect("estimate serialises");
                writeln!(sink, "{line}").map_err(lost)?;
                sink.flush().map_err(lost)?;
            }
        }
        Ok(())
    })
}
