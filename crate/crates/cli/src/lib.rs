//! Command implementations behind the `navis` binary.

pub mod serve;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use navis_core::encoder::RideEmulator;
use navis_core::kinematics::{export_trajectory, path_length};
use navis_core::mcu::UartStreamDecoder;
use navis_core::session::EventKind;
use navis_core::telemetry::CaptureRecord;
use navis_core::{
    decode_datagram, decode_uart_frame, replay, run_session, verify_replay, LiveSession,
    RideProfile, RunMode, SampleClock, ScooterPose, SessionLog, SimConfig, TransportConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8157";
const DEFAULT_DURATION_US: u64 = 10_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "navis",
    version,
    about = "Treadmill scooter pipeline emulator and simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Key-value config file (`key = value` per line).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the scripted transport, or for `fuzz`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Duration in seconds.
    #[arg(long, global = true)]
    pub duration: Option<f64>,
    /// Run on the simulated clock instead of the wall clock.
    #[arg(long, global = true, conflicts_with = "realtime")]
    pub fast_forward: bool,
    /// Run against the wall clock and serve live state.
    #[arg(long, global = true)]
    pub realtime: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the emulated sensor stream for a ride script.
    Emulate {
        /// Ride script (`t_us rps handlebar_deg` per line).
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a full session.
    Simulate {
        #[arg(long)]
        script: Option<PathBuf>,
        /// Session log destination (fast-forward only); `-` for stdout.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Trajectory export destination (fast-forward only).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Address for the live state service (realtime only).
        #[arg(long, default_value = DEFAULT_LISTEN)]
        listen: SocketAddr,
    },
    /// Rebuild the trajectory from a session log.
    Replay {
        log: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Fail unless the replay equals the recorded trajectory.
        #[arg(long)]
        verify: bool,
    },
    /// Feed random bytes to every decoder.
    Fuzz {
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
    },
    /// Summarize a session log.
    Stats { log: PathBuf },
}

pub fn duration_us(seconds: f64) -> Result<u64> {
    if !seconds.is_finite() || seconds <= 0.0 {
        bail!("duration must be a positive number of seconds, got {seconds}");
    }
    Ok((seconds * 1e6).round() as u64)
}

pub fn load_config(common: &Common) -> Result<SimConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            SimConfig::parse(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    if common.fast_forward {
        config.mode = RunMode::FastForward;
    }
    if common.realtime {
        config.mode = RunMode::Realtime;
    }
    if let Some(seed) = common.seed {
        match &mut config.transport {
            TransportConfig::Scripted { seed: s, .. } => *s = Some(seed),
            _ => eprintln!(
                "note: --seed has no effect on a {} transport",
                config.transport.kind()
            ),
        }
    }
    config.validate()?;
    Ok(config)
}

fn load_script(path: Option<&Path>) -> Result<RideProfile> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading script {}", path.display()))?;
            RideProfile::parse(&text).with_context(|| format!("script {}", path.display()))
        }
        None => Ok(RideProfile::default()),
    }
}

fn load_log(path: &Path) -> Result<SessionLog> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading log {}", path.display()))?;
    SessionLog::parse(&text).with_context(|| format!("log {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Explicit duration, else the script's last setpoint, else the default.
fn resolve_duration(common: &Common, profile: &RideProfile) -> Result<u64> {
    match common.duration {
        Some(s) => duration_us(s),
        None => Ok(profile
            .end_us()
            .filter(|&e| e > 0)
            .unwrap_or(DEFAULT_DURATION_US)),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Emulate { script, out } => emulate(&cli.common, script.as_deref(), out.as_deref()),
        Command::Simulate {
            script,
            log,
            trajectory,
            listen,
        } => {
            let config = load_config(&cli.common)?;
            let profile = load_script(script.as_deref())?;
            match config.mode {
                RunMode::FastForward => {
                    let d = resolve_duration(&cli.common, &profile)?;
                    simulate_fast(config, profile, d, log.as_deref(), trajectory.as_deref())
                }
                RunMode::Realtime => {
                    let d = cli.common.duration.map(duration_us).transpose()?;
                    simulate_realtime(config, profile, d, *listen)
                }
            }
        }
        Command::Replay { log, out, verify } => {
            replay_cmd(&cli.common, log, out.as_deref(), *verify)
        }
        Command::Fuzz { iterations } => {
            let report = fuzz(cli.common.seed.unwrap_or(0), *iterations)?;
            print!("{report}");
            Ok(())
        }
        Command::Stats { log } => {
            print!("{}", stats(&load_log(log)?)?);
            Ok(())
        }
    }
}

fn emulate(common: &Common, script: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let config = load_config(common)?;
    let profile = load_script(script)?;
    let end = resolve_duration(common, &profile)?;
    let mut emulator = RideEmulator::new(profile, config.encoder)?;
    let mut text = String::from("# t_us tick_count angle_deg\n");
    for t in SampleClock::new(config.sample_period_us).times(end) {
        let s = emulator.sample_at(t)?;
        let _ = writeln!(
            text,
            "{} {} {}",
            t,
            s.incremental.tick_count,
            s.angle.degrees()
        );
    }
    write_out(out, &text)
}

pub fn simulate_fast(
    config: SimConfig,
    profile: RideProfile,
    duration_us: u64,
    log: Option<&Path>,
    trajectory: Option<&Path>,
) -> Result<()> {
    let session = run_session(config, profile, duration_us)?;
    if let Some(path) = trajectory {
        let text = session.recorded_trajectory_lines().join("\n") + "\n";
        write_out(Some(path), &text)?;
    }
    match log {
        Some(path) => write_out(Some(path), &session.to_text())?,
        None if trajectory.is_none() => write_out(None, &session.to_text())?,
        None => {}
    }
    eprint!("{}", stats(&session)?);
    Ok(())
}

fn simulate_realtime(
    config: SimConfig,
    profile: RideProfile,
    duration_us: Option<u64>,
    listen: SocketAddr,
) -> Result<()> {
    let live = LiveSession::spawn(config, profile, duration_us)?;
    let handle = live.handle();
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .with_context(|| format!("binding {listen}"))?;
        eprintln!("serving live state on http://{}", listener.local_addr()?);
        let (done_tx, done_rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(serve::serve(listener, handle.clone(), async {
            let _ = done_rx.await;
        }));
        let mut session = tokio::task::spawn_blocking(move || live.join());
        let last = tokio::select! {
            r = &mut session => r?,
            _ = tokio::signal::ctrl_c() => {
                handle.stop();
                session.await?
            }
        }?;
        let _ = done_tx.send(());
        server.await??;
        eprint!("{}", serve::metrics_text(&last));
        Ok(())
    })
}

fn replay_cmd(common: &Common, path: &Path, out: Option<&Path>, verify: bool) -> Result<()> {
    let log = load_log(path)?;
    let requested = match &common.config {
        Some(_) => Some(load_config(common)?.kinematics),
        None => None,
    };
    let trajectory = replay(&log, requested.as_ref())?;
    if verify {
        let check = verify_replay(&log)?;
        if let Some((recorded, replayed)) = check.first_mismatch {
            bail!("replay diverges: recorded {recorded:?}, replayed {replayed:?}");
        }
        eprintln!("replay matches the recording ({} poses)", trajectory.len());
    }
    write_out(out, &export_trajectory(&trajectory))
}

pub fn stats(log: &SessionLog) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "duration_us {}", log.duration_us);
    let _ = writeln!(out, "transport {}", log.config.transport.kind());
    for tag in [
        "ENC", "UART", "CMD", "TX", "RX", "FAILSAFE", "INPUT", "POSE",
    ] {
        let _ = writeln!(out, "events.{} {}", tag.to_lowercase(), log.count(tag));
    }
    let mut rx = navis_core::ReceiverState::new();
    for ev in &log.events {
        if let EventKind::Rx(bytes) = &ev.kind {
            rx.receive(bytes, ev.t_us);
        }
    }
    let c = rx.counters;
    let _ = writeln!(out, "link.received {}", c.received);
    let _ = writeln!(out, "link.applied {}", c.applied);
    let _ = writeln!(out, "link.stale_dropped {}", c.stale_dropped);
    let _ = writeln!(out, "link.corrupt_dropped {}", c.corrupt_dropped);
    let poses = log.recorded_poses();
    if let Some(last) = poses.last() {
        let _ = writeln!(
            out,
            "final_pose {:.6} {:.6} {:.6}",
            last.pose.x,
            last.pose.y,
            last.pose.heading_deg()
        );
        let _ = writeln!(
            out,
            "path_length_m {:.6}",
            path_length(&ScooterPose::default(), &poses)
        );
    }
    let _ = writeln!(out, "replay_matches {}", verify_replay(log)?.matches());
    Ok(out)
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    ok: u64,
    rejected: u64,
}

/// Random and mutated inputs through every decoder. A panic aborts the run;
/// the report lists accept/reject counts per decoder.
pub fn fuzz(seed: u64, iterations: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let valid_frame = navis_core::encode_uart_frame(1.0, 30.0, 7)?;
    let mut uart = Tally::default();
    let mut datagram = Tally::default();
    let mut stream_frames = 0u64;
    let mut capture = Tally::default();
    let mut log = Tally::default();
    let mut stream = UartStreamDecoder::new();
    let count = |t: &mut Tally, ok: bool| {
        if ok {
            t.ok += 1
        } else {
            t.rejected += 1
        }
    };
    for i in 0..iterations {
        let len = rng.random_range(0..48);
        let mut bytes = vec![0u8; len];
        rng.fill(&mut bytes[..]);
        if i % 4 == 0 && len >= valid_frame.len() {
            // a valid frame with one random mutation reaches the CRC stage
            bytes[..valid_frame.len()].copy_from_slice(&valid_frame);
            let pos = rng.random_range(0..valid_frame.len());
            bytes[pos] = rng.random();
        }
        count(&mut uart, decode_uart_frame(&bytes).is_ok());
        count(&mut datagram, decode_datagram(&bytes).is_ok());
        stream_frames += bytes.iter().filter_map(|&b| stream.push(b)).count() as u64;
        let text = String::from_utf8_lossy(&bytes);
        count(&mut capture, text.parse::<CaptureRecord>().is_ok());
        if i % 16 == 0 {
            let fake = format!("navis-session-log 1\nduration_us = 1\n---\n{text}");
            count(&mut log, SessionLog::parse(&fake).is_ok());
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "seed {seed}");
    let _ = writeln!(out, "iterations {iterations}");
    for (name, t) in [
        ("uart_frame", uart),
        ("datagram", datagram),
        ("capture_line", capture),
        ("session_log", log),
    ] {
        let _ = writeln!(out, "{name}.accepted {}", t.ok);
        let _ = writeln!(out, "{name}.rejected {}", t.rejected);
    }
    let _ = writeln!(out, "uart_stream.frames {stream_frames}");
    Ok(out)
}
