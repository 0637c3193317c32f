use navis_core::config::RunMode;
use navis_core::kinematics::{export_trajectory, SteeringMode};
use navis_core::session::{EventKind, ReplayCheck};
use navis_core::{
    replay, run_session, verify_replay, RideProfile, SessionError, SessionLog, SimConfig,
    TransportConfig,
};

fn constant_ride(rps: f64, deg: f64, end_us: u64) -> RideProfile {
    RideProfile::parse(&format!("0 {rps} {deg}\n{end_us} {rps} {deg}\n")).unwrap()
}

fn scripted(loss: f64, reorder: f64, dup: f64, seed: u64) -> SimConfig {
    SimConfig {
        transport: TransportConfig::Scripted {
            loss_pct: loss,
            reorder_pct: reorder,
            duplicate_pct: dup,
            seed: Some(seed),
        },
        ..SimConfig::default()
    }
}

#[test]
fn ten_second_runs_are_byte_identical() {
    let a = run_session(
        SimConfig::default(),
        constant_ride(1.0, 10.0, 10_000_000),
        10_000_000,
    )
    .unwrap()
    .to_text();
    let b = run_session(
        SimConfig::default(),
        constant_ride(1.0, 10.0, 10_000_000),
        10_000_000,
    )
    .unwrap()
    .to_text();
    assert_eq!(a, b);
}

#[test]
fn one_second_has_six_commands() {
    let log = run_session(
        SimConfig::default(),
        constant_ride(1.0, 0.0, 1_000_000),
        1_000_000,
    )
    .unwrap();
    assert_eq!(log.count("CMD"), (1_000_000u64 / 157_000) as usize);
    assert_eq!(log.count("CMD"), 6);
    assert_eq!(log.count("TX"), 6);
    assert_eq!(log.count("RX"), 6);
    assert_eq!(log.count("UART"), 6);
    assert_eq!(log.count("ENC"), 101);
}

#[test]
fn total_loss_triggers_failsafe_stop() {
    let log = run_session(
        scripted(100.0, 0.0, 0.0, 3),
        constant_ride(2.0, 20.0, 3_000_000),
        3_000_000,
    )
    .unwrap();
    assert_eq!(log.count("RX"), 0);
    let failsafes: Vec<u64> = log
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Failsafe { .. }))
        .map(|e| e.t_us)
        .collect();
    assert_eq!(failsafes, vec![471_000]);
    // the MCU kept commanding full throttle but nothing moved the scooter
    assert!(log
        .events
        .iter()
        .any(|e| matches!(e.kind, EventKind::Command { throttle, .. } if throttle == 1.0)));
    for p in log.recorded_poses() {
        assert_eq!((p.pose.x, p.pose.y), (0.0, 0.0));
    }
}

#[test]
fn lossy_link_replays_exactly() {
    let log = run_session(
        scripted(60.0, 0.0, 0.0, 11),
        constant_ride(2.0, 0.0, 5_000_000),
        5_000_000,
    )
    .unwrap();
    let check = verify_replay(&log).unwrap();
    assert!(check.matches(), "{:?}", check.first_mismatch);
    let applied = log.count("RX");
    assert!(applied > 0 && applied < log.count("TX"));
}

#[test]
fn replay_reproduces_trajectory() {
    for cfg in [
        SimConfig::default(),
        scripted(20.0, 20.0, 20.0, 5),
        SimConfig {
            kinematics: navis_core::KinematicParams {
                steering_mode: SteeringMode::Bicycle,
                ..Default::default()
            },
            ..SimConfig::default()
        },
    ] {
        let ride =
            RideProfile::parse("0 0 0\n2000000 2 40\n5000000 -1 -60\n8000000 0.5 0\n").unwrap();
        let log = run_session(cfg, ride, 8_000_000).unwrap();
        let text = log.to_text();
        let parsed = SessionLog::parse(&text).unwrap();
        assert_eq!(parsed.to_text(), text);
        let traj = replay(&parsed, None).unwrap();
        let recorded: String = parsed
            .recorded_trajectory_lines()
            .into_iter()
            .map(|l| l + "\n")
            .collect();
        assert_eq!(export_trajectory(&traj), recorded);
        assert_eq!(
            verify_replay(&parsed).unwrap(),
            ReplayCheck {
                poses: traj.len(),
                first_mismatch: None
            }
        );
    }
}

#[test]
fn shuffled_log_is_corrupt() {
    let log = run_session(
        SimConfig::default(),
        constant_ride(1.0, 5.0, 1_000_000),
        1_000_000,
    )
    .unwrap();
    let text = log.to_text();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.iter().position(|l| *l == "---").unwrap();
    lines[header + 1..].reverse();
    let shuffled = lines.join("\n");
    assert!(matches!(
        SessionLog::parse(&shuffled),
        Err(SessionError::CorruptLog { .. })
    ));
}

#[test]
fn replay_refuses_other_kinematics() {
    let log = run_session(
        SimConfig::default(),
        constant_ride(1.0, 5.0, 1_000_000),
        1_000_000,
    )
    .unwrap();
    let other = navis_core::KinematicParams {
        v_max: 3.0,
        ..Default::default()
    };
    assert!(matches!(
        replay(&log, Some(&other)),
        Err(SessionError::RefusedConfigMismatch { .. })
    ));
    assert!(replay(&log, Some(&log.config.kinematics)).is_ok());
}

#[test]
fn cadence_conservation_under_impairment() {
    for seed in 0..20 {
        let cfg = scripted(15.0, 15.0, 15.0, seed);
        let mut session =
            navis_core::Session::new(cfg, constant_ride(1.0, 0.0, 10_000_000)).unwrap();
        let n = 10_000_000u64 / 157_000;
        for _ in 0..n {
            session.control_tick().unwrap();
        }
        let stats = session.transport_stats();
        let link = session.link();
        assert_eq!(stats.sent, n);
        assert_eq!(session.counters().datagrams_sent, n);
        assert_eq!(link.received, stats.delivered);
        assert!(link.is_conserved());
        assert!(stats.delivered <= stats.sent - stats.lost + stats.duplicated);
    }
}

#[test]
fn udp_session_moves_scooter() {
    let cfg = SimConfig {
        transport: TransportConfig::Udp {
            address: "127.0.0.1".into(),
            port: 0,
        },
        ..SimConfig::default()
    };
    let log = run_session(cfg, constant_ride(1.0, 0.0, 2_000_000), 2_000_000).unwrap();
    assert_eq!(log.count("TX"), 12);
    assert!(log.count("RX") > 0);
    assert!(verify_replay(&log).unwrap().matches());
    assert!(log.recorded_poses().last().unwrap().pose.x > 0.0);
}

#[test]
fn realtime_mode_paces_on_wall_clock() {
    let cfg = SimConfig {
        mode: RunMode::Realtime,
        ..SimConfig::default()
    };
    let started = std::time::Instant::now();
    let log = run_session(cfg, constant_ride(1.0, 0.0, 500_000), 500_000).unwrap();
    assert!(started.elapsed() >= std::time::Duration::from_millis(471));
    assert_eq!(log.count("CMD"), 3);
}

#[test]
fn zero_duration_rejected() {
    assert!(matches!(
        run_session(SimConfig::default(), RideProfile::default(), 0),
        Err(SessionError::InvalidDuration)
    ));
}

#[test]
fn module_errors_are_attributed() {
    let cfg = SimConfig::parse("kinematics.sim_dt_us = 10000").unwrap();
    let err = run_session(cfg, RideProfile::default(), 1_000_000)
        .err()
        .unwrap();
    assert!(err.to_string().starts_with("config:"), "{err}");
    // 40000 rev/s overflows the Q16.16 frame field
    let coarse = SimConfig::parse("encoder.pulses_per_revolution = 1").unwrap();
    let err = run_session(coarse, constant_ride(40_000.0, 0.0, 1_000_000), 1_000_000)
        .err()
        .unwrap();
    assert!(err.to_string().starts_with("pipeline:"), "{err}");
}
