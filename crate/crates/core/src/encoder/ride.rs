//! Scripted rides and the sensor emulator that plays them back.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    AbsoluteAngle, EncoderConfig, EncoderError, IncrementalSample, QuadratureDecoder,
    QuadraturePhase, Result, SensorSample,
};

const US_PER_S: f64 = 1_000_000.0;

/// Rider targets at an instant: treadmill roller speed and handlebar angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub t_us: u64,
    pub rps: f64,
    pub handlebar_deg: f64,
}

/// Time-ordered setpoints, interpolated linearly in between and held constant
/// before the first and after the last.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RideProfile {
    setpoints: Vec<Setpoint>,
    // roller revolutions accumulated from t = 0 up to each setpoint
    cumulative_revs: Vec<f64>,
}

impl RideProfile {
    pub fn new(setpoints: Vec<Setpoint>) -> Result<Self> {
        let mut profile = RideProfile::default();
        for sp in setpoints {
            profile.push(sp)?;
        }
        Ok(profile)
    }

    /// Parse a ride script: one `t_us rps_target handlebar_deg` triple per
    /// line, whitespace separated, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut profile = RideProfile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(EncoderError::Script {
                    line: line_no,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let bad = |what: &str, v: &str| EncoderError::Script {
                line: line_no,
                message: format!("invalid {what} {v:?}"),
            };
            let t_us: u64 = fields[0].parse().map_err(|_| bad("t_us", fields[0]))?;
            let rps: f64 = fields[1]
                .parse()
                .map_err(|_| bad("rps_target", fields[1]))?;
            let handlebar_deg: f64 = fields[2]
                .parse()
                .map_err(|_| bad("handlebar_deg", fields[2]))?;
            profile
                .push(Setpoint {
                    t_us,
                    rps,
                    handlebar_deg,
                })
                .map_err(|e| match e {
                    EncoderError::UnorderedProfile { .. } => e,
                    other => EncoderError::Script {
                        line: line_no,
                        message: other.to_string(),
                    },
                })?;
        }
        Ok(profile)
    }

    pub fn to_script(&self) -> String {
        let mut out = String::from("# t_us rps_target handlebar_deg\n");
        for sp in &self.setpoints {
            let _ = writeln!(out, "{} {} {}", sp.t_us, sp.rps, sp.handlebar_deg);
        }
        out
    }

    /// Append a setpoint strictly after the current last one.
    pub fn push(&mut self, sp: Setpoint) -> Result<()> {
        if !(sp.rps.is_finite() && sp.handlebar_deg.is_finite()) {
            return Err(EncoderError::InvalidConfig(format!(
                "non-finite setpoint at t={}us",
                sp.t_us
            )));
        }
        let revs = match self.setpoints.last() {
            Some(last) if sp.t_us <= last.t_us => {
                return Err(EncoderError::UnorderedProfile {
                    index: self.setpoints.len(),
                    t_us: sp.t_us,
                })
            }
            Some(last) => {
                let cum = *self.cumulative_revs.last().unwrap();
                cum + 0.5 * (last.rps + sp.rps) * ((sp.t_us - last.t_us) as f64 / US_PER_S)
            }
            None => sp.rps * (sp.t_us as f64 / US_PER_S),
        };
        self.setpoints.push(sp);
        self.cumulative_revs.push(revs);
        Ok(())
    }

    /// Drop every setpoint later than `t_us`.
    pub fn truncate_after(&mut self, t_us: u64) {
        let keep = self.setpoints.partition_point(|sp| sp.t_us <= t_us);
        self.setpoints.truncate(keep);
        self.cumulative_revs.truncate(keep);
    }

    pub fn setpoints(&self) -> &[Setpoint] {
        &self.setpoints
    }

    pub fn is_empty(&self) -> bool {
        self.setpoints.is_empty()
    }

    pub fn end_us(&self) -> Option<u64> {
        self.setpoints.last().map(|sp| sp.t_us)
    }

    /// Interpolated `(rps, handlebar_deg)` targets at `t_us`.
    pub fn targets_at(&self, t_us: u64) -> (f64, f64) {
        let (Some(first), Some(last)) = (self.setpoints.first(), self.setpoints.last()) else {
            return (0.0, 0.0);
        };
        if t_us <= first.t_us {
            return (first.rps, first.handlebar_deg);
        }
        if t_us >= last.t_us {
            return (last.rps, last.handlebar_deg);
        }
        let i = self.segment_index(t_us);
        let (a, b) = (&self.setpoints[i], &self.setpoints[i + 1]);
        let frac = (t_us - a.t_us) as f64 / (b.t_us - a.t_us) as f64;
        (
            a.rps + (b.rps - a.rps) * frac,
            a.handlebar_deg + (b.handlebar_deg - a.handlebar_deg) * frac,
        )
    }

    /// Exact integral of the interpolated roller speed from 0 to `t_us`.
    pub fn revolutions_at(&self, t_us: u64) -> f64 {
        let (Some(first), Some(last)) = (self.setpoints.first(), self.setpoints.last()) else {
            return 0.0;
        };
        if t_us <= first.t_us {
            return first.rps * (t_us as f64 / US_PER_S);
        }
        if t_us >= last.t_us {
            let cum = *self.cumulative_revs.last().unwrap();
            return cum + last.rps * ((t_us - last.t_us) as f64 / US_PER_S);
        }
        let i = self.segment_index(t_us);
        let a = &self.setpoints[i];
        let (rps_t, _) = self.targets_at(t_us);
        self.cumulative_revs[i] + 0.5 * (a.rps + rps_t) * ((t_us - a.t_us) as f64 / US_PER_S)
    }

    // index i with setpoints[i].t_us <= t_us < setpoints[i + 1].t_us
    fn segment_index(&self, t_us: u64) -> usize {
        self.setpoints.partition_point(|sp| sp.t_us <= t_us) - 1
    }
}

/// Fixed-rate sampling schedule of the emulated sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleClock {
    pub period_us: u64,
}

impl Default for SampleClock {
    fn default() -> Self {
        SampleClock { period_us: 10_000 }
    }
}

impl SampleClock {
    pub fn new(period_us: u64) -> Self {
        assert!(period_us > 0, "sample period must be positive");
        SampleClock { period_us }
    }

    /// Sample instants `0, p, 2p, ...` up to and including `until_us`.
    pub fn times(&self, until_us: u64) -> impl Iterator<Item = u64> {
        let p = self.period_us;
        (0..=until_us / p).map(move |k| k * p)
    }
}

/// Plays a [`RideProfile`] through an emulated treadmill encoder (every
/// intermediate quadrature edge is fed to a real decoder) and a quantizing
/// handlebar encoder.
#[derive(Debug, Clone)]
pub struct RideEmulator {
    profile: RideProfile,
    config: EncoderConfig,
    decoder: QuadratureDecoder,
    shaft_position: i64,
    last_t_us: Option<u64>,
}

impl RideEmulator {
    pub fn new(profile: RideProfile, config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        Ok(RideEmulator {
            profile,
            config,
            decoder: QuadratureDecoder::new(QuadraturePhase::at_position(0)),
            shaft_position: 0,
            last_t_us: None,
        })
    }

    pub fn profile(&self) -> &RideProfile {
        &self.profile
    }

    pub fn last_sample_us(&self) -> Option<u64> {
        self.last_t_us
    }

    /// Read both sensors at `t_us`, which must be later than the previous
    /// sample.
    pub fn sample_at(&mut self, t_us: u64) -> Result<SensorSample> {
        if let Some(prev) = self.last_t_us {
            if t_us <= prev {
                return Err(EncoderError::NonIncreasingSample { t_us });
            }
        }
        let ppr = self.config.pulses_per_revolution as f64;
        let target = (self.profile.revolutions_at(t_us) * ppr).round() as i64;
        while self.shaft_position != target {
            self.shaft_position += (target - self.shaft_position).signum();
            self.decoder
                .update(QuadraturePhase::at_position(self.shaft_position))?;
        }
        let (_, deg) = self.profile.targets_at(t_us);
        self.last_t_us = Some(t_us);
        Ok(SensorSample {
            incremental: IncrementalSample {
                tick_count: self.decoder.count(),
                t_us,
            },
            angle: AbsoluteAngle::quantized(deg, self.config.angle_resolution_deg),
        })
    }

    /// Inject a live setpoint reached at `effective_us`. Future script
    /// setpoints are discarded and the current targets are pinned at the last
    /// sample time so already-emitted history is unaffected.
    pub fn inject(&mut self, effective_us: u64, rps: f64, handlebar_deg: f64) -> Result<()> {
        let now = self.last_t_us.unwrap_or(0);
        let effective_us = effective_us.max(now + 1);
        let (cur_rps, cur_deg) = self.profile.targets_at(now);
        self.profile.truncate_after(now);
        if self.profile.end_us() != Some(now) {
            self.profile.push(Setpoint {
                t_us: now,
                rps: cur_rps,
                handlebar_deg: cur_deg,
            })?;
        }
        self.profile.push(Setpoint {
            t_us: effective_us,
            rps,
            handlebar_deg,
        })
    }
}

/// Emulate the whole ride: samples at every clock instant from 0 up to the last
/// setpoint. An empty profile produces no samples.
pub fn emulate_ride(
    profile: &RideProfile,
    config: &EncoderConfig,
    clock: &SampleClock,
) -> Result<Vec<SensorSample>> {
    let Some(end) = profile.end_us() else {
        return Ok(Vec::new());
    };
    let mut emulator = RideEmulator::new(profile.clone(), *config)?;
    clock.times(end).map(|t| emulator.sample_at(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::ticks_to_rps;
    use proptest::prelude::*;

    fn sp(t_us: u64, rps: f64, handlebar_deg: f64) -> Setpoint {
        Setpoint {
            t_us,
            rps,
            handlebar_deg,
        }
    }

    // Reference accumulator: midpoint-sum the interpolated speed at 1 us
    // resolution.
    fn reference_revs(profile: &RideProfile, t_us: u64) -> f64 {
        let mut revs = 0.0;
        let step = 100u64;
        let mut t = 0;
        while t < t_us {
            let dt = step.min(t_us - t);
            let mid = t as f64 + dt as f64 / 2.0;
            let (lo, hi) = (mid.floor() as u64, mid.ceil() as u64);
            let (r_lo, _) = profile.targets_at(lo);
            let (r_hi, _) = profile.targets_at(hi);
            revs += 0.5 * (r_lo + r_hi) * dt as f64 / 1e6;
            t += dt;
        }
        revs
    }

    #[test]
    fn constant_ride_counts_one_revolution() {
        let profile = RideProfile::new(vec![sp(0, 1.0, 0.0), sp(1_000_000, 1.0, 0.0)]).unwrap();
        let expected = reference_revs(&profile, 1_000_000) * 600.0;
        assert!((expected - 600.0).abs() < 1e-6);
        let samples =
            emulate_ride(&profile, &EncoderConfig::default(), &SampleClock::default()).unwrap();
        let last = samples.last().unwrap();
        assert_eq!(last.t_us(), 1_000_000);
        assert!((last.incremental.tick_count - 600).abs() <= 1);
        assert_eq!(samples.len(), 101);
    }

    #[test]
    fn empty_profile_is_empty_stream() {
        let samples = emulate_ride(
            &RideProfile::default(),
            &EncoderConfig::default(),
            &SampleClock::default(),
        )
        .unwrap();
        assert!(samples.is_empty());
    }

    #[test]
    fn repeated_time_is_unordered() {
        let err = RideProfile::new(vec![sp(0, 1.0, 0.0), sp(0, 2.0, 0.0)]).unwrap_err();
        assert!(matches!(
            err,
            EncoderError::UnorderedProfile { index: 1, .. }
        ));
        let err = RideProfile::parse("0 1 0\n500 1 0\n400 1 0\n").unwrap_err();
        assert!(matches!(
            err,
            EncoderError::UnorderedProfile { index: 2, .. }
        ));
    }

    #[test]
    fn parse_script_with_comments() {
        let text = "# ride\n0 0.0 0\n\n  1000000 1.5 30 # push\n2000000 -0.5 -15\n";
        let p = RideProfile::parse(text).unwrap();
        assert_eq!(p.setpoints().len(), 3);
        assert_eq!(p.setpoints()[1], sp(1_000_000, 1.5, 30.0));
        assert_eq!(RideProfile::parse(&p.to_script()).unwrap(), p);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = RideProfile::parse("0 1 0\n10 x 0\n").unwrap_err();
        assert!(matches!(err, EncoderError::Script { line: 2, .. }));
        let err = RideProfile::parse("0 1\n").unwrap_err();
        assert!(matches!(err, EncoderError::Script { line: 1, .. }));
    }

    #[test]
    fn ramp_integral_matches_reference() {
        let profile = RideProfile::new(vec![
            sp(100_000, 0.0, 0.0),
            sp(600_000, 2.0, 90.0),
            sp(900_000, -1.0, -45.0),
        ])
        .unwrap();
        for t in [
            0, 50_000, 100_000, 333_333, 600_000, 750_001, 900_000, 1_200_000,
        ] {
            let got = profile.revolutions_at(t);
            let want = reference_revs(&profile, t);
            assert!((got - want).abs() < 1e-9, "t={t} got={got} want={want}");
        }
    }

    #[test]
    fn angle_follows_interpolation_and_quantizes() {
        let profile = RideProfile::new(vec![sp(0, 0.0, -10.0), sp(1_000_000, 0.0, 10.0)]).unwrap();
        let samples = emulate_ride(
            &profile,
            &EncoderConfig::default(),
            &SampleClock::new(250_000),
        )
        .unwrap();
        let degs: Vec<f64> = samples.iter().map(|s| s.angle.degrees()).collect();
        let want = [350.0, 355.0, 0.0, 5.0, 10.0];
        for (g, w) in degs.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{degs:?}");
        }
    }

    #[test]
    fn backward_ride_counts_down() {
        let profile = RideProfile::new(vec![sp(0, -0.5, 0.0), sp(2_000_000, -0.5, 0.0)]).unwrap();
        let samples =
            emulate_ride(&profile, &EncoderConfig::default(), &SampleClock::default()).unwrap();
        assert_eq!(samples.last().unwrap().incremental.tick_count, -600);
    }

    #[test]
    fn inject_keeps_history() {
        let profile = RideProfile::new(vec![sp(0, 1.0, 0.0), sp(10_000_000, 1.0, 0.0)]).unwrap();
        let mut emu = RideEmulator::new(profile, EncoderConfig::default()).unwrap();
        for t in (0..=500_000).step_by(10_000) {
            emu.sample_at(t).unwrap();
        }
        let before = emu.profile().revolutions_at(500_000);
        emu.inject(510_000, 0.0, 30.0).unwrap();
        assert_eq!(emu.profile().revolutions_at(500_000), before);
        assert_eq!(emu.profile().targets_at(510_000), (0.0, 30.0));
        assert_eq!(emu.profile().end_us(), Some(510_000));
        assert!(emu.sample_at(500_000).is_err());
    }

    proptest! {
        #[test]
        fn windowed_rate_tracks_profile(
            rps in -3.0f64..3.0,
            start_k in 0u64..50,
            len in 10u64..60,
        ) {
            let profile = RideProfile::new(vec![sp(0, rps, 0.0), sp(2_000_000, rps, 0.0)]).unwrap();
            let cfg = EncoderConfig::default();
            let samples = emulate_ride(&profile, &cfg, &SampleClock::default()).unwrap();
            let a = &samples[start_k as usize];
            let b = &samples[(start_k + len) as usize];
            let dt = (b.t_us() - a.t_us()) as f64 / 1e6;
            let decoded = ticks_to_rps(b.incremental.tick_count - a.incremental.tick_count, &cfg, dt).unwrap();
            let quantum = 1.0 / (cfg.pulses_per_revolution as f64 * dt);
            prop_assert!((decoded - rps).abs() <= quantum + 1e-12);
        }

        #[test]
        fn samples_strictly_increase(period in 1_000u64..200_000, end in 1u64..3_000_000) {
            let profile = RideProfile::new(vec![sp(0, 1.0, 0.0), sp(end, 2.0, 90.0)]).unwrap();
            let samples = emulate_ride(&profile, &EncoderConfig::default(), &SampleClock::new(period)).unwrap();
            prop_assert!(samples.windows(2).all(|w| w[0].t_us() < w[1].t_us()));
            prop_assert!(samples.iter().all(|s| (0.0..360.0).contains(&s.angle.degrees())));
        }
    }
}
