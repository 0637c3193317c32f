//! Links that carry datagrams from the MCU to the world.

use std::collections::VecDeque;
use std::io;
use std::net::{SocketAddr, UdpSocket};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TelemetryError, DEFAULT_UDP_PORT};

/// A datagram handed to the receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub bytes: Vec<u8>,
    pub arrival_t_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransportStats {
    pub sent: u64,
    pub lost: u64,
    pub duplicated: u64,
    pub delivered: u64,
}

pub trait Transport: Send {
    fn send(&mut self, bytes: &[u8], t_us: u64) -> io::Result<()>;

    /// Everything that has arrived by `now_us`, in arrival order.
    fn deliver(&mut self, now_us: u64) -> io::Result<Vec<Delivery>>;

    fn stats(&self) -> TransportStats;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum TransportConfig {
    #[default]
    Loopback,
    Udp {
        address: String,
        port: u16,
    },
    Scripted {
        loss_pct: f64,
        reorder_pct: f64,
        duplicate_pct: f64,
        seed: Option<u64>,
    },
}

impl TransportConfig {
    /// Name used in config files.
    pub fn kind(&self) -> &'static str {
        match self {
            TransportConfig::Loopback => "loopback",
            TransportConfig::Udp { .. } => "udp",
            TransportConfig::Scripted { .. } => "scripted",
        }
    }

    pub fn udp_default() -> Self {
        TransportConfig::Udp {
            address: "127.0.0.1".into(),
            port: DEFAULT_UDP_PORT,
        }
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        if let TransportConfig::Scripted {
            loss_pct,
            reorder_pct,
            duplicate_pct,
            seed,
        } = self
        {
            for (name, v) in [
                ("loss", loss_pct),
                ("reorder", reorder_pct),
                ("duplicate", duplicate_pct),
            ] {
                if !(0.0..=100.0).contains(v) {
                    return Err(TelemetryError::InvalidTransport(format!(
                        "{name} percentage {v} outside [0, 100]"
                    )));
                }
            }
            let any = *loss_pct > 0.0 || *reorder_pct > 0.0 || *duplicate_pct > 0.0;
            if any && seed.is_none() {
                return Err(TelemetryError::InvalidTransport(
                    "scripted transport with nonzero impairments needs a seed".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Transport>, TelemetryError> {
        self.validate()?;
        Ok(match self {
            TransportConfig::Loopback => Box::new(LoopbackTransport::default()),
            TransportConfig::Udp { address, port } => {
                Box::new(UdpTransport::bind(address, *port).map_err(TelemetryError::Io)?)
            }
            TransportConfig::Scripted {
                loss_pct,
                reorder_pct,
                duplicate_pct,
                seed,
            } => Box::new(ScriptedTransport::new(
                *loss_pct,
                *reorder_pct,
                *duplicate_pct,
                seed.unwrap_or(0),
            )),
        })
    }
}

/// Perfect in-process link: every datagram arrives at its send time.
#[derive(Debug, Default)]
pub struct LoopbackTransport {
    queue: VecDeque<Delivery>,
    stats: TransportStats,
}

impl Transport for LoopbackTransport {
    fn send(&mut self, bytes: &[u8], t_us: u64) -> io::Result<()> {
        self.stats.sent += 1;
        self.queue.push_back(Delivery {
            bytes: bytes.to_vec(),
            arrival_t_us: t_us,
        });
        Ok(())
    }

    fn deliver(&mut self, _now_us: u64) -> io::Result<Vec<Delivery>> {
        self.stats.delivered += self.queue.len() as u64;
        Ok(self.queue.drain(..).collect())
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}

/// Seeded lossy link. Each send draws loss, duplication and reordering
/// independently; a reordered datagram is held back and delivered right after
/// the next datagram that goes through.
#[derive(Debug)]
pub struct ScriptedTransport {
    loss: f64,
    reorder: f64,
    duplicate: f64,
    rng: ChaCha8Rng,
    ready: VecDeque<Vec<u8>>,
    held: Vec<Vec<u8>>,
    stats: TransportStats,
}

impl ScriptedTransport {
    pub fn new(loss_pct: f64, reorder_pct: f64, duplicate_pct: f64, seed: u64) -> Self {
        ScriptedTransport {
            loss: loss_pct / 100.0,
            reorder: reorder_pct / 100.0,
            duplicate: duplicate_pct / 100.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ready: VecDeque::new(),
            held: Vec::new(),
            stats: TransportStats::default(),
        }
    }

    /// Datagrams still held back for reordering.
    pub fn in_flight(&self) -> usize {
        self.held.len()
    }
}

impl Transport for ScriptedTransport {
    fn send(&mut self, bytes: &[u8], _t_us: u64) -> io::Result<()> {
        self.stats.sent += 1;
        // always three draws so the stream position depends only on the send count
        let lost = self.rng.random::<f64>() < self.loss;
        let dup = self.rng.random::<f64>() < self.duplicate;
        let reorder = self.rng.random::<f64>() < self.reorder;
        if lost {
            self.stats.lost += 1;
            return Ok(());
        }
        let copies = if dup {
            self.stats.duplicated += 1;
            2
        } else {
            1
        };
        if reorder {
            for _ in 0..copies {
                self.held.push(bytes.to_vec());
            }
        } else {
            for _ in 0..copies {
                self.ready.push_back(bytes.to_vec());
            }
            self.ready.extend(self.held.drain(..));
        }
        Ok(())
    }

    fn deliver(&mut self, now_us: u64) -> io::Result<Vec<Delivery>> {
        self.stats.delivered += self.ready.len() as u64;
        Ok(self
            .ready
            .drain(..)
            .map(|bytes| Delivery {
                bytes,
                arrival_t_us: now_us,
            })
            .collect())
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}

/// Real UDP sockets: a receiver bound to `address:port` and an ephemeral
/// sender aimed at it.
#[derive(Debug)]
pub struct UdpTransport {
    tx: UdpSocket,
    rx: UdpSocket,
    target: SocketAddr,
    stats: TransportStats,
}

impl UdpTransport {
    pub fn bind(address: &str, port: u16) -> io::Result<Self> {
        let rx = UdpSocket::bind((address, port))?;
        rx.set_nonblocking(true)?;
        let target = rx.local_addr()?;
        let tx = UdpSocket::bind((address, 0))?;
        Ok(UdpTransport {
            tx,
            rx,
            target,
            stats: TransportStats::default(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.target
    }
}

impl Transport for UdpTransport {
    fn send(&mut self, bytes: &[u8], _t_us: u64) -> io::Result<()> {
        self.stats.sent += 1;
        self.tx.send_to(bytes, self.target)?;
        Ok(())
    }

    fn deliver(&mut self, now_us: u64) -> io::Result<Vec<Delivery>> {
        let mut out = Vec::new();
        let mut buf = [0u8; 2048];
        loop {
            match self.rx.recv_from(&mut buf) {
                Ok((n, _)) => out.push(Delivery {
                    bytes: buf[..n].to_vec(),
                    arrival_t_us: now_us,
                }),
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                Err(e) => return Err(e),
            }
        }
        self.stats.delivered += out.len() as u64;
        Ok(out)
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}
