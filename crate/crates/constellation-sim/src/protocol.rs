//! Parameter exchange over intermittent links: transfer timing at the
//! configured link rate, server-side mixing, and the per-scenario endpoint
//! topology (three ground stations sharing one server, or a single
//! geostationary relay with its own).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::learner::{AdamState, ModelParams};
use crate::orbit::ContactWindow;

/// Default model-exchange link rate, bits per second.
pub const DEFAULT_RATE_BITS_PER_S: f64 = 1e7;
/// Default convex-mixing weight applied to an incoming model. The incoming
/// side dominates: the global model is a recency-weighted blend, so a
/// downloading satellite is never dragged far back toward stale uploads.
pub const DEFAULT_MIXING_ALPHA: f64 = 0.9;
/// Default minimum spacing between completed exchanges of one satellite,
/// seconds. Near-continuous relay visibility needs an explicit rate limit;
/// ground-station passes are mostly shorter than this anyway.
pub const DEFAULT_MIN_EXCHANGE_INTERVAL_S: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    GroundStation,
    Relay,
}

/// A communication endpoint a satellite can exchange models with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEndpoint {
    pub id: String,
    pub kind: EndpointKind,
    pub rate_bits_per_s: f64,
}

/// Server-side state of the shared model.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub global_params: ModelParams,
    pub contact_count: u64,
    pub mixing_alpha: f64,
}

impl ServerState {
    pub fn new(global_params: ModelParams, mixing_alpha: f64) -> Self {
        ServerState {
            global_params,
            contact_count: 0,
            mixing_alpha,
        }
    }

    /// Merge an uploaded model into the global one:
    /// `global ← (1-α)·global + α·incoming`.
    ///
    /// The global version jumps past both inputs, so a satellite that later
    /// downloads the result always sees its own version strictly increase.
    pub fn aggregate(&mut self, incoming: &ModelParams) -> Result<()> {
        if incoming.weights.len() != self.global_params.weights.len() {
            return Err(SimError::ShapeMismatch {
                expected: format!("{}", self.global_params.weights.len()),
                got: format!("{}", incoming.weights.len()),
            });
        }
        let alpha = self.mixing_alpha;
        for (g, &w) in self.global_params.weights.iter_mut().zip(&incoming.weights) {
            *g = (1.0 - alpha) * *g + alpha * w;
        }
        self.global_params.version = self.global_params.version.max(incoming.version) + 1;
        self.contact_count += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferDirection {
    Upload,
    Download,
}

/// Progress of one directional transfer inside a contact window.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferJob {
    pub sat_id: u32,
    pub direction: TransferDirection,
    pub bytes_total: u64,
    pub bytes_done: f64,
    pub window_id: usize,
}

impl TransferJob {
    pub fn new(sat_id: u32, direction: TransferDirection, bytes_total: u64, window_id: usize) -> Self {
        TransferJob {
            sat_id,
            direction,
            bytes_total,
            bytes_done: 0.0,
            window_id,
        }
    }

    pub fn is_done(&self) -> bool {
        self.bytes_done >= self.bytes_total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeOutcome {
    Completed,
    Aborted,
}

/// One finished (or failed) exchange attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub t: f64,
    pub sat_id: u32,
    pub endpoint_id: String,
    pub outcome: ExchangeOutcome,
}

/// The satellite-side state an exchange touches.
pub struct ExchangePeer<'a> {
    pub sat_id: u32,
    pub params: &'a mut ModelParams,
    pub adam: &'a mut AdamState,
    pub last_exchange_version: &'a mut u64,
}

/// Seconds to move `bytes` across a link of `rate_bits_per_s`.
pub fn transfer_duration(bytes: u64, rate_bits_per_s: f64) -> Result<f64> {
    if !(rate_bits_per_s > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "link rate {rate_bits_per_s} must be positive"
        )));
    }
    Ok(bytes as f64 * 8.0 / rate_bits_per_s)
}

/// Apply the state changes of a completed upload-merge-download cycle: the
/// satellite's model is merged into the server and replaced by the merged
/// global model, and its optimizer moments are reset because they describe
/// a parameter trajectory that no longer exists.
pub fn finish_exchange(peer: &mut ExchangePeer<'_>, server: &mut ServerState) -> Result<()> {
    server.aggregate(peer.params)?;
    let wire = peer.params.wire_size_bytes;
    *peer.params = server.global_params.clone();
    peer.params.wire_size_bytes = wire;
    *peer.adam = AdamState::zeros(peer.params.weights.len());
    *peer.last_exchange_version = peer.params.version;
    Ok(())
}

/// Run one atomic exchange inside a contact window starting at `t_now`.
///
/// The cycle uploads the full model and downloads the merged one at the
/// endpoint rate. If both legs fit before the window closes the exchange
/// completes at `t_now + 2·transfer_duration`; otherwise nothing changes on
/// either side and the attempt is recorded as aborted at the window end.
pub fn run_exchange(
    mut peer: ExchangePeer<'_>,
    server: &mut ServerState,
    endpoint: &LinkEndpoint,
    window: &ContactWindow,
    t_now: f64,
) -> Result<ExchangeRecord> {
    let leg = transfer_duration(peer.params.wire_size_bytes, endpoint.rate_bits_per_s)?;
    let t_complete = t_now + 2.0 * leg;
    if t_complete <= window.t_end {
        finish_exchange(&mut peer, server)?;
        Ok(ExchangeRecord {
            t: t_complete,
            sat_id: peer.sat_id,
            endpoint_id: endpoint.id.clone(),
            outcome: ExchangeOutcome::Completed,
        })
    } else {
        Ok(ExchangeRecord {
            t: window.t_end,
            sat_id: peer.sat_id,
            endpoint_id: endpoint.id.clone(),
            outcome: ExchangeOutcome::Aborted,
        })
    }
}

/// Endpoints and their server wiring for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointTopology {
    pub endpoints: Vec<LinkEndpoint>,
    /// Server index behind each endpoint.
    pub server_of_endpoint: Vec<usize>,
    pub server_count: usize,
}

/// Default endpoint topology per scenario: three terrestrially networked
/// ground stations behind one server, or one relay with its own.
pub fn endpoint_set(scenario_id: u8) -> Result<EndpointTopology> {
    match scenario_id {
        1 => Ok(EndpointTopology {
            endpoints: ["matera", "svalbard", "maspalomas"]
                .into_iter()
                .map(|id| LinkEndpoint {
                    id: id.to_string(),
                    kind: EndpointKind::GroundStation,
                    rate_bits_per_s: DEFAULT_RATE_BITS_PER_S,
                })
                .collect(),
            server_of_endpoint: vec![0, 0, 0],
            server_count: 1,
        }),
        2 => Ok(EndpointTopology {
            endpoints: vec![LinkEndpoint {
                id: "edrs".to_string(),
                kind: EndpointKind::Relay,
                rate_bits_per_s: DEFAULT_RATE_BITS_PER_S,
            }],
            server_of_endpoint: vec![0],
            server_count: 1,
        }),
        other => Err(SimError::UnknownScenario(other)),
    }
}
