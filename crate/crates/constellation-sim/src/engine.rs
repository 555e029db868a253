//! Fixed-timestep world loop: per-step activity selection, resource
//! integration, training-time accounting against the measured per-batch
//! wall time, transfer-job progression, overpass evaluation, and the
//! deterministic event log every acceptance check is computed from.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::constraints::{self, Activity, ResourceModel, ResourceState};
use crate::error::{Result, SimError};
use crate::learner::{
    self, AdamState, ModelParams, TileSample, TrainerConfig,
};
use crate::orbit::{
    self, ContactWindow, GroundStation, OrbitalElements, Vec3,
};
use crate::protocol::{
    self, EndpointKind, ExchangeOutcome, ExchangePeer, ExchangeRecord, LinkEndpoint, ServerState,
    TransferDirection, TransferJob,
};

/// One log row per satellite per step. The optional columns are populated
/// by the activity that produced them; `exchange` carries the attempts that
/// resolved during the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Step start time, seconds since epoch.
    pub t: f64,
    pub sat_id: u32,
    pub activity: Activity,
    /// State of charge after the step.
    pub soc: f64,
    /// Node temperature after the step, °C.
    pub temperature_c: f64,
    pub in_eclipse: bool,
    pub dt_s: f64,
    /// Training batches completed during the step.
    pub batches: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchange: Vec<ExchangeEvent>,
}

/// An exchange attempt that resolved (completed or aborted) during a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeEvent {
    pub endpoint_id: String,
    pub endpoint_kind: EndpointKind,
    pub outcome: ExchangeOutcome,
    /// Exact resolution instant, which may fall inside the step.
    pub t_resolved: f64,
}

/// An upload-merge-download cycle in flight.
#[derive(Debug, Clone)]
struct ActiveExchange {
    endpoint_idx: usize,
    window_idx: usize,
    started_t: f64,
    /// Seconds per transfer leg at the endpoint rate.
    leg_s: f64,
    job: TransferJob,
}

/// Per-satellite state owned by the loop.
pub struct AgentState {
    pub sat_id: u32,
    pub elements: OrbitalElements,
    pub resources: ResourceState,
    pub params: ModelParams,
    pub adam: AdamState,
    pub shard: Vec<TileSample>,
    pub batch_time_s: f64,
    pub train_accumulator_s: f64,
    pub last_exchange_version: u64,
    pub last_exchange_completed_t: Option<f64>,
    pub batches_run: u64,
    order: Vec<usize>,
    order_cursor: usize,
    shuffle_rng: ChaCha8Rng,
    active_exchange: Option<ActiveExchange>,
}

impl AgentState {
    /// Next `batch_size` shard indices in the current shuffled order,
    /// reshuffling whenever a full pass completes.
    fn next_batch(&mut self, batch_size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            if self.order_cursor == self.order.len() {
                self.order.shuffle(&mut self.shuffle_rng);
                self.order_cursor = 0;
            }
            out.push(self.order[self.order_cursor]);
            self.order_cursor += 1;
        }
        out
    }
}

/// Totals recomputable from an event log alone; the summary embeds these
/// and `verify` recomputes them for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTotals {
    pub total_batches: u64,
    pub exchanges_completed: u64,
    pub exchanges_aborted: u64,
    pub exchanges_completed_ground_station: u64,
    pub exchanges_completed_relay: u64,
    pub standby_seconds: f64,
    pub eclipse_seconds: f64,
}

/// Per-satellite slice of the totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteTotals {
    pub sat_id: u32,
    pub batches: u64,
    pub exchanges_completed: u64,
    pub exchanges_aborted: u64,
    pub standby_seconds: f64,
    pub eclipse_seconds: f64,
}

/// Fold an event log into its totals. Both the run summary and `verify`
/// call this, so equality between them is equality of the inputs.
pub fn event_totals(events: &[EventRecord]) -> (EventTotals, Vec<SatelliteTotals>) {
    let mut totals = EventTotals {
        total_batches: 0,
        exchanges_completed: 0,
        exchanges_aborted: 0,
        exchanges_completed_ground_station: 0,
        exchanges_completed_relay: 0,
        standby_seconds: 0.0,
        eclipse_seconds: 0.0,
    };
    let mut per_sat: BTreeMap<u32, SatelliteTotals> = BTreeMap::new();
    for ev in events {
        let sat = per_sat.entry(ev.sat_id).or_insert_with(|| SatelliteTotals {
            sat_id: ev.sat_id,
            batches: 0,
            exchanges_completed: 0,
            exchanges_aborted: 0,
            standby_seconds: 0.0,
            eclipse_seconds: 0.0,
        });
        totals.total_batches += ev.batches as u64;
        sat.batches += ev.batches as u64;
        if ev.activity == Activity::Standby {
            totals.standby_seconds += ev.dt_s;
            sat.standby_seconds += ev.dt_s;
        }
        if ev.in_eclipse {
            totals.eclipse_seconds += ev.dt_s;
            sat.eclipse_seconds += ev.dt_s;
        }
        for ex in &ev.exchange {
            match ex.outcome {
                ExchangeOutcome::Completed => {
                    totals.exchanges_completed += 1;
                    sat.exchanges_completed += 1;
                    match ex.endpoint_kind {
                        EndpointKind::GroundStation => {
                            totals.exchanges_completed_ground_station += 1
                        }
                        EndpointKind::Relay => totals.exchanges_completed_relay += 1,
                    }
                }
                ExchangeOutcome::Aborted => {
                    totals.exchanges_aborted += 1;
                    sat.exchanges_aborted += 1;
                }
            }
        }
    }
    (totals, per_sat.into_values().collect())
}

/// End-of-run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario_id: u8,
    pub seed: u64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub satellite_count: u32,
    #[serde(flatten)]
    pub totals: EventTotals,
    pub untrained_eval_iou: f64,
    pub untrained_eval_loss: f64,
    /// Mean over satellites of the final per-satellite evaluation.
    pub final_mean_iou: f64,
    pub final_mean_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_overpass_t: Option<f64>,
    pub server_contact_counts: Vec<u64>,
    pub per_satellite: Vec<SatelliteSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteSummary {
    #[serde(flatten)]
    pub totals: SatelliteTotals,
    pub final_version: u64,
    pub final_eval_iou: f64,
    pub final_eval_loss: f64,
}

/// Everything a run produces.
pub struct RunResult {
    pub config: ScenarioConfig,
    pub events: Vec<EventRecord>,
    pub exchange_records: Vec<ExchangeRecord>,
    pub summary: RunSummary,
}

/// The world state advanced by [`Simulation::step`].
pub struct Simulation {
    config: ScenarioConfig,
    resource_model: ResourceModel,
    trainer: TrainerConfig,
    sun_dir: Vec3,
    agents: Vec<AgentState>,
    servers: Vec<ServerState>,
    endpoints: Vec<LinkEndpoint>,
    endpoint_server: Vec<usize>,
    /// `windows[sat][endpoint]`, each sorted by start time.
    windows: Vec<Vec<Vec<ContactWindow>>>,
    cursors: Vec<Vec<usize>>,
    eval_set: Vec<TileSample>,
    t: f64,
    events: Vec<EventRecord>,
    exchange_records: Vec<ExchangeRecord>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let resource_model = config.resources.model();
        let trainer = config.trainer;
        let sun_dir = Vec3::new(
            config.sun_direction[0],
            config.sun_direction[1],
            config.sun_direction[2],
        )
        .normalized();

        let a = config.semi_major_axis_km();
        let phases = config.phases_deg();
        let initial = ResourceState {
            soc: config.resources.initial_soc,
            temperature_c: config.resources.initial_temperature_c,
        };
        let mut agents = Vec::with_capacity(config.satellite_count as usize);
        for (i, &phase) in phases.iter().enumerate() {
            let sat_id = i as u32;
            let shard = learner::generate_tiles(
                config.seed,
                config.tiles.tiles_per_shard,
                sat_id as u64,
                &config.tiles.shard_gen_config(sat_id as u64),
            );
            let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
            shuffle_rng.set_stream((1u64 << 63) | sat_id as u64);
            let mut order: Vec<usize> = (0..shard.len()).collect();
            order.shuffle(&mut shuffle_rng);
            agents.push(AgentState {
                sat_id,
                elements: OrbitalElements {
                    semi_major_axis_km: a,
                    inclination_deg: config.orbit.inclination_deg,
                    raan_deg: config.orbit.raan_deg,
                    phase_deg: phase,
                },
                resources: initial,
                params: ModelParams::zeros(config.exchange.wire_size_bytes),
                adam: AdamState::zeros(learner::PARAM_COUNT),
                shard,
                batch_time_s: config.batch_time_s,
                train_accumulator_s: 0.0,
                last_exchange_version: 0,
                last_exchange_completed_t: None,
                batches_run: 0,
                order,
                order_cursor: 0,
                shuffle_rng,
                active_exchange: None,
            });
        }

        // The evaluation set is a reserved shard past the training shards,
        // drawn from the mixture of shard distributions.
        let eval_set = learner::generate_tiles(
            config.seed,
            config.tiles.eval_tiles,
            config.satellite_count as u64,
            &config.tiles.eval_gen_config(),
        );

        // Endpoint topology: all ground stations share one server; the
        // relay has its own.
        let (endpoints, endpoint_server): (Vec<LinkEndpoint>, Vec<usize>) = match config.scenario_id
        {
            1 => config
                .ground_stations
                .iter()
                .map(|st| {
                    (
                        LinkEndpoint {
                            id: st.name.clone(),
                            kind: EndpointKind::GroundStation,
                            rate_bits_per_s: config.exchange.rate_bits_per_s,
                        },
                        0,
                    )
                })
                .unzip(),
            2 => (
                vec![LinkEndpoint {
                    id: "edrs".to_string(),
                    kind: EndpointKind::Relay,
                    rate_bits_per_s: config.exchange.rate_bits_per_s,
                }],
                vec![0],
            ),
            other => return Err(SimError::UnknownScenario(other)),
        };
        let servers = vec![ServerState::new(
            ModelParams::zeros(config.exchange.wire_size_bytes),
            config.exchange.mixing_alpha,
        )];

        // Contact windows per satellite and endpoint for the whole run.
        let mut windows = Vec::with_capacity(agents.len());
        for agent in &agents {
            let mut per_endpoint = Vec::with_capacity(endpoints.len());
            for (e_idx, endpoint) in endpoints.iter().enumerate() {
                let elements = agent.elements;
                let w = match endpoint.kind {
                    EndpointKind::GroundStation => {
                        let station = &config.ground_stations[e_idx];
                        orbit::contact_windows(
                            |t| station_sees(&elements, station, t),
                            &endpoint.id,
                            0.0,
                            config.duration_s,
                            config.window_sample_dt_s,
                        )
                    }
                    EndpointKind::Relay => {
                        let lon = config.relay.longitude_deg;
                        orbit::contact_windows(
                            |t| {
                                orbit::has_line_of_sight(
                                    orbit::propagate(&elements, t),
                                    orbit::geostationary_position(lon, t),
                                )
                            },
                            &endpoint.id,
                            0.0,
                            config.duration_s,
                            config.window_sample_dt_s,
                        )
                    }
                };
                per_endpoint.push(w);
            }
            windows.push(per_endpoint);
        }
        let cursors = vec![vec![0usize; endpoints.len()]; agents.len()];

        Ok(Simulation {
            config,
            resource_model,
            trainer,
            sun_dir,
            agents,
            servers,
            endpoints,
            endpoint_server,
            windows,
            cursors,
            eval_set,
            t: 0.0,
            events: Vec::new(),
            exchange_records: Vec::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn servers(&self) -> &[ServerState] {
        &self.servers
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Advance every satellite by `dt` seconds, in sat_id order.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(SimError::InvalidInput(format!("dt {dt} must be positive")));
        }
        let t = self.t;
        for idx in 0..self.agents.len() {
            self.step_agent(idx, t, dt)?;
        }
        self.t = t + dt;
        Ok(())
    }

    fn step_agent(&mut self, idx: usize, t: f64, dt: f64) -> Result<()> {
        let pos = orbit::propagate(&self.agents[idx].elements, t);
        let in_eclipse = orbit::is_eclipsed(pos, self.sun_dir);
        let mut resolved: Vec<ExchangeEvent> = Vec::new();

        // A job whose window has closed is dead regardless of anything else.
        let stale_end = match &self.agents[idx].active_exchange {
            Some(ex) if !self.exchange_window(ex).contains(t) => {
                Some(self.exchange_window(ex).t_end)
            }
            _ => None,
        };
        if let Some(window_end) = stale_end {
            let ev = self.abort_exchange(idx, window_end);
            resolved.push(ev);
        }

        let permits = constraints::permits_activity(self.agents[idx].resources);
        let activity = if !permits {
            if self.agents[idx].active_exchange.is_some() {
                let ev = self.abort_exchange(idx, t);
                resolved.push(ev);
            }
            Activity::Standby
        } else if self.agents[idx].active_exchange.is_some() {
            Activity::Exchanging
        } else {
            let window_hit = self.current_window(idx, t);
            let over_site = self.over_site(pos, t);
            let gate_open = self.config.exchange.enabled
                && window_hit.is_some()
                && self.agents[idx].params.version > self.agents[idx].last_exchange_version
                && self.agents[idx].last_exchange_completed_t.is_none_or(|tc| {
                    t - tc >= self.config.exchange.min_exchange_interval_s
                });
            let start_exchange = if self.config.exchange.exchange_before_inference {
                gate_open
            } else {
                gate_open && !over_site
            };
            if start_exchange {
                let (endpoint_idx, window_idx) = window_hit.expect("gate requires a window");
                self.start_exchange(idx, endpoint_idx, window_idx, t)?;
                Activity::Exchanging
            } else if over_site {
                Activity::Inference
            } else {
                Activity::Training
            }
        };

        {
            let agent = &mut self.agents[idx];
            agent.resources = constraints::update_power(
                agent.resources,
                &self.resource_model,
                activity,
                in_eclipse,
                dt,
            )?;
            agent.resources =
                constraints::update_temperature(agent.resources, &self.resource_model, activity, dt)?;
        }

        let mut batches = 0u32;
        let mut train_loss = None;
        let mut eval_iou = None;
        let mut eval_loss = None;
        match activity {
            Activity::Training => {
                let trainer = self.trainer;
                let agent = &mut self.agents[idx];
                agent.train_accumulator_s += dt;
                let n = (agent.train_accumulator_s / agent.batch_time_s).floor() as u64;
                agent.train_accumulator_s =
                    (agent.train_accumulator_s - n as f64 * agent.batch_time_s).max(0.0);
                if n > 0 {
                    let mut loss_sum = 0.0;
                    for _ in 0..n {
                        let batch_idx = agent.next_batch(trainer.batch_size);
                        let batch: Vec<&TileSample> =
                            batch_idx.iter().map(|&i| &agent.shard[i]).collect();
                        let (grad, loss) = learner::batch_gradient(&agent.params, &batch);
                        let (p, s) = learner::adam_step(&agent.params, &agent.adam, &grad, &trainer)?;
                        agent.params = p;
                        agent.adam = s;
                        agent.batches_run += 1;
                        loss_sum += loss;
                    }
                    batches = n as u32;
                    train_loss = Some(loss_sum / n as f64);
                }
            }
            Activity::Exchanging => {
                if let Some(ev) = self.advance_exchange(idx, t, dt)? {
                    resolved.push(ev);
                }
            }
            Activity::Inference => {
                let (i, l) = learner::evaluate(&self.agents[idx].params, &self.eval_set)?;
                eval_iou = Some(i);
                eval_loss = Some(l);
            }
            Activity::Standby => {}
        }

        let agent = &self.agents[idx];
        self.events.push(EventRecord {
            t,
            sat_id: agent.sat_id,
            activity,
            soc: agent.resources.soc,
            temperature_c: agent.resources.temperature_c,
            in_eclipse,
            dt_s: dt,
            batches,
            train_loss,
            eval_iou,
            eval_loss,
            exchange: resolved,
        });
        Ok(())
    }

    fn exchange_window(&self, ex: &ActiveExchange) -> &ContactWindow {
        // Window indices come from the same per-sat table the job was
        // created from; resolve through the job's owner.
        &self.windows[ex.job.sat_id as usize][ex.endpoint_idx][ex.window_idx]
    }

    fn start_exchange(&mut self, idx: usize, endpoint_idx: usize, window_idx: usize, t: f64) -> Result<()> {
        let endpoint = &self.endpoints[endpoint_idx];
        let agent = &mut self.agents[idx];
        let leg_s = protocol::transfer_duration(
            agent.params.wire_size_bytes,
            endpoint.rate_bits_per_s,
        )?;
        agent.active_exchange = Some(ActiveExchange {
            endpoint_idx,
            window_idx,
            started_t: t,
            leg_s,
            job: TransferJob::new(
                agent.sat_id,
                TransferDirection::Upload,
                agent.params.wire_size_bytes,
                window_idx,
            ),
        });
        Ok(())
    }

    /// Advance the in-flight transfer by the in-window part of this step.
    /// Returns the resolution event when the download leg finishes.
    fn advance_exchange(&mut self, idx: usize, t: f64, dt: f64) -> Result<Option<ExchangeEvent>> {
        let (endpoint_idx, window_end, leg_s, started_t) = {
            let ex = self.agents[idx].active_exchange.as_ref().expect("active job");
            (
                ex.endpoint_idx,
                self.exchange_window(ex).t_end,
                ex.leg_s,
                ex.started_t,
            )
        };
        let rate = self.endpoints[endpoint_idx].rate_bits_per_s;
        let step_end = (t + dt).min(window_end);
        let mut budget_bytes = ((step_end - t).max(0.0)) * rate / 8.0;

        let done = {
            let ex = self.agents[idx].active_exchange.as_mut().expect("active job");
            loop {
                let need = ex.job.bytes_total as f64 - ex.job.bytes_done;
                if budget_bytes + 1e-6 >= need {
                    budget_bytes -= need;
                    ex.job.bytes_done = ex.job.bytes_total as f64;
                    match ex.job.direction {
                        TransferDirection::Upload => {
                            ex.job = TransferJob::new(
                                ex.job.sat_id,
                                TransferDirection::Download,
                                ex.job.bytes_total,
                                ex.window_idx,
                            );
                        }
                        TransferDirection::Download => break true,
                    }
                } else {
                    ex.job.bytes_done += budget_bytes;
                    break false;
                }
            }
        };
        if !done {
            return Ok(None);
        }

        let t_resolved = started_t + 2.0 * leg_s;
        let endpoint = self.endpoints[endpoint_idx].clone();
        let server = &mut self.servers[self.endpoint_server[endpoint_idx]];
        let agent = &mut self.agents[idx];
        let mut peer = ExchangePeer {
            sat_id: agent.sat_id,
            params: &mut agent.params,
            adam: &mut agent.adam,
            last_exchange_version: &mut agent.last_exchange_version,
        };
        protocol::finish_exchange(&mut peer, server)?;
        agent.last_exchange_completed_t = Some(t_resolved);
        agent.active_exchange = None;
        self.exchange_records.push(ExchangeRecord {
            t: t_resolved,
            sat_id: agent.sat_id,
            endpoint_id: endpoint.id.clone(),
            outcome: ExchangeOutcome::Completed,
        });
        Ok(Some(ExchangeEvent {
            endpoint_id: endpoint.id,
            endpoint_kind: endpoint.kind,
            outcome: ExchangeOutcome::Completed,
            t_resolved,
        }))
    }

    fn abort_exchange(&mut self, idx: usize, t_resolved: f64) -> ExchangeEvent {
        let ex = self.agents[idx]
            .active_exchange
            .take()
            .expect("abort requires an active job");
        let endpoint = &self.endpoints[ex.endpoint_idx];
        self.exchange_records.push(ExchangeRecord {
            t: t_resolved,
            sat_id: self.agents[idx].sat_id,
            endpoint_id: endpoint.id.clone(),
            outcome: ExchangeOutcome::Aborted,
        });
        ExchangeEvent {
            endpoint_id: endpoint.id.clone(),
            endpoint_kind: endpoint.kind,
            outcome: ExchangeOutcome::Aborted,
            t_resolved,
        }
    }

    /// First live window containing `t`, searched in endpoint order.
    fn current_window(&mut self, idx: usize, t: f64) -> Option<(usize, usize)> {
        for e_idx in 0..self.endpoints.len() {
            let list = &self.windows[idx][e_idx];
            let cursor = &mut self.cursors[idx][e_idx];
            while *cursor < list.len() && list[*cursor].t_end <= t {
                *cursor += 1;
            }
            if *cursor < list.len() && list[*cursor].contains(t) {
                return Some((e_idx, *cursor));
            }
        }
        None
    }

    fn over_site(&self, pos: Vec3, t: f64) -> bool {
        match &self.config.disaster_site {
            None => false,
            Some(site) => {
                let site_pos = orbit::surface_position(site.latitude_deg, site.longitude_deg, t);
                orbit::elevation_deg(pos, site_pos)
                    .is_ok_and(|el| el >= site.min_elevation_deg)
            }
        }
    }

    /// Final evaluation, totals, and summary assembly.
    pub fn finish(self) -> Result<RunResult> {
        let Simulation {
            config,
            agents,
            servers,
            eval_set,
            events,
            exchange_records,
            ..
        } = self;

        let untrained = ModelParams::zeros(config.exchange.wire_size_bytes);
        let (untrained_eval_iou, untrained_eval_loss) = learner::evaluate(&untrained, &eval_set)?;

        let (totals, per_sat_totals) = event_totals(&events);
        let mut per_satellite = Vec::with_capacity(agents.len());
        let mut iou_sum = 0.0;
        let mut loss_sum = 0.0;
        for agent in &agents {
            let (final_eval_iou, final_eval_loss) = learner::evaluate(&agent.params, &eval_set)?;
            iou_sum += final_eval_iou;
            loss_sum += final_eval_loss;
            let totals = per_sat_totals
                .iter()
                .find(|s| s.sat_id == agent.sat_id)
                .cloned()
                .unwrap_or(SatelliteTotals {
                    sat_id: agent.sat_id,
                    batches: 0,
                    exchanges_completed: 0,
                    exchanges_aborted: 0,
                    standby_seconds: 0.0,
                    eclipse_seconds: 0.0,
                });
            per_satellite.push(SatelliteSummary {
                totals,
                final_version: agent.params.version,
                final_eval_iou,
                final_eval_loss,
            });
        }
        let n = agents.len() as f64;

        let first_overpass_t = match &config.disaster_site {
            None => None,
            Some(_) => overpass_events(&config)?.first().map(|&(_, t)| t),
        };

        let summary = RunSummary {
            scenario_id: config.scenario_id,
            seed: config.seed,
            duration_s: config.duration_s,
            dt_s: config.dt_s,
            satellite_count: config.satellite_count,
            totals,
            untrained_eval_iou,
            untrained_eval_loss,
            final_mean_iou: iou_sum / n,
            final_mean_loss: loss_sum / n,
            first_overpass_t,
            server_contact_counts: servers.iter().map(|s| s.contact_count).collect(),
            per_satellite,
        };
        Ok(RunResult {
            config,
            events,
            exchange_records,
            summary,
        })
    }
}

fn station_sees(elements: &OrbitalElements, station: &GroundStation, t: f64) -> bool {
    let sat = orbit::propagate(elements, t);
    let st = orbit::ground_station_position(station, t);
    orbit::elevation_deg(sat, st).is_ok_and(|el| el >= station.min_elevation_deg)
}

/// Execute a full run: validate, build, step to the configured duration,
/// and summarize. Identical configs produce identical results.
pub fn run(config: &ScenarioConfig) -> Result<RunResult> {
    config.validate()?;
    let mut sim = Simulation::new(config.clone())?;
    let dt = config.dt_s;
    let full_steps = (config.duration_s / dt).floor() as u64;
    for _ in 0..full_steps {
        sim.step(dt)?;
    }
    let remainder = config.duration_s - full_steps as f64 * dt;
    if remainder > 1e-9 {
        sim.step(remainder)?;
    }
    sim.finish()
}

/// Times at which each satellite rises above the disaster site, over the
/// configured duration. Pure geometry; no learner state involved.
pub fn overpass_events(config: &ScenarioConfig) -> Result<Vec<(u32, f64)>> {
    let site = config
        .disaster_site
        .as_ref()
        .ok_or_else(|| SimError::config("disaster_site", "not configured"))?;
    let a = config.semi_major_axis_km();
    let mut out = Vec::new();
    for (i, &phase) in config.phases_deg().iter().enumerate() {
        let elements = OrbitalElements {
            semi_major_axis_km: a,
            inclination_deg: config.orbit.inclination_deg,
            raan_deg: config.orbit.raan_deg,
            phase_deg: phase,
        };
        let windows = orbit::contact_windows(
            |t| {
                let sat = orbit::propagate(&elements, t);
                let site_pos = orbit::surface_position(site.latitude_deg, site.longitude_deg, t);
                orbit::elevation_deg(sat, site_pos).is_ok_and(|el| el >= site.min_elevation_deg)
            },
            &site.name,
            0.0,
            config.duration_s,
            config.window_sample_dt_s,
        );
        out.extend(windows.iter().map(|w| (i as u32, w.t_start)));
    }
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(out)
}
