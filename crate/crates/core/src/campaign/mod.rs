//! The end-to-end attack campaign: a seven-phase kill chain driven by one
//! attacker against a served model whose defender watches for probe bursts
//! and periodically retrains on traffic it accepted.
//!
//! The phases run strictly in order. Reconnaissance paces benign-looking
//! probes under the detector's rate and seeds the attacker's surrogate;
//! weaponization generates near-boundary candidates graded by that
//! surrogate; delivery sends the pick and reconciles the prediction
//! against the live answer; exploitation extracts a working clone; and
//! installation runs boiling-frog poisoning rounds until the planted
//! sample passes as benign. Command-and-control and action are bookkeeping
//! entries. The chain ends early if the detector attributes an alert to
//! the attacker's source tag or the oracle budget runs out.

mod defender;
mod detector;

pub use defender::{boundary_drift, defender_retrain, DefenderState, TrainerSpec};
pub use detector::{detector_scan, AlertEvent, AlertKind, BurstDetector};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::gen_continuum;
use crate::error::{Error, Result};
use crate::extraction::{extract_blr, extract_mlp, extract_mlr, ExtractionResult, FidelityEval};
use crate::feature::{FeatureVector, PartialFeatureVector};
use crate::models::{train_blr, BlrHyper, MlpHyper, MlrHyper, TargetModel};
use crate::oracle::{make_oracle, Oracle, OracleConfig, OracleMode, OracleResponse, QueryOracle};
use crate::rng::{rng, sub_seed, uniform_point};
use crate::surrogate::{
    reconcile, select_candidate, surrogate_insert, surrogate_predict, ProbeStore,
    DEFAULT_RECONCILE_TOL,
};

/// All attacker traffic carries one tag; the detector attributes by tag.
pub const ATTACKER_SOURCE: &str = "attacker-0";

/// Class 0 is the benign archetype everywhere in this crate's data.
pub const BENIGN_CLASS: usize = 0;

/// Uniform points used to score the clone after exploitation.
const FIDELITY_UNIF: usize = 500;

/// Rejection-sampling allowance per requested candidate in weaponize.
const WEAPONIZE_ATTEMPT_FACTOR: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub probes_total: usize,
    /// Length in ticks of the window the attacker paces itself against.
    pub window_ticks: u64,
    /// Attacker's own stealth cap: at most this many probes per window.
    pub max_probes_per_window: u64,
    /// Center of the benign-looking input distribution the probes mimic.
    pub benign_anchor: FeatureVector,
    /// Per-coordinate Gaussian jitter around the anchor.
    #[serde(default = "default_jitter")]
    pub benign_jitter: f64,
}

fn default_jitter() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeaponizationConfig {
    /// Candidates must be predicted within this distance of confidence 0.5.
    pub boundary_band: f64,
    pub candidate_pool_size: usize,
    /// Surrogate-vs-live agreement tolerance during reconciliation.
    #[serde(default = "default_reconcile_tol")]
    pub reconcile_tol: f64,
}

fn default_reconcile_tol() -> f64 {
    DEFAULT_RECONCILE_TOL
}

/// Which extraction attack exploitation runs. The campaign oracle serves
/// confidences, so the label-only and tree-id attacks are out of scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Blr,
    Mlr,
    Mlp,
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackKind::Blr => "blr",
            AttackKind::Mlr => "mlr",
            AttackKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitationConfig {
    pub attack: AttackKind,
    /// Queries granted to the extraction attack.
    pub budget: usize,
    /// Hidden width guess for the mlp attack; ignored by the others.
    #[serde(default = "default_hidden_guess")]
    pub hidden_guess: usize,
}

fn default_hidden_guess() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstallationConfig {
    pub rounds: usize,
    pub injections_per_round: usize,
    /// The sample the attacker ultimately wants classified benign.
    pub x_star: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenderConfig {
    pub detector_window: u64,
    pub detector_threshold: u64,
    /// A retrain fires after every this-many poisoning rounds.
    pub retrain_period: usize,
    /// Weight lambda on self-labeled accepted traffic; 0 disables tuning.
    pub self_training_weight: f64,
    /// Uniform sample count behind each drift measurement.
    #[serde(default = "default_drift_samples")]
    pub drift_samples: usize,
}

fn default_drift_samples() -> usize {
    2048
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub recon: ReconConfig,
    pub weaponization: WeaponizationConfig,
    pub exploitation: ExploitationConfig,
    pub installation: InstallationConfig,
    pub defender: DefenderConfig,
    /// Master seed; every phase derives its own stream from it.
    pub seed: u64,
    /// Accepted-query allowance on the oracle across the whole campaign;
    /// 0 means unlimited.
    #[serde(default)]
    pub oracle_budget: u64,
}

impl CampaignConfig {
    /// Shape and range checks against the target's dimensions.
    pub fn validate(&self, d: usize, c: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigInvalid(msg));
        let band = self.weaponization.boundary_band;
        if !(band > 0.0 && band < 0.5) {
            return fail(format!("boundary_band {band} outside (0, 0.5)"));
        }
        let lambda = self.defender.self_training_weight;
        if !(0.0..=1.0).contains(&lambda) {
            return fail(format!("self_training_weight {lambda} outside [0, 1]"));
        }
        if self.recon.probes_total == 0 {
            return fail("recon needs at least one probe to seed the surrogate".into());
        }
        if self.recon.window_ticks == 0 || self.recon.max_probes_per_window == 0 {
            return fail("recon pacing needs window_ticks >= 1 and a positive cap".into());
        }
        if !(self.recon.benign_jitter >= 0.0) || !self.recon.benign_jitter.is_finite() {
            return fail(format!(
                "benign_jitter {} must be finite and >= 0",
                self.recon.benign_jitter
            ));
        }
        if self.recon.benign_anchor.len() != d {
            return fail(format!(
                "benign_anchor has {} coordinates, target takes {d}",
                self.recon.benign_anchor.len()
            ));
        }
        if self.installation.x_star.len() != d {
            return fail(format!(
                "x_star has {} coordinates, target takes {d}",
                self.installation.x_star.len()
            ));
        }
        if self.weaponization.candidate_pool_size == 0 {
            return fail("candidate_pool_size must be >= 1".into());
        }
        if !(self.weaponization.reconcile_tol > 0.0) {
            return fail("reconcile_tol must be positive".into());
        }
        if self.defender.detector_window == 0 {
            return fail("detector_window must be >= 1".into());
        }
        if self.defender.retrain_period == 0 {
            return fail("retrain_period must be >= 1".into());
        }
        if self.defender.drift_samples == 0 {
            return fail("drift_samples must be >= 1".into());
        }
        match self.exploitation.attack {
            AttackKind::Blr => {
                if c != 2 {
                    return fail(format!("blr extraction needs a binary target, c = {c}"));
                }
                if self.exploitation.budget < d + 1 {
                    return fail(format!(
                        "blr extraction needs at least d+1 = {} queries",
                        d + 1
                    ));
                }
            }
            AttackKind::Mlr => {
                if c <= 2 {
                    return fail(format!("mlr extraction needs c > 2, target has c = {c}"));
                }
                if self.exploitation.budget == 0 {
                    return fail("extraction budget must be >= 1".into());
                }
            }
            AttackKind::Mlp => {
                if self.exploitation.budget == 0 {
                    return fail("extraction budget must be >= 1".into());
                }
                if self.exploitation.hidden_guess == 0 {
                    return fail("hidden_guess must be >= 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Kill-chain position, plus the two early-exit terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Recon,
    Weaponization,
    Delivery,
    Exploitation,
    Installation,
    CommandControl,
    Action,
    Detected,
    Exhausted,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Recon => "recon",
            Phase::Weaponization => "weaponization",
            Phase::Delivery => "delivery",
            Phase::Exploitation => "exploitation",
            Phase::Installation => "installation",
            Phase::CommandControl => "command_control",
            Phase::Action => "action",
            Phase::Detected => "detected",
            Phase::Exhausted => "exhausted",
        })
    }
}

/// Live campaign bookkeeping shared by the phase drivers.
#[derive(Debug)]
pub struct CampaignState {
    pub phase: Phase,
    /// Logical clock, mirrored from the oracle at phase boundaries.
    pub tick: u64,
    pub store: ProbeStore,
    pub clone: Option<ExtractionResult>,
    pub defender: DefenderState,
    pub alerts: Vec<AlertEvent>,
}

impl CampaignState {
    pub fn new(defender: DefenderState) -> Self {
        CampaignState {
            phase: Phase::Recon,
            tick: 0,
            store: ProbeStore::default(),
            clone: None,
            defender,
            alerts: Vec::new(),
        }
    }
}

/// Every derived stream, recorded so a report names its full seed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub master: u64,
    pub oracle: u64,
    pub recon: u64,
    pub weaponization: u64,
    pub exploitation: u64,
    pub installation: u64,
    pub fidelity: u64,
    pub drift: u64,
}

impl SeedSet {
    pub fn derive(master: u64) -> Self {
        SeedSet {
            master,
            oracle: sub_seed(master, 1),
            recon: sub_seed(master, 2),
            weaponization: sub_seed(master, 3),
            exploitation: sub_seed(master, 4),
            installation: sub_seed(master, 5),
            fidelity: sub_seed(master, 6),
            drift: sub_seed(master, 7),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignOutcome {
    /// The planted sample is classified benign by the final model.
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCount {
    pub phase: Phase,
    pub queries: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneFidelity {
    pub attack: AttackKind,
    pub queries_used: u64,
    pub r_test: f64,
    pub r_unif: f64,
}

/// Final artifact of a run. Everything in here is either an integer, an
/// exact fraction, or derived from seeded arithmetic, so equal configs
/// produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub final_phase: Phase,
    pub outcome: CampaignOutcome,
    /// One row per executed phase, in execution order.
    pub phases: Vec<PhaseCount>,
    /// Accepted queries over the whole run; equals the sum of the rows.
    pub total_queries: u64,
    pub ticks_elapsed: u64,
    pub alerts: Vec<AlertEvent>,
    pub clone_fidelity: Option<CloneFidelity>,
    /// Disagreement with the original model, one entry per retrain epoch,
    /// starting at 0 before any retrain.
    pub drift_trace: Vec<f64>,
    pub accepted_per_round: Vec<u64>,
    pub x_star_label_initial: usize,
    pub x_star_label_final: usize,
    pub seeds: SeedSet,
}

/// Ticks between consecutive attacker queries so that any window of
/// `window` ticks holds at most `cap` of them.
fn pace_gap(window: u64, cap: u64) -> u64 {
    window.div_ceil(cap)
}

fn jittered(anchor: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> FeatureVector {
    anchor
        .iter()
        .map(|&a| {
            let z: f64 = rng.sample(StandardNormal);
            (a + sigma * z).clamp(0.0, 1.0)
        })
        .collect()
}

/// Lay out the reconnaissance probes: evenly paced so no trailing window
/// of `window_ticks` ever holds more than the stealth cap, each input a
/// jittered copy of the benign anchor.
pub fn recon_probe_schedule(
    cfg: &ReconConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(u64, FeatureVector)>> {
    if cfg.probes_total == 0 {
        return Ok(Vec::new());
    }
    if cfg.max_probes_per_window == 0 {
        return Err(Error::InfeasibleSchedule(format!(
            "{} probes against a zero per-window cap",
            cfg.probes_total
        )));
    }
    if cfg.window_ticks == 0 {
        return Err(Error::InvalidArgument(
            "window_ticks must be >= 1".into(),
        ));
    }
    let gap = pace_gap(cfg.window_ticks, cfg.max_probes_per_window);
    Ok((0..cfg.probes_total)
        .map(|i| (i as u64 * gap, jittered(&cfg.benign_anchor, cfg.benign_jitter, rng)))
        .collect())
}

/// Generate up to `pool_size` candidate inputs predicted to sit within
/// `band` of confidence 0.5 — scored by the clone's top-class confidence
/// when a clone exists, by the surrogate's relational confidence
/// otherwise — and rank them the way select_candidate would pick them.
///
/// Drawing is rejection sampling with a capped attempt count, so a tight
/// band on a confident predictor can return fewer candidates than asked
/// for; an empty pool is not an error.
pub fn weaponize(
    store: &ProbeStore,
    clone: Option<&TargetModel>,
    band: f64,
    pool_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<FeatureVector>> {
    if !(band > 0.0 && band < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "boundary band {band} outside (0, 0.5)"
        )));
    }
    let d = match (clone, store.entries.first()) {
        (Some(m), _) => m.dim(),
        (None, Some(e)) => e.x.len(),
        (None, None) => return Err(Error::EmptyStore),
    };
    let mut pool: Vec<FeatureVector> = Vec::new();
    for _ in 0..WEAPONIZE_ATTEMPT_FACTOR * pool_size {
        if pool.len() == pool_size {
            break;
        }
        let x = uniform_point(rng, d);
        let score = match clone {
            Some(m) => m
                .predict_proba(&x)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
            None => surrogate_predict(store, &x)?.relational_conf,
        };
        if (score - 0.5).abs() < band {
            pool.push(x);
        }
    }
    if !store.is_empty() && pool.len() > 1 {
        let mut graded = pool
            .into_iter()
            .map(|x| Ok((surrogate_predict(store, &x)?.relational_conf, x)))
            .collect::<Result<Vec<(f64, FeatureVector)>>>()?;
        // stable descending sort: ties keep draw order, matching the
        // lowest-index rule of select_candidate
        graded.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        pool = graded.into_iter().map(|(_, x)| x).collect();
    }
    Ok(pool)
}

/// What one poisoning round did.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub injected: usize,
    pub accepted: usize,
    /// The retrained model, when this round landed on the schedule.
    pub snapshot: Option<TargetModel>,
    /// Drift against the original model, measured after the retrain.
    pub drift: Option<f64>,
}

/// One boiling-frog iteration: weaponize a fresh pool against the current
/// predictors, inject the best candidates, fold the ones the defender
/// calls benign into its accepted traffic, and retrain when the (1-based)
/// round lands on the retrain schedule.
///
/// The returned snapshot is not installed anywhere. Whatever serves the
/// defender's answers must be handed the new model by the caller; this
/// function sees the oracle only as a query surface.
pub fn poison_round<O: QueryOracle>(
    state: &mut CampaignState,
    oracle: &mut O,
    cfg: &CampaignConfig,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RoundOutcome> {
    if state.phase != Phase::Installation {
        return Err(Error::InvalidArgument(
            "poison rounds only run in the installation phase".into(),
        ));
    }
    if round == 0 {
        return Err(Error::InvalidArgument("rounds are counted from 1".into()));
    }
    if cfg.defender.retrain_period == 0 {
        return Err(Error::InvalidArgument("retrain_period must be >= 1".into()));
    }
    let clone_model = state.clone.as_ref().map(|r| r.clone.clone());
    let mut pool = weaponize(
        &state.store,
        clone_model.as_ref(),
        cfg.weaponization.boundary_band,
        cfg.weaponization.candidate_pool_size,
        rng,
    )?;
    let mut injected = 0usize;
    let mut accepted = 0usize;
    while injected < cfg.installation.injections_per_round && !pool.is_empty() {
        let idx = if state.store.is_empty() {
            0
        } else {
            select_candidate(&state.store, &pool)?.0
        };
        let x = pool.remove(idx);
        let resp = oracle.query(&x, ATTACKER_SOURCE)?;
        let label = resp.label().ok_or(Error::WrongMode)?;
        let conf = resp.confidences().ok_or(Error::WrongMode)?.to_vec();
        if state.store.is_empty() {
            surrogate_insert(&mut state.store, x.clone(), label, conf[label])?;
        } else {
            reconcile(
                &mut state.store,
                &x,
                label,
                &conf,
                cfg.weaponization.reconcile_tol,
            )?;
        }
        injected += 1;
        if label == BENIGN_CLASS {
            state.defender.accepted.push(x);
            accepted += 1;
        }
    }
    if round % cfg.defender.retrain_period == 0 {
        let traffic = state.defender.accepted.clone();
        let snapshot =
            defender_retrain(&mut state.defender, &traffic, cfg.defender.self_training_weight)?;
        let drift = boundary_drift(
            &state.defender.model,
            &state.defender.history[0],
            cfg.defender.drift_samples,
            SeedSet::derive(cfg.seed).drift,
        )?;
        Ok(RoundOutcome {
            injected,
            accepted,
            snapshot: Some(snapshot),
            drift: Some(drift),
        })
    } else {
        Ok(RoundOutcome {
            injected,
            accepted,
            snapshot: None,
            drift: None,
        })
    }
}

/// Meters the attacker's cadence. Every query lands `gap` ticks after the
/// previous one and flows through the live burst detector; once the
/// detector flags the tag, the next query is refused.
struct PacedOracle {
    inner: Oracle,
    gap: u64,
    detector: BurstDetector,
    alerts: Vec<AlertEvent>,
}

impl PacedOracle {
    fn flagged(&self) -> bool {
        !self.alerts.is_empty()
    }

    /// Detector and pacing bookkeeping for the record appended at `tick`.
    fn bookkeep(&mut self, tick: u64) {
        if let Some(a) = self.detector.observe(tick, ATTACKER_SOURCE) {
            self.alerts.push(a);
        }
        self.inner.advance_ticks(self.gap - 1);
    }
}

impl QueryOracle for PacedOracle {
    fn query(&mut self, x: &[f64], _source: &str) -> Result<OracleResponse> {
        if self.flagged() {
            return Err(Error::Detected);
        }
        let before = self.inner.tick();
        let resp = self.inner.query(x, ATTACKER_SOURCE);
        if self.inner.tick() > before {
            // the attempt was logged (even a budget rejection), so the
            // defender saw it and the cadence moves on
            self.bookkeep(before);
        }
        resp
    }

    fn query_partial(&mut self, px: &PartialFeatureVector, _source: &str) -> Result<OracleResponse> {
        if self.flagged() {
            return Err(Error::Detected);
        }
        let before = self.inner.tick();
        let resp = self.inner.query_partial(px, ATTACKER_SOURCE);
        if self.inner.tick() > before {
            self.bookkeep(before);
        }
        resp
    }

    fn accepted(&self) -> u64 {
        self.inner.accepted()
    }
}

fn confidences_of(resp: &OracleResponse) -> Result<(usize, Vec<f64>)> {
    let label = resp.label().ok_or(Error::WrongMode)?;
    let conf = resp.confidences().ok_or(Error::WrongMode)?.to_vec();
    Ok((label, conf))
}

fn run_recon(
    cfg: &CampaignConfig,
    seeds: &SeedSet,
    state: &mut CampaignState,
    paced: &mut PacedOracle,
) -> Result<()> {
    let mut r = rng(seeds.recon);
    for (tick, x) in recon_probe_schedule(&cfg.recon, &mut r)? {
        debug_assert_eq!(paced.inner.tick(), tick);
        let resp = paced.query(&x, ATTACKER_SOURCE)?;
        let (label, conf) = confidences_of(&resp)?;
        surrogate_insert(&mut state.store, x, label, conf[label])?;
    }
    Ok(())
}

fn run_delivery(
    cfg: &CampaignConfig,
    state: &mut CampaignState,
    paced: &mut PacedOracle,
    mut pool: Vec<FeatureVector>,
) -> Result<()> {
    if pool.is_empty() {
        // nothing survived the band; the chain moves on without a delivery
        return Ok(());
    }
    let (idx, _) = select_candidate(&state.store, &pool)?;
    let x = pool.remove(idx);
    let resp = paced.query(&x, ATTACKER_SOURCE)?;
    let (label, conf) = confidences_of(&resp)?;
    reconcile(
        &mut state.store,
        &x,
        label,
        &conf,
        cfg.weaponization.reconcile_tol,
    )?;
    Ok(())
}

fn run_exploitation(
    cfg: &CampaignConfig,
    seeds: &SeedSet,
    state: &mut CampaignState,
    paced: &mut PacedOracle,
) -> Result<()> {
    let d = state.defender.model.dim();
    let c = state.defender.model.class_count();
    // scoring against a snapshot is lab instrumentation: it shows up in
    // the report but costs no metered queries
    let eval = FidelityEval::vs_model(
        paced.inner.model(),
        state.defender.train.points.clone(),
        FIDELITY_UNIF,
        seeds.fidelity,
    );
    let budget = cfg.exploitation.budget;
    let result = match cfg.exploitation.attack {
        AttackKind::Blr => extract_blr(paced, d, budget, seeds.exploitation, &eval)?,
        AttackKind::Mlr => extract_mlr(
            paced,
            d,
            c,
            budget,
            &MlrHyper {
                seed: seeds.exploitation,
                ..MlrHyper::default()
            },
            &eval,
        )?,
        AttackKind::Mlp => extract_mlp(
            paced,
            d,
            c,
            cfg.exploitation.hidden_guess,
            budget,
            &MlpHyper {
                seed: seeds.exploitation,
                ..MlpHyper::default()
            },
            &eval,
        )?,
    };
    state.clone = Some(result);
    Ok(())
}

fn run_installation(
    cfg: &CampaignConfig,
    seeds: &SeedSet,
    state: &mut CampaignState,
    paced: &mut PacedOracle,
    drift_trace: &mut Vec<f64>,
    accepted_per_round: &mut Vec<u64>,
) -> Result<()> {
    let mut r = rng(seeds.installation);
    for round in 1..=cfg.installation.rounds {
        let out = poison_round(state, paced, cfg, round, &mut r)?;
        accepted_per_round.push(out.accepted as u64);
        if let Some(snapshot) = out.snapshot {
            paced.inner.replace_model(snapshot)?;
        }
        if let Some(dv) = out.drift {
            drift_trace.push(dv);
        }
        if paced.flagged() {
            return Err(Error::Detected);
        }
    }
    Ok(())
}

fn checkpoint(paced: &PacedOracle) -> Result<()> {
    if paced.flagged() {
        Err(Error::Detected)
    } else {
        Ok(())
    }
}

fn drive(
    cfg: &CampaignConfig,
    seeds: &SeedSet,
    state: &mut CampaignState,
    paced: &mut PacedOracle,
    phases: &mut Vec<PhaseCount>,
    drift_trace: &mut Vec<f64>,
    accepted_per_round: &mut Vec<u64>,
) -> Result<()> {
    state.phase = Phase::Recon;
    let before = paced.accepted();
    let outcome = run_recon(cfg, seeds, state, paced);
    phases.push(PhaseCount {
        phase: Phase::Recon,
        queries: paced.accepted() - before,
    });
    outcome?;
    checkpoint(paced)?;
    state.tick = paced.inner.tick();

    state.phase = Phase::Weaponization;
    let mut w_rng = rng(seeds.weaponization);
    let pool = weaponize(
        &state.store,
        None,
        cfg.weaponization.boundary_band,
        cfg.weaponization.candidate_pool_size,
        &mut w_rng,
    )?;
    phases.push(PhaseCount {
        phase: Phase::Weaponization,
        queries: 0,
    });

    state.phase = Phase::Delivery;
    let before = paced.accepted();
    let outcome = run_delivery(cfg, state, paced, pool);
    phases.push(PhaseCount {
        phase: Phase::Delivery,
        queries: paced.accepted() - before,
    });
    outcome?;
    checkpoint(paced)?;
    state.tick = paced.inner.tick();

    state.phase = Phase::Exploitation;
    let before = paced.accepted();
    let outcome = run_exploitation(cfg, seeds, state, paced);
    phases.push(PhaseCount {
        phase: Phase::Exploitation,
        queries: paced.accepted() - before,
    });
    outcome?;
    checkpoint(paced)?;
    state.tick = paced.inner.tick();

    state.phase = Phase::Installation;
    let before = paced.accepted();
    let outcome = run_installation(cfg, seeds, state, paced, drift_trace, accepted_per_round);
    phases.push(PhaseCount {
        phase: Phase::Installation,
        queries: paced.accepted() - before,
    });
    outcome?;
    checkpoint(paced)?;
    state.tick = paced.inner.tick();

    // terminal bookkeeping: command-and-control always follows a completed
    // installation; action is logged only if the planted sample now passes
    state.phase = Phase::CommandControl;
    phases.push(PhaseCount {
        phase: Phase::CommandControl,
        queries: 0,
    });
    if state.defender.model.predict_label(&cfg.installation.x_star)? == BENIGN_CLASS {
        state.phase = Phase::Action;
        phases.push(PhaseCount {
            phase: Phase::Action,
            queries: 0,
        });
    }
    Ok(())
}

/// Run the whole kill chain against a fresh oracle serving the defender's
/// model. Halts early with a Detected or Exhausted terminal phase when the
/// detector flags the attacker or the oracle budget runs dry; any other
/// error aborts the run.
pub fn run_campaign(cfg: &CampaignConfig, defender: DefenderState) -> Result<CampaignReport> {
    let d = defender.model.dim();
    let c = defender.model.class_count();
    cfg.validate(d, c)?;
    if defender.train.d != d || defender.train.c != c {
        return Err(Error::ConfigInvalid(
            "training data does not match the served model".into(),
        ));
    }
    let seeds = SeedSet::derive(cfg.seed);
    let x_star_label_initial = defender.model.predict_label(&cfg.installation.x_star)?;
    let oracle = make_oracle(
        defender.model.clone(),
        OracleConfig {
            mode: OracleMode::Confidence,
            budget: cfg.oracle_budget,
            noise_sigma: 0.0,
            confidence_decimals: -1,
            seed: seeds.oracle,
        },
    )?;
    let mut paced = PacedOracle {
        inner: oracle,
        gap: pace_gap(cfg.recon.window_ticks, cfg.recon.max_probes_per_window),
        detector: BurstDetector::new(
            cfg.defender.detector_window,
            cfg.defender.detector_threshold,
        )?,
        alerts: Vec::new(),
    };
    let mut state = CampaignState::new(defender);
    let mut phases: Vec<PhaseCount> = Vec::new();
    let mut drift_trace = vec![0.0];
    let mut accepted_per_round: Vec<u64> = Vec::new();

    let run = drive(
        cfg,
        &seeds,
        &mut state,
        &mut paced,
        &mut phases,
        &mut drift_trace,
        &mut accepted_per_round,
    );
    match run {
        Ok(()) => {}
        Err(Error::Detected) => {
            state.phase = Phase::Detected;
            phases.push(PhaseCount {
                phase: Phase::Detected,
                queries: 0,
            });
        }
        Err(Error::BudgetExhausted) => {
            state.phase = Phase::Exhausted;
            phases.push(PhaseCount {
                phase: Phase::Exhausted,
                queries: 0,
            });
        }
        Err(e) => return Err(e),
    }
    state.alerts = paced.alerts.clone();
    state.tick = paced.inner.tick();

    let x_star_label_final = state.defender.model.predict_label(&cfg.installation.x_star)?;
    let outcome = if state.phase == Phase::Action {
        CampaignOutcome::Success
    } else {
        CampaignOutcome::Failure
    };
    let total_queries = paced.inner.accepted();
    debug_assert_eq!(total_queries, phases.iter().map(|p| p.queries).sum::<u64>());
    Ok(CampaignReport {
        final_phase: state.phase,
        outcome,
        phases,
        total_queries,
        ticks_elapsed: paced.inner.tick(),
        alerts: state.alerts,
        clone_fidelity: state.clone.as_ref().map(|r| CloneFidelity {
            attack: cfg.exploitation.attack,
            queries_used: r.queries_used,
            r_test: r.r_test,
            r_unif: r.r_unif,
        }),
        drift_trace,
        accepted_per_round,
        x_star_label_initial,
        x_star_label_final,
        seeds,
    })
}

/// The reference desk-scale scenario: binary continuum traffic in four
/// dimensions, a logistic defender retraining every round at lambda 0.5,
/// a 200-query extraction, and a thirty-round installation. Returns the
/// config together with the matching defender.
pub fn golden_scenario() -> Result<(CampaignConfig, DefenderState)> {
    let continuum = gen_continuum(41, 80, 9, 4)?;
    let train = continuum.endpoints();
    let model = TargetModel::Blr(train_blr(&train, &BlrHyper::default())?);

    // the benign anchor is the centroid of the class-0 training points
    let mut anchor = vec![0.0; train.d];
    let mut n0 = 0usize;
    for (x, &y) in train.points.iter().zip(&train.labels) {
        if y == BENIGN_CLASS {
            for (a, v) in anchor.iter_mut().zip(x) {
                *a += v;
            }
            n0 += 1;
        }
    }
    for a in anchor.iter_mut() {
        *a /= n0 as f64;
    }

    // plant the most boundary-hugging variant the model still rejects
    let mut pick: Option<(f64, FeatureVector)> = None;
    for (_, v) in continuum.variants() {
        if model.predict_label(&v)? == BENIGN_CLASS {
            continue;
        }
        let p = model.predict_proba(&v)?[1];
        if pick.as_ref().map_or(true, |(best, _)| p < *best) {
            pick = Some((p, v));
        }
    }
    let (_, x_star) =
        pick.ok_or_else(|| Error::InvalidArgument("no malicious-side variant to plant".into()))?;

    let cfg = CampaignConfig {
        recon: ReconConfig {
            probes_total: 12,
            window_ticks: 16,
            max_probes_per_window: 4,
            benign_anchor: anchor,
            benign_jitter: 0.05,
        },
        weaponization: WeaponizationConfig {
            boundary_band: 0.15,
            candidate_pool_size: 24,
            reconcile_tol: DEFAULT_RECONCILE_TOL,
        },
        exploitation: ExploitationConfig {
            attack: AttackKind::Blr,
            budget: 200,
            hidden_guess: 8,
        },
        installation: InstallationConfig {
            rounds: 30,
            injections_per_round: 8,
            x_star,
        },
        defender: DefenderConfig {
            detector_window: 16,
            detector_threshold: 6,
            retrain_period: 1,
            self_training_weight: 0.5,
            drift_samples: 2048,
        },
        seed: 1817,
        oracle_budget: 0,
    };
    let defender = DefenderState::new(model, train, TrainerSpec::Blr(BlrHyper::default()));
    Ok((cfg, defender))
}
