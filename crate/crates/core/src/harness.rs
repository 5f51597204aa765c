//! Simulated replication of the study protocol: numpad and slider tasks at
//! several ranges, each performed with the filter on and off by the same
//! simulated participant, with counterbalanced arm order.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::OneEuroParams;
use crate::geometry::{ButtonLabel, NumpadLayout, PanelPoint, Rect, SliderLayout, UiPanel};
use crate::pointing::{EventKind, MotionTrace, PointingSim, UserModel};
use crate::tremor::TremorProfile;

pub const NUMPAD_DIGITS: usize = 4;
pub const SLIDER_MIN_TARGET: u32 = 20;
pub const SLIDER_MAX_TARGET: u32 = 100;
pub const DEFAULT_RANGES_M: [f64; 3] = [1.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Numpad,
    Slider,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::Numpad, TaskKind::Slider];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Numpad => "numpad",
            TaskKind::Slider => "slider",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "numpad" => Ok(TaskKind::Numpad),
            "slider" => Ok(TaskKind::Slider),
            other => Err(format!("unknown task kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskSpec {
    Numpad { digits: [u8; NUMPAD_DIGITS] },
    Slider { target_value: u32 },
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Numpad { .. } => TaskKind::Numpad,
            TaskSpec::Slider { .. } => TaskKind::Slider,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TaskSpec::Numpad { digits } if digits.iter().any(|&d| d > 9) => {
                Err(Error::InvalidTask(format!("numpad digits must be 0-9, got {digits:?}")))
            }
            TaskSpec::Slider { target_value }
                if !(SLIDER_MIN_TARGET..=SLIDER_MAX_TARGET).contains(&target_value) =>
            {
                Err(Error::InvalidTask(format!(
                    "slider target must lie in [{SLIDER_MIN_TARGET}, {SLIDER_MAX_TARGET}], got {target_value}"
                )))
            }
            _ => Ok(()),
        }
    }
}

pub fn gen_numpad_task(seed: u64) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut digits = [0u8; NUMPAD_DIGITS];
    for d in &mut digits {
        *d = rng.random_range(0..=9);
    }
    TaskSpec::Numpad { digits }
}

pub fn gen_slider_task(seed: u64) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TaskSpec::Slider {
        target_value: rng.random_range(SLIDER_MIN_TARGET..=SLIDER_MAX_TARGET),
    }
}

pub fn gen_task(kind: TaskKind, seed: u64) -> TaskSpec {
    match kind {
        TaskKind::Numpad => gen_numpad_task(seed),
        TaskKind::Slider => gen_slider_task(seed),
    }
}

/// Mixes a list of words into one seed (SplitMix64 finaliser per word).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Fixed scene furniture shared by every trial.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Panel holding the start/stop button, always at 1 m.
    pub control_panel: UiPanel,
    pub start_button: Rect,
    pub numpad: NumpadLayout,
    pub slider: SliderLayout,
    pub task_panel_size_m: (f64, f64),
    /// Where the ray points before the trial begins.
    pub rest_aim_deg: (f64, f64),
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            control_panel: UiPanel {
                distance_m: 1.0,
                width_m: 1.0,
                height_m: 0.8,
            },
            start_button: Rect::centered(PanelPoint::new(-0.3, -0.2), 0.12, 0.12),
            numpad: NumpadLayout::default(),
            slider: SliderLayout::default(),
            task_panel_size_m: (1.4, 0.8),
            rest_aim_deg: (0.0, -15.0),
        }
    }
}

impl Scene {
    pub fn task_panel(&self, range_m: f64) -> Result<UiPanel> {
        UiPanel::new(range_m, self.task_panel_size_m.0, self.task_panel_size_m.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub range_m: f64,
    pub filter_on: bool,
    /// Seeds the tremor stream; overrides `profile.seed`.
    pub seed: u64,
    pub profile: TremorProfile,
    pub model: UserModel,
    pub filter_params: OneEuroParams,
    pub timeout_s: f64,
    /// Keep per-sample poses in the result, not only events.
    #[serde(skip)]
    pub keep_samples: bool,
}

pub const DEFAULT_TIMEOUT_S: f64 = 120.0;

impl TrialConfig {
    pub fn new(range_m: f64, filter_on: bool, seed: u64) -> Self {
        Self {
            range_m,
            filter_on,
            seed,
            profile: TremorProfile::default(),
            model: UserModel::default(),
            filter_params: OneEuroParams::default(),
            timeout_s: DEFAULT_TIMEOUT_S,
            keep_samples: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_m.is_finite() && self.range_m > 0.0) {
            return Err(Error::invalid("range_m", "must be finite and > 0"));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(Error::invalid("timeout_s", "must be finite and > 0"));
        }
        self.model.validate_with(&self.profile)?;
        self.filter_params.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub task: TaskSpec,
    pub config: TrialConfig,
    /// Start click to stop click, or `timeout_s` when timed out.
    pub completion_s: f64,
    /// Presses of a button other than the intended one, plus slider
    /// releases at a wrong value.
    pub error_count: u32,
    pub timed_out: bool,
    pub trace: MotionTrace,
}

struct TimedOut;

/// Runs one trial: start button, the task itself, stop button.
pub fn run_trial(task: &TaskSpec, config: &TrialConfig) -> Result<TrialResult> {
    run_trial_in(&Scene::default(), task, config)
}

pub fn run_trial_in(scene: &Scene, task: &TaskSpec, config: &TrialConfig) -> Result<TrialResult> {
    task.validate()?;
    config.validate()?;
    let profile = config.profile.with_seed(config.seed);
    let mut sim = PointingSim::new(
        &profile,
        &config.model,
        &config.filter_params,
        config.filter_on,
        scene.rest_aim_deg,
    )?;
    if !config.keep_samples {
        sim = sim.events_only();
    }
    let task_panel = scene.task_panel(config.range_m)?;

    let mut errors = 0u32;
    let outcome = (|| -> Result<std::result::Result<f64, TimedOut>> {
        let Some(t_start) = press_control(scene, &mut sim, "start", config.timeout_s)? else {
            return Ok(Err(TimedOut));
        };
        let deadline = t_start + config.timeout_s;
        let done = match *task {
            TaskSpec::Numpad { digits } => {
                enter_digits(scene, &mut sim, &task_panel, &digits, deadline, &mut errors)?
            }
            TaskSpec::Slider { target_value } => set_slider(
                scene,
                &mut sim,
                &task_panel,
                target_value,
                deadline,
                &mut errors,
            )?,
        };
        if !done {
            return Ok(Err(TimedOut));
        }
        match press_control(scene, &mut sim, "stop", deadline)? {
            Some(t_stop) => Ok(Ok(t_stop - t_start)),
            None => Ok(Err(TimedOut)),
        }
    })()?;

    let (completion_s, timed_out) = match outcome {
        Ok(c) => (c, false),
        Err(TimedOut) => {
            let t = sim.time();
            sim.mark_timed_out(t);
            (config.timeout_s, true)
        }
    };
    Ok(TrialResult {
        task: *task,
        config: *config,
        completion_s,
        error_count: errors,
        timed_out,
        trace: sim.into_trace(),
    })
}

/// Clicks the start/stop button until a click lands on it. Returns the
/// click time.
fn press_control(
    scene: &Scene,
    sim: &mut PointingSim,
    label: &str,
    deadline: f64,
) -> Result<Option<f64>> {
    let panel = &scene.control_panel;
    let button = &scene.start_button;
    loop {
        let Some(click) = sim.acquire(panel, button, deadline)? else {
            return Ok(None);
        };
        if click.hit.is_some_and(|h| button.contains(h)) {
            sim.record(click.t, EventKind::Click, label);
            return Ok(Some(click.t));
        }
        sim.record(click.t, EventKind::Click, "miss");
    }
}

/// Enters `digits`, correcting wrong presses with backspace. Returns false
/// on timeout.
fn enter_digits(
    scene: &Scene,
    sim: &mut PointingSim,
    panel: &UiPanel,
    digits: &[u8],
    deadline: f64,
    errors: &mut u32,
) -> Result<bool> {
    let pad = &scene.numpad;
    let mut entered: Vec<u8> = Vec::with_capacity(digits.len() + 4);
    while entered.as_slice() != digits {
        let intended = if digits.starts_with(&entered) {
            ButtonLabel::Digit(digits[entered.len()])
        } else {
            ButtonLabel::Backspace
        };
        let rect = pad.rect_of(intended).expect("layout has every label");
        let Some(click) = sim.acquire(panel, &rect, deadline)? else {
            return Ok(false);
        };
        let Some(pressed) = click.hit.and_then(|h| pad.button_at(h)) else {
            sim.record(click.t, EventKind::Click, "miss");
            continue;
        };
        if pressed != intended {
            *errors += 1;
        }
        match pressed {
            ButtonLabel::Digit(d) => entered.push(d),
            ButtonLabel::Backspace => {
                entered.pop();
            }
            ButtonLabel::Enter => {}
        }
        sim.record(click.t, EventKind::Click, pressed.to_string());
    }
    Ok(true)
}

/// Grabs the handle, drags to `target`, releases; re-grabs after a wrong
/// release. Returns false on timeout.
fn set_slider(
    scene: &Scene,
    sim: &mut PointingSim,
    panel: &UiPanel,
    target: u32,
    deadline: f64,
    errors: &mut u32,
) -> Result<bool> {
    let slider = &scene.slider;
    let mut value = 0u32;
    loop {
        let handle = slider.handle_rect(value);
        let Some(click) = sim.acquire(panel, &handle, deadline)? else {
            return Ok(false);
        };
        if !click.hit.is_some_and(|h| handle.contains(h)) {
            sim.record(click.t, EventKind::Click, "miss");
            continue;
        }
        sim.record(click.t, EventKind::Grab, format!("value={value}"));
        let Some(release) = sim.drag_to_value(panel, slider, target, deadline)? else {
            return Ok(false);
        };
        value = release.value;
        sim.record(release.t, EventKind::Release, format!("value={value}"));
        if value == target {
            return Ok(true);
        }
        *errors += 1;
    }
}

/// Study plan: every participant does every (kind, range) cell once per
/// filter arm, all cells of one arm before the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionPlan {
    pub participant_count: u32,
    pub seed_root: u64,
    pub ranges_m: Vec<f64>,
    pub kinds: Vec<TaskKind>,
    pub profile: TremorProfile,
    pub model: UserModel,
    pub filter_params: OneEuroParams,
    pub timeout_s: f64,
}

impl Default for SessionPlan {
    fn default() -> Self {
        Self {
            participant_count: 30,
            seed_root: 0,
            ranges_m: DEFAULT_RANGES_M.to_vec(),
            kinds: TaskKind::ALL.to_vec(),
            profile: TremorProfile::default(),
            model: UserModel::default(),
            filter_params: OneEuroParams::default(),
            timeout_s: DEFAULT_TIMEOUT_S,
        }
    }
}

/// One scheduled trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledTrial {
    pub participant: u32,
    /// Position in the participant's running order.
    pub order: usize,
    pub kind: TaskKind,
    pub range_m: f64,
    pub filter_on: bool,
    pub task: TaskSpec,
    pub seed: u64,
}

const TASK_STREAM: u64 = 0x7461_736b;
const TREMOR_STREAM: u64 = 0x7472_656d;
const ARM_STREAM: u64 = 0x6172_6d73;

impl SessionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.participant_count == 0 {
            return Err(Error::invalid("participant_count", "must be >= 1"));
        }
        if self.ranges_m.is_empty() || self.ranges_m.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid(
                "ranges_m",
                "must be a non-empty list of positive distances",
            ));
        }
        if self.kinds.is_empty() {
            return Err(Error::invalid("kinds", "must not be empty"));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(Error::invalid("timeout_s", "must be finite and > 0"));
        }
        self.model.validate_with(&self.profile)?;
        self.filter_params.validate()
    }

    /// Whether `participant` starts with the filter on (a fair coin per
    /// participant).
    pub fn filter_first(&self, participant: u32) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            self.seed_root,
            ARM_STREAM,
            participant as u64,
        ]));
        rng.random_bool(0.5)
    }

    fn cell_seed(&self, participant: u32, kind: TaskKind, range_index: usize) -> u64 {
        derive_seed(&[
            self.seed_root,
            participant as u64,
            kind as u64,
            range_index as u64,
        ])
    }

    pub fn schedule(&self) -> Vec<ScheduledTrial> {
        let mut out = Vec::new();
        for participant in 0..self.participant_count {
            let first = self.filter_first(participant);
            let mut order = 0;
            for filter_on in [first, !first] {
                for &kind in &self.kinds {
                    for (ri, &range_m) in self.ranges_m.iter().enumerate() {
                        let cell = self.cell_seed(participant, kind, ri);
                        out.push(ScheduledTrial {
                            participant,
                            order,
                            kind,
                            range_m,
                            filter_on,
                            task: gen_task(kind, derive_seed(&[cell, TASK_STREAM])),
                            seed: derive_seed(&[cell, TREMOR_STREAM]),
                        });
                        order += 1;
                    }
                }
            }
        }
        out
    }

    pub fn trial_config(&self, trial: &ScheduledTrial) -> TrialConfig {
        TrialConfig {
            range_m: trial.range_m,
            filter_on: trial.filter_on,
            seed: trial.seed,
            profile: self.profile,
            model: self.model,
            filter_params: self.filter_params,
            timeout_s: self.timeout_s,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub participant: u32,
    pub order: usize,
    pub result: TrialResult,
}

impl SessionRow {
    pub fn kind(&self) -> TaskKind {
        self.result.task.kind()
    }

    pub fn range_m(&self) -> f64 {
        self.result.config.range_m
    }

    pub fn filter_on(&self) -> bool {
        self.result.config.filter_on
    }
}

/// Runs every scheduled trial (in parallel) and returns rows ordered by
/// participant, kind, range and arm (off before on).
pub fn run_session(plan: &SessionPlan) -> Result<Vec<SessionRow>> {
    run_session_with(plan, false)
}

pub fn run_session_with(plan: &SessionPlan, keep_samples: bool) -> Result<Vec<SessionRow>> {
    plan.validate()?;
    let schedule = plan.schedule();
    let mut rows = schedule
        .par_iter()
        .map(|trial| {
            let config = TrialConfig {
                keep_samples,
                ..plan.trial_config(trial)
            };
            run_trial(&trial.task, &config).map(|result| SessionRow {
                participant: trial.participant,
                order: trial.order,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        (a.participant, a.kind())
            .cmp(&(b.participant, b.kind()))
            .then(a.range_m().total_cmp(&b.range_m()))
            .then(a.filter_on().cmp(&b.filter_on()))
    });
    Ok(rows)
}
