//! One policy-update step as four stages: rollout, reward, reference
//! log-probabilities and the gradient update.
//!
//! Serial mode chains all four. Overlapped mode runs reward and logps in
//! two lanes after rollout and joins them before grad, so the step takes
//! `t_rollout + max(t_reward, t_logps) + t_grad`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Rollout,
    Reward,
    Logps,
    Grad,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Rollout, Stage::Reward, Stage::Logps, Stage::Grad];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Rollout => "rollout",
            Stage::Reward => "reward",
            Stage::Logps => "logps",
            Stage::Grad => "grad",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Serial,
    Overlapped,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("duration of stage {stage} must be finite and non-negative, got {value}")]
    InvalidDuration { stage: Stage, value: f64 },
}

/// Stage durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub t_rollout: f64,
    pub t_reward: f64,
    pub t_logps: f64,
    pub t_grad: f64,
}

impl StagePlan {
    pub fn new(
        t_rollout: f64,
        t_reward: f64,
        t_logps: f64,
        t_grad: f64,
    ) -> Result<Self, PlanError> {
        let plan = StagePlan {
            t_rollout,
            t_reward,
            t_logps,
            t_grad,
        };
        for stage in Stage::ALL {
            let value = plan.duration(stage);
            if !(value.is_finite() && value >= 0.0) {
                return Err(PlanError::InvalidDuration { stage, value });
            }
        }
        Ok(plan)
    }

    pub fn duration(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Rollout => self.t_rollout,
            Stage::Reward => self.t_reward,
            Stage::Logps => self.t_logps,
            Stage::Grad => self.t_grad,
        }
    }

    /// Closed-form step time.
    pub fn predicted_total(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Serial => self.t_rollout + self.t_reward + self.t_logps + self.t_grad,
            Mode::Overlapped => self.t_rollout + self.t_reward.max(self.t_logps) + self.t_grad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "message")]
pub enum StageStatus {
    Completed,
    Failed(String),
    /// Stopped because a sibling stage failed.
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageWindow {
    pub stage: Stage,
    pub start: f64,
    pub end: f64,
    pub status: StageStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub mode: Mode,
    pub windows: Vec<StageWindow>,
    pub total: f64,
}

impl StepTrace {
    pub fn window(&self, stage: Stage) -> Option<&StageWindow> {
        self.windows.iter().find(|w| w.stage == stage)
    }

    /// Checks that every recorded window starts after its dependencies end.
    pub fn check_dependencies(&self) -> Result<(), String> {
        for w in &self.windows {
            if w.end < w.start {
                return Err(format!("{} ends before it starts", w.stage));
            }
            for dep in dependencies(w.stage, self.mode) {
                match self.window(*dep) {
                    Some(d) if d.end <= w.start => {}
                    Some(d) => {
                        return Err(format!(
                            "{} starts at {} before {} ends at {}",
                            w.stage, w.start, d.stage, d.end
                        ))
                    }
                    None => return Err(format!("{} ran without {}", w.stage, dep)),
                }
            }
        }
        Ok(())
    }
}

fn dependencies(stage: Stage, mode: Mode) -> &'static [Stage] {
    match (mode, stage) {
        (_, Stage::Rollout) => &[],
        (_, Stage::Reward) => &[Stage::Rollout],
        (Mode::Serial, Stage::Logps) => &[Stage::Reward],
        (Mode::Overlapped, Stage::Logps) => &[Stage::Rollout],
        (Mode::Serial, Stage::Grad) => &[Stage::Logps],
        (Mode::Overlapped, Stage::Grad) => &[Stage::Reward, Stage::Logps],
    }
}

#[derive(Clone, Copy)]
struct Time(f64);

impl PartialEq for Time {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Discrete-event simulation of the stage graph with one lane per ready
/// stage.
pub fn simulate_step(plan: &StagePlan, mode: Mode) -> StepTrace {
    let mut start: [Option<f64>; 4] = [None; 4];
    let mut end: [Option<f64>; 4] = [None; 4];
    let idx = |s: Stage| s as usize;
    let mut events: BinaryHeap<Reverse<(Time, Stage)>> = BinaryHeap::new();

    let launch = |now: f64,
                  start: &mut [Option<f64>; 4],
                  end: &[Option<f64>; 4],
                  events: &mut BinaryHeap<Reverse<(Time, Stage)>>| {
        for stage in Stage::ALL {
            if start[idx(stage)].is_some() {
                continue;
            }
            let deps = dependencies(stage, mode);
            if deps.iter().all(|d| end[idx(*d)].is_some()) {
                let t = deps
                    .iter()
                    .map(|d| end[idx(*d)].unwrap())
                    .fold(now, f64::max);
                start[idx(stage)] = Some(t);
                events.push(Reverse((Time(t + plan.duration(stage)), stage)));
            }
        }
    };

    launch(0.0, &mut start, &end, &mut events);
    while let Some(Reverse((Time(t), stage))) = events.pop() {
        end[idx(stage)] = Some(t);
        launch(t, &mut start, &end, &mut events);
    }

    let windows: Vec<StageWindow> = Stage::ALL
        .iter()
        .map(|&s| StageWindow {
            stage: s,
            start: start[idx(s)].unwrap_or(0.0),
            end: end[idx(s)].unwrap_or(0.0),
            status: StageStatus::Completed,
        })
        .collect();
    let total = windows.iter().map(|w| w.end).fold(0.0, f64::max);
    StepTrace {
        mode,
        windows,
        total,
    }
}

/// Simulated step.
pub fn run_step(plan: &StagePlan, mode: Mode) -> StepTrace {
    simulate_step(plan, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub plan: StagePlan,
    pub serial_predicted: f64,
    pub serial_measured: f64,
    pub overlapped_predicted: f64,
    pub overlapped_measured: f64,
    pub speedup: f64,
}

pub fn simulate_schedule(plans: &[StagePlan]) -> Vec<ScheduleRow> {
    plans
        .iter()
        .map(|p| {
            let serial_measured = simulate_step(p, Mode::Serial).total;
            let overlapped_measured = simulate_step(p, Mode::Overlapped).total;
            let speedup = if overlapped_measured > 0.0 {
                serial_measured / overlapped_measured
            } else {
                1.0
            };
            ScheduleRow {
                plan: *p,
                serial_predicted: p.predicted_total(Mode::Serial),
                serial_measured,
                overlapped_predicted: p.predicted_total(Mode::Overlapped),
                overlapped_measured,
                speedup,
            }
        })
        .collect()
}

pub const SCHEDULE_CSV_HEADER: &str = "plan,t_rollout,t_reward,t_logps,t_grad,serial_predicted,serial_measured,overlapped_predicted,overlapped_measured,speedup";

pub fn schedule_csv(rows: &[ScheduleRow]) -> String {
    let mut out = String::from(SCHEDULE_CSV_HEADER);
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let p = &r.plan;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.6}\n",
            i,
            p.t_rollout,
            p.t_reward,
            p.t_logps,
            p.t_grad,
            r.serial_predicted,
            r.serial_measured,
            r.overlapped_predicted,
            r.overlapped_measured,
            r.speedup
        ));
    }
    out
}

/// Shared cancellation flag for the stages of one live step.
#[derive(Debug, Clone, Default)]
pub struct CancelToken {
    flag: Arc<AtomicBool>,
    origin: Arc<Mutex<Option<Stage>>>,
}

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_cancelled(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    /// Cancels on behalf of `stage`; the first caller is recorded.
    pub fn cancel(&self, stage: Stage) {
        let mut origin = self.origin.lock().unwrap();
        if origin.is_none() {
            *origin = Some(stage);
        }
        self.flag.store(true, Ordering::SeqCst);
    }

    pub fn cancelled_by(&self) -> Option<Stage> {
        *self.origin.lock().unwrap()
    }
}

pub type StageFn = Box<dyn FnOnce(&CancelToken) -> Result<(), String> + Send>;

pub struct LivePlan {
    pub rollout: StageFn,
    pub reward: StageFn,
    pub logps: StageFn,
    pub grad: StageFn,
}

impl LivePlan {
    /// Sleep-backed stages with the durations of `plan`.
    pub fn sleeping(plan: &StagePlan) -> Self {
        LivePlan {
            rollout: sleep_stage(Duration::from_secs_f64(plan.t_rollout)),
            reward: sleep_stage(Duration::from_secs_f64(plan.t_reward)),
            logps: sleep_stage(Duration::from_secs_f64(plan.t_logps)),
            grad: sleep_stage(Duration::from_secs_f64(plan.t_grad)),
        }
    }
}

const POLL: Duration = Duration::from_millis(2);

/// Sleeps for `d`, returning early with an error once cancelled.
pub fn sleep_stage(d: Duration) -> StageFn {
    Box::new(move |token: &CancelToken| {
        let deadline = Instant::now() + d;
        loop {
            if token.is_cancelled() {
                return Err("cancelled".into());
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(());
            }
            thread::sleep(POLL.min(deadline - now));
        }
    })
}

/// Sleeps for `d` and then fails with `message`.
pub fn failing_stage(d: Duration, message: &str) -> StageFn {
    let message = message.to_owned();
    Box::new(move |token: &CancelToken| {
        sleep_stage(d)(token)?;
        Err(message)
    })
}

#[derive(Debug, Error)]
#[error("stage {stage} failed: {message}")]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
    pub trace: StepTrace,
}

struct Clock(Instant);

impl Clock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn run_one(stage: Stage, f: StageFn, token: &CancelToken, clock: &Clock) -> StageWindow {
    let start = clock.now();
    let result = f(token);
    let end = clock.now();
    let status = match result {
        Ok(()) => StageStatus::Completed,
        Err(msg) => {
            token.cancel(stage);
            if token.cancelled_by() == Some(stage) {
                StageStatus::Failed(msg)
            } else {
                StageStatus::Cancelled
            }
        }
    };
    StageWindow {
        stage,
        start,
        end,
        status,
    }
}

/// Runs real stage callables. The first failing stage cancels its sibling
/// and the error carries the trace recorded so far.
pub fn run_step_live(plan: LivePlan, mode: Mode) -> Result<StepTrace, StageFailure> {
    let clock = Clock(Instant::now());
    let token = CancelToken::new();
    let mut windows = Vec::with_capacity(4);
    let LivePlan {
        rollout,
        reward,
        logps,
        grad,
    } = plan;

    let finish = |windows: Vec<StageWindow>, clock: &Clock| {
        let trace = StepTrace {
            mode,
            windows,
            total: clock.now(),
        };
        match trace.windows.iter().find_map(|w| match &w.status {
            StageStatus::Failed(m) => Some((w.stage, m.clone())),
            _ => None,
        }) {
            Some((stage, message)) => Err(StageFailure {
                stage,
                message,
                trace,
            }),
            None => Ok(trace),
        }
    };

    windows.push(run_one(Stage::Rollout, rollout, &token, &clock));
    if token.is_cancelled() {
        return finish(windows, &clock);
    }

    match mode {
        Mode::Serial => {
            for (stage, f) in [(Stage::Reward, reward), (Stage::Logps, logps)] {
                windows.push(run_one(stage, f, &token, &clock));
                if token.is_cancelled() {
                    return finish(windows, &clock);
                }
            }
        }
        Mode::Overlapped => {
            let (reward_w, logps_w) = thread::scope(|s| {
                let handle = s.spawn(|| run_one(Stage::Reward, reward, &token, &clock));
                let logps_w = run_one(Stage::Logps, logps, &token, &clock);
                let reward_w = handle.join().unwrap_or_else(|_| {
                    token.cancel(Stage::Reward);
                    StageWindow {
                        stage: Stage::Reward,
                        start: logps_w.start,
                        end: clock.now(),
                        status: StageStatus::Failed("stage panicked".into()),
                    }
                });
                (reward_w, logps_w)
            });
            windows.push(reward_w);
            windows.push(logps_w);
            if token.is_cancelled() {
                return finish(windows, &clock);
            }
        }
    }

    windows.push(run_one(Stage::Grad, grad, &token, &clock));
    finish(windows, &clock)
}
