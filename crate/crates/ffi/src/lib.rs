//! C interface to `irl-core`.
//!
//! Models and loss targets are opaque heap handles released with their
//! `_free` function. Every fallible call returns an [`IrlStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`irl_last_error_message`]. Output arrays are caller-allocated and their
//! lengths are checked.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use irl_core::env::{make_gridworld, make_sailing, Environment, GridworldSpec, SailingSpec};
use irl_core::expert::{policy_disagreement, sample_episodes, ExpertDataset, Trajectory};
use irl_core::gradient::{loss_gradient, LinearRewardModel, LossTarget};
use irl_core::harness::{evaluate_theta, expert_target};
use irl_core::io::load_environment;
use irl_core::mdp::{greedy_policy, value_iteration, SolverConfig};
use irl_core::optimizers::{train_irl, Method, OptimizerConfig};
use irl_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotConverged = 4,
    InvalidModel = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrlMethod {
    Plain = 0,
    Natural = 1,
    Rprop = 2,
}

/// A benchmark instance: model, features, ground truth.
pub struct IrlModel {
    env: Environment,
}

/// Expert policy with the state weights of the loss.
pub struct IrlTarget {
    target: LossTarget,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> IrlStatus {
    match err {
        Error::NotConverged { .. } => IrlStatus::NotConverged,
        Error::InvalidModel(_) | Error::SingularMatrix(_) => IrlStatus::InvalidModel,
        Error::DimensionMismatch(_) => IrlStatus::DimensionMismatch,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => IrlStatus::Io,
        _ => IrlStatus::InvalidArgument,
    }
}

struct Fail(IrlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(IrlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            IrlStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(model: *const IrlModel) -> Result<&'a IrlModel, Fail> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn target_ref<'a>(target: *const IrlTarget) -> Result<&'a IrlTarget, Fail> {
    target.as_ref().ok_or_else(|| null("target"))
}

unsafe fn slice_in<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn write_out(src: &[f64], out: *mut f64, len: usize, what: &str) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(IrlStatus::BufferTooSmall, format!("{what} needs {} entries, got {len}", src.len())));
    }
    if !src.is_empty() && out.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn check_theta(model: &IrlModel, theta: &[f64]) -> Result<(), Fail> {
    let d = model.env.features.dim();
    if theta.len() != d {
        return Err(Fail(IrlStatus::DimensionMismatch, format!("theta has length {}, model has {d} features", theta.len())));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn irl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn irl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file written by `irl gen-gridworld` or `irl gen-sailing`,
/// with its ground-truth sidecar.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_model_from_json(path: *const c_char, out: *mut *mut IrlModel) -> IrlStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(IrlStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let env = load_environment(Path::new(p))?;
        put(out, IrlModel { env })
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_model_gridworld(
    size: usize,
    n_features: usize,
    success_prob: f64,
    gamma: f64,
    seed: u64,
    out: *mut *mut IrlModel,
) -> IrlStatus {
    guard(|| {
        let env = make_gridworld(&GridworldSpec { size, n_features, success_prob, gamma, seed })?;
        put(out, IrlModel { env })
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_model_sailing(size: usize, p_stay: f64, gamma: f64, out: *mut *mut IrlModel) -> IrlStatus {
    guard(|| {
        let env = make_sailing(&SailingSpec { p_stay, gamma, ..SailingSpec::with_size(size) })?;
        put(out, IrlModel { env })
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irl_model_free(model: *mut IrlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; the outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn irl_model_dims(
    model: *const IrlModel,
    n_states: *mut usize,
    n_actions: *mut usize,
    n_features: *mut usize,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        if let Some(p) = n_states.as_mut() {
            *p = m.env.mdp.n_states();
        }
        if let Some(p) = n_actions.as_mut() {
            *p = m.env.mdp.n_actions();
        }
        if let Some(p) = n_features.as_mut() {
            *p = m.env.features.dim();
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn irl_model_theta_star(model: *const IrlModel, out: *mut f64, len: usize) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        write_out(&m.env.truth.theta_star, out, len, "theta_star")
    })
}

/// Optimal action values for the reward `θᵀφ`, row-major `[state][action]`.
///
/// # Safety
/// `theta` must hold `theta_len` doubles, `q_out` `q_len` doubles;
/// `iterations` may be null.
#[no_mangle]
pub unsafe extern "C" fn irl_model_solve(
    model: *const IrlModel,
    theta: *const f64,
    theta_len: usize,
    q_out: *mut f64,
    q_len: usize,
    iterations: *mut usize,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let th = slice_in(theta, theta_len, "theta")?;
        check_theta(m, th)?;
        let cfg = SolverConfig::default();
        let sol = value_iteration(&m.env.mdp, &m.env.features.dot(th), cfg.tol, cfg.max_iter)?;
        write_out(sol.value.values(), q_out, q_len, "q")?;
        if let Some(p) = iterations.as_mut() {
            *p = sol.iterations;
        }
        Ok(())
    })
}

/// Exact expert: the optimal policy weighted by its occupancy over
/// non-terminal states.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_target_exact(model: *const IrlModel, out: *mut *mut IrlTarget) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        put(out, IrlTarget { target: expert_target(&m.env)? })
    })
}

/// Empirical target from `episodes` sampled demonstrations of the optimal
/// policy.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_target_sampled(
    model: *const IrlModel,
    episodes: usize,
    horizon: usize,
    seed: u64,
    out: *mut *mut IrlTarget,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let env = &m.env;
        let trajs = sample_episodes(&env.mdp, &env.truth.optimal_policy, episodes, horizon, seed, Some(&env.terminal))?;
        let data = ExpertDataset::new(trajs, env.mdp.n_states(), env.mdp.n_actions())?;
        put(out, IrlTarget { target: data.target()? })
    })
}

/// Empirical target from caller-supplied demonstrations. Trajectory `i`
/// occupies the next `lengths[i]` entries of `states` and `actions`.
///
/// # Safety
/// `states` and `actions` must each hold the sum of `lengths` entries;
/// `lengths` must hold `n_trajectories` entries.
#[no_mangle]
pub unsafe extern "C" fn irl_target_from_trajectories(
    model: *const IrlModel,
    states: *const usize,
    actions: *const usize,
    lengths: *const usize,
    n_trajectories: usize,
    out: *mut *mut IrlTarget,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        if n_trajectories == 0 {
            return Err(Error::EmptyDataset.into());
        }
        if lengths.is_null() {
            return Err(null("lengths"));
        }
        let lens = std::slice::from_raw_parts(lengths, n_trajectories);
        let total: usize = lens.iter().sum();
        if total > 0 && (states.is_null() || actions.is_null()) {
            return Err(null("states or actions"));
        }
        let (xs, us) = if total == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(states, total), std::slice::from_raw_parts(actions, total))
        };
        let mut offset = 0;
        let trajs = lens
            .iter()
            .map(|&n| {
                let steps = xs[offset..offset + n].iter().copied().zip(us[offset..offset + n].iter().copied()).collect();
                offset += n;
                Trajectory { steps }
            })
            .collect();
        let data = ExpertDataset::new(trajs, m.env.mdp.n_states(), m.env.mdp.n_actions())?;
        put(out, IrlTarget { target: data.target()? })
    })
}

/// # Safety
/// `target` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irl_target_free(target: *mut IrlTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Loss of the Boltzmann policy for `θ` and its Euclidean and natural
/// gradients. Either gradient output may be null.
///
/// # Safety
/// `theta` must hold `len` doubles; non-null gradient outputs must hold `len`
/// doubles; `loss` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_loss_gradient(
    model: *const IrlModel,
    target: *const IrlTarget,
    theta: *const f64,
    len: usize,
    beta: f64,
    loss: *mut f64,
    gradient: *mut f64,
    natural_gradient: *mut f64,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let t = target_ref(target)?;
        let th = slice_in(theta, len, "theta")?;
        check_theta(m, th)?;
        let lm = LinearRewardModel::new(m.env.features.clone(), th.to_vec())?;
        let report = loss_gradient(&m.env.mdp, &lm, &t.target, beta)?;
        *loss.as_mut().ok_or_else(|| null("loss"))? = report.loss;
        if !gradient.is_null() {
            write_out(&report.euclid_grad, gradient, len, "gradient")?;
        }
        if !natural_gradient.is_null() {
            write_out(&report.natural_grad, natural_gradient, len, "natural_gradient")?;
        }
        Ok(())
    })
}

/// Trains from `theta` (updated in place) for `iters` steps. When `losses`
/// is non-null it receives the `iters + 1` recorded losses.
///
/// # Safety
/// `theta` must hold `len` doubles; `losses` must be null or hold
/// `losses_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn irl_train(
    model: *const IrlModel,
    target: *const IrlTarget,
    method: IrlMethod,
    step_size: f64,
    iters: usize,
    beta: f64,
    theta: *mut f64,
    len: usize,
    losses: *mut f64,
    losses_len: usize,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let t = target_ref(target)?;
        if theta.is_null() && len > 0 {
            return Err(null("theta"));
        }
        let th = slice_in(theta, len, "theta")?;
        check_theta(m, th)?;
        let method = match method {
            IrlMethod::Plain => Method::Plain,
            IrlMethod::Natural => Method::Natural,
            IrlMethod::Rprop => Method::Rprop,
        };
        let mut cfg = OptimizerConfig::new(method, step_size, iters, len);
        cfg.theta0 = th.to_vec();
        let trace = train_irl(&m.env.mdp, &m.env.features, &t.target, beta, &cfg)?;
        if !losses.is_null() {
            write_out(&trace.losses(), losses, losses_len, "losses")?;
        }
        ptr::copy_nonoverlapping(trace.final_theta.as_ptr(), theta, len);
        Ok(())
    })
}

/// Fraction of states where the greedy policy for `θ` differs from the
/// optimal one.
///
/// # Safety
/// `theta` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_policy_disagreement(
    model: *const IrlModel,
    theta: *const f64,
    len: usize,
    out: *mut f64,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let th = slice_in(theta, len, "theta")?;
        check_theta(m, th)?;
        let cfg = SolverConfig::default();
        let q = value_iteration(&m.env.mdp, &m.env.features.dot(th), cfg.tol, cfg.max_iter)?.value;
        let d = policy_disagreement(&greedy_policy(&q), &m.env.truth.optimal_policy)?;
        *out.as_mut().ok_or_else(|| null("out"))? = d;
        Ok(())
    })
}

/// Greedy and Boltzmann losses of the reward `θ` against the exact expert.
///
/// # Safety
/// `theta` must hold `len` doubles; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn irl_evaluate(
    model: *const IrlModel,
    theta: *const f64,
    len: usize,
    beta: f64,
    loss_greedy: *mut f64,
    loss_boltzmann: *mut f64,
) -> IrlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let th = slice_in(theta, len, "theta")?;
        check_theta(m, th)?;
        let target = expert_target(&m.env)?;
        let (eval, _) = evaluate_theta(&m.env, &m.env.features, th, &target, beta)?;
        *loss_greedy.as_mut().ok_or_else(|| null("loss_greedy"))? = eval.loss_greedy;
        *loss_boltzmann.as_mut().ok_or_else(|| null("loss_boltzmann"))? = eval.loss_boltzmann;
        Ok(())
    })
}
