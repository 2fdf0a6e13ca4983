use std::ffi::{CStr, CString};
use std::ptr;

use irl_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let needed = unsafe { irl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(needed >= 1);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn gridworld(seed: u64) -> *mut IrlModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { irl_model_gridworld(5, 3, 0.7, 0.9, seed, &mut m) }, IrlStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(irl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dims_and_theta_star() {
    let m = gridworld(1);
    let (mut ns, mut na, mut d) = (0, 0, 0);
    assert_eq!(unsafe { irl_model_dims(m, &mut ns, &mut na, &mut d) }, IrlStatus::Ok);
    assert_eq!((ns, na, d), (25, 4, 3));

    let mut theta = [0.0; 3];
    assert_eq!(unsafe { irl_model_theta_star(m, theta.as_mut_ptr(), 3) }, IrlStatus::Ok);
    assert!(theta.iter().all(|t| (-1.0..=1.0).contains(t)));

    let mut short = [0.0; 2];
    assert_eq!(unsafe { irl_model_theta_star(m, short.as_mut_ptr(), 2) }, IrlStatus::BufferTooSmall);
    assert!(last_error().contains("needs 3"));
    unsafe { irl_model_free(m) };
}

#[test]
fn null_handles_are_reported() {
    let mut d = 0;
    assert_eq!(unsafe { irl_model_dims(ptr::null(), ptr::null_mut(), ptr::null_mut(), &mut d) }, IrlStatus::NullPointer);
    assert!(last_error().contains("model is null"));
    assert_eq!(unsafe { irl_model_gridworld(5, 3, 0.7, 0.9, 0, ptr::null_mut()) }, IrlStatus::NullPointer);
    unsafe {
        irl_model_free(ptr::null_mut());
        irl_target_free(ptr::null_mut());
    }
}

#[test]
fn invalid_specs_fail_cleanly() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { irl_model_gridworld(1, 3, 0.7, 0.9, 0, &mut m) }, IrlStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("grid size"));
    assert_eq!(unsafe { irl_model_sailing(4, 1.5, 0.99, &mut m) }, IrlStatus::InvalidArgument);
    let missing = CString::new("/nonexistent/model.json").unwrap();
    assert_eq!(unsafe { irl_model_from_json(missing.as_ptr(), &mut m) }, IrlStatus::Io);
}

#[test]
fn solve_and_disagreement_at_truth() {
    let m = gridworld(2);
    let mut theta = [0.0; 3];
    unsafe { irl_model_theta_star(m, theta.as_mut_ptr(), 3) };
    let mut q = vec![0.0; 100];
    let mut iters = 0;
    assert_eq!(unsafe { irl_model_solve(m, theta.as_ptr(), 3, q.as_mut_ptr(), q.len(), &mut iters) }, IrlStatus::Ok);
    assert!(iters > 0 && q.iter().all(|v| v.is_finite()));

    let mut dis = -1.0;
    assert_eq!(unsafe { irl_policy_disagreement(m, theta.as_ptr(), 3, &mut dis) }, IrlStatus::Ok);
    assert_eq!(dis, 0.0);

    let (mut lg, mut lb) = (-1.0, -1.0);
    assert_eq!(unsafe { irl_evaluate(m, theta.as_ptr(), 3, 10.0, &mut lg, &mut lb) }, IrlStatus::Ok);
    assert_eq!(lg, 0.0);
    assert!(lb >= 0.0);

    assert_eq!(unsafe { irl_policy_disagreement(m, theta.as_ptr(), 2, &mut dis) }, IrlStatus::DimensionMismatch);
    unsafe { irl_model_free(m) };
}

#[test]
fn gradient_and_training() {
    let m = gridworld(3);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { irl_target_exact(m, &mut t) }, IrlStatus::Ok);

    let theta0 = [0.1, -0.2, 0.3];
    let (mut loss, mut g, mut ng) = (0.0, [0.0; 3], [0.0; 3]);
    let st = unsafe { irl_loss_gradient(m, t, theta0.as_ptr(), 3, 10.0, &mut loss, g.as_mut_ptr(), ng.as_mut_ptr()) };
    assert_eq!(st, IrlStatus::Ok);
    assert!(loss > 0.0 && g.iter().any(|v| *v != 0.0));

    let mut theta = theta0;
    let mut losses = vec![0.0; 21];
    let st = unsafe {
        irl_train(m, t, IrlMethod::Natural, 1.0, 20, 10.0, theta.as_mut_ptr(), 3, losses.as_mut_ptr(), losses.len())
    };
    assert_eq!(st, IrlStatus::Ok);
    assert_eq!(losses[0], loss);
    assert!(losses[20] < losses[0]);
    assert_ne!(theta, theta0);

    let mut small = [0.0; 5];
    let mut th = theta0;
    let st = unsafe { irl_train(m, t, IrlMethod::Rprop, 1.0, 20, 10.0, th.as_mut_ptr(), 3, small.as_mut_ptr(), 5) };
    assert_eq!(st, IrlStatus::BufferTooSmall);
    unsafe {
        irl_target_free(t);
        irl_model_free(m);
    }
}

#[test]
fn targets_from_samples_and_arrays_agree() {
    let m = gridworld(4);
    let mut sampled = ptr::null_mut();
    assert_eq!(unsafe { irl_target_sampled(m, 3, 10, 9, &mut sampled) }, IrlStatus::Ok);

    // A single state-action pair repeated: deterministic empirical policy.
    let states = [0usize, 0, 0];
    let actions = [2usize, 2, 2];
    let lengths = [2usize, 1];
    let mut given = ptr::null_mut();
    let st = unsafe { irl_target_from_trajectories(m, states.as_ptr(), actions.as_ptr(), lengths.as_ptr(), 2, &mut given) };
    assert_eq!(st, IrlStatus::Ok);

    let theta = [0.0; 3];
    let mut loss = 0.0;
    let st = unsafe { irl_loss_gradient(m, given, theta.as_ptr(), 3, 1.0, &mut loss, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, IrlStatus::Ok);
    // Uniform policy against a point mass on one of four actions.
    assert!((loss - 0.75).abs() < 1e-12);

    let bad = [99usize];
    let st = unsafe { irl_target_from_trajectories(m, bad.as_ptr(), bad.as_ptr(), [1usize].as_ptr(), 1, &mut given) };
    assert_eq!(st, IrlStatus::InvalidArgument);
    unsafe {
        irl_target_free(sampled);
        irl_target_free(given);
        irl_model_free(m);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/irl.h")).unwrap();
    for name in [
        "IRL_STATUS_OK",
        "typedef struct IrlModel IrlModel",
        "irl_model_gridworld",
        "irl_model_sailing",
        "irl_model_from_json",
        "irl_target_exact",
        "irl_loss_gradient",
        "irl_train",
        "irl_last_error_message",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
