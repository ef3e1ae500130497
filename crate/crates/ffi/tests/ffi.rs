//! Exercises the C entry points from Rust: handle lifecycle, error paths,
//! and a tiny end-to-end pipeline through the ABI.

use std::ffi::{CStr, CString};
use std::path::PathBuf;

use batchrl_ffi::*;

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("batchrl-ffi-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn write_tiny_config(dir: &PathBuf) -> CString {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        "seed = 3\nsubsteps = 5\n[train]\nepochs = 2\nepisodes = 20\n\
         [b2b]\nonline_epochs = 1\nonline_episodes = 2\n[eval]\nepisodes = 5\n",
    )
    .unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(brl_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn null_arguments_are_rejected_not_fatal() {
    unsafe {
        assert_eq!(
            brl_config_load(std::ptr::null(), std::ptr::null_mut()),
            BrlStatus::NullPointer
        );
        let mut out: *mut BrlConfig = std::ptr::null_mut();
        assert_eq!(brl_config_load(std::ptr::null(), &mut out), BrlStatus::NullPointer);
        assert_eq!(brl_run_pipeline(std::ptr::null(), std::ptr::null()), BrlStatus::NullPointer);
        brl_config_free(std::ptr::null_mut());
        brl_policy_free(std::ptr::null_mut());
        assert_eq!(brl_policy_n_actions(std::ptr::null()), 0);
    }
}

#[test]
fn missing_config_file_reports_a_config_error() {
    let path = CString::new("/nonexistent/batchrl.toml").unwrap();
    let mut out: *mut BrlConfig = std::ptr::null_mut();
    let status = unsafe { brl_config_load(path.as_ptr(), &mut out) };
    assert_eq!(status, BrlStatus::ConfigError);
    let msg = unsafe { CStr::from_ptr(brl_last_error()) };
    assert!(msg.to_str().unwrap().contains("cannot read config"));
}

#[test]
fn pipeline_policy_and_evaluation_round_trip() {
    let dir = tmp_dir("pipeline");
    let config_path = write_tiny_config(&dir);
    let run_dir = CString::new(dir.join("run").to_str().unwrap()).unwrap();
    unsafe {
        let mut config: *mut BrlConfig = std::ptr::null_mut();
        assert_eq!(brl_config_load(config_path.as_ptr(), &mut config), BrlStatus::Ok);
        assert_eq!(brl_config_set_seed(config, 3), BrlStatus::Ok);
        assert_eq!(brl_run_pipeline(config, run_dir.as_ptr()), BrlStatus::Ok);

        let ck = dir.join("run/checkpoints/final.txt");
        assert!(ck.exists());
        let ck_path = CString::new(ck.to_str().unwrap()).unwrap();
        let mut policy: *mut BrlPolicy = std::ptr::null_mut();
        assert_eq!(brl_policy_load(ck_path.as_ptr(), &mut policy), BrlStatus::Ok);
        assert_eq!(brl_policy_n_states(policy), 2);
        assert_eq!(brl_policy_n_actions(policy), 2);
        let hidden_len = brl_policy_hidden_len(policy);
        assert_eq!(hidden_len, 40);

        // One policy step through the ABI.
        let state = [1.0f64, 0.0];
        let prev = [0.0f64, 0.0];
        let mut hidden = vec![0.0f64; hidden_len];
        let mut mean = [0.0f64; 2];
        let mut std = [0.0f64; 2];
        assert_eq!(
            brl_policy_act(
                policy,
                state.as_ptr(),
                state.len(),
                prev.as_ptr(),
                prev.len(),
                hidden.as_mut_ptr(),
                hidden.len(),
                0.0,
                mean.as_mut_ptr(),
                std.as_mut_ptr(),
            ),
            BrlStatus::Ok
        );
        assert!(mean.iter().all(|m| (0.0..=5.0).contains(m)));
        assert!(std.iter().all(|s| *s > 0.0));
        assert!(hidden.iter().any(|h| *h != 0.0));

        // Wrong observation arity surfaces as a config error.
        assert_eq!(
            brl_policy_act(
                policy,
                state.as_ptr(),
                1,
                prev.as_ptr(),
                prev.len(),
                hidden.as_mut_ptr(),
                hidden.len(),
                0.0,
                mean.as_mut_ptr(),
                std.as_mut_ptr(),
            ),
            BrlStatus::ConfigError
        );

        let mut stats = BrlEvalStats {
            mean: 0.0,
            std: 0.0,
            p2: 0.0,
            p98: 0.0,
            episodes: 0,
        };
        assert_eq!(brl_evaluate(config, policy, 8, &mut stats), BrlStatus::Ok);
        assert_eq!(stats.episodes, 8);
        assert!(stats.p2 <= stats.mean && stats.mean <= stats.p98);

        brl_policy_free(policy);
        brl_config_free(config);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn generated_header_exists_and_names_the_api() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/batchrl.h");
    let text = std::fs::read_to_string(header).expect("cbindgen header generated at build time");
    for symbol in [
        "brl_version",
        "brl_config_load",
        "brl_run_pipeline",
        "brl_policy_act",
        "brl_evaluate",
        "brl_eval_stats",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}
