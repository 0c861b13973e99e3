use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use clustopt_ffi::*;

fn last_error() -> String {
    let p = clustopt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn run(alg: &str, seed: u64) -> *mut ClustoptTrajectories {
    let (a, f) = (CString::new(alg).unwrap(), CString::new("sphere").unwrap());
    let mut out = ptr::null_mut();
    let st = unsafe { clustopt_run_algorithm(a.as_ptr(), f.as_ptr(), 2, 1, 10, 8, seed, &mut out) };
    assert_eq!(st, ClustoptStatus::Ok, "{}", last_error());
    out
}

#[test]
fn end_to_end_through_handles() {
    unsafe {
        let set = run("de_rand_1_bin", 0);
        for (alg, seed) in [("de_rand_1_bin", 1), ("woa", 0), ("woa", 1)] {
            let extra = run(alg, seed);
            assert_eq!(clustopt_trajectories_append(set, extra), ClustoptStatus::Ok);
            clustopt_trajectories_free(extra);
        }
        assert_eq!(clustopt_trajectories_len(set), 4);

        let (mut b, mut s, mut d) = (0, 0, 0);
        assert_eq!(clustopt_trajectory_shape(set, 2, &mut b, &mut s, &mut d), ClustoptStatus::Ok);
        assert_eq!((b, s, d), (8, 10, 2));
        let (mut data, mut len) = (ptr::null(), 0);
        assert_eq!(clustopt_trajectory_data(set, 0, &mut data, &mut len), ClustoptStatus::Ok);
        assert_eq!(len, 8 * 10 * 2);
        let first = std::slice::from_raw_parts(data, len).to_vec();

        let mut model = ptr::null_mut();
        assert_eq!(clustopt_model_fit(set, 4, 0, 0, 3, &mut model), ClustoptStatus::Ok, "{}", last_error());
        assert_eq!(clustopt_model_num_clusters(model), 4);
        assert_eq!(clustopt_model_dimension(model), 2);
        let mut centroids = vec![0.0; 8];
        assert_eq!(clustopt_model_centroids(model, centroids.as_mut_ptr(), 8), ClustoptStatus::Ok);
        assert_eq!(clustopt_model_centroids(model, centroids.as_mut_ptr(), 7), ClustoptStatus::InvalidArgument);

        let mut labels = vec![usize::MAX; 4];
        assert_eq!(clustopt_model_assign(model, centroids.as_ptr(), 4, 2, labels.as_mut_ptr()), ClustoptStatus::Ok);
        labels.sort();
        assert_eq!(labels, [0, 1, 2, 3]);

        let mut reps = Vec::new();
        for i in 0..4 {
            let mut r = ptr::null_mut();
            assert_eq!(clustopt_representation_build(set, i, model, &mut r), ClustoptStatus::Ok);
            reps.push(r);
        }
        let (mut iters, mut k) = (0, 0);
        assert_eq!(clustopt_representation_shape(reps[0], &mut iters, &mut k), ClustoptStatus::Ok);
        assert_eq!((iters, k), (8, 4));
        let mut counts = vec![0u32; 32];
        assert_eq!(clustopt_representation_counts(reps[0], counts.as_mut_ptr(), 32), ClustoptStatus::Ok);
        for row in counts.chunks(4) {
            assert_eq!(row.iter().sum::<u32>(), 10);
        }

        let mut sim = 0.0;
        assert_eq!(clustopt_representation_similarity(reps[0], reps[0], &mut sim), ClustoptStatus::Ok);
        assert_eq!(sim, 1.0);
        let pair = [reps[0] as *const _, reps[1] as *const _];
        let mut stab = 0.0;
        assert_eq!(clustopt_stability(pair.as_ptr(), 2, &mut stab), ClustoptStatus::Ok);
        assert!((0.0..=1.0).contains(&stab));
        for r in reps {
            clustopt_representation_free(r);
        }

        let dir = tempfile::tempdir().unwrap();
        let csv = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
        let json = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        assert_eq!(clustopt_trajectories_write_csv(set, csv.as_ptr()), ClustoptStatus::Ok);
        assert_eq!(clustopt_model_save(model, json.as_ptr()), ClustoptStatus::Ok);

        let mut back = ptr::null_mut();
        assert_eq!(clustopt_trajectories_read_csv(csv.as_ptr(), &mut back), ClustoptStatus::Ok);
        assert_eq!(clustopt_trajectories_len(back), 4);
        assert_eq!(clustopt_trajectory_data(back, 0, &mut data, &mut len), ClustoptStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(data, len), first.as_slice());
        let mut loaded = ptr::null_mut();
        assert_eq!(clustopt_model_load(json.as_ptr(), &mut loaded), ClustoptStatus::Ok);
        assert_eq!(clustopt_model_num_clusters(loaded), 4);

        clustopt_model_free(loaded);
        clustopt_trajectories_free(back);
        clustopt_model_free(model);
        clustopt_trajectories_free(set);
    }
}

#[test]
fn failures_map_to_status_codes() {
    unsafe {
        let mut out = ptr::null_mut();
        let f = CString::new("sphere").unwrap();
        assert_eq!(
            clustopt_run_algorithm(ptr::null(), f.as_ptr(), 2, 1, 10, 0, 0, &mut out),
            ClustoptStatus::NullPointer
        );
        assert!(last_error().contains("algorithm"));
        let bad = CString::new("simplex").unwrap();
        assert_eq!(
            clustopt_run_algorithm(bad.as_ptr(), f.as_ptr(), 2, 1, 10, 0, 0, &mut out),
            ClustoptStatus::InvalidArgument
        );
        assert!(out.is_null());

        let missing = CString::new("/nonexistent/t.csv").unwrap();
        assert_eq!(clustopt_trajectories_read_csv(missing.as_ptr(), &mut out), ClustoptStatus::IoError);
        assert!(last_error().contains("/nonexistent/t.csv"));

        let set = run("aeo", 0);
        let (mut b, mut s, mut d) = (0, 0, 0);
        assert_eq!(clustopt_trajectory_shape(set, 5, &mut b, &mut s, &mut d), ClustoptStatus::InvalidArgument);
        clustopt_trajectories_free(set);

        let (u, v) = ([1.0, 2.0], [0.0, 0.0]);
        let mut c = 0.0;
        assert_eq!(clustopt_cosine(u.as_ptr(), v.as_ptr(), 2, &mut c), ClustoptStatus::Ok);
        assert_eq!(c, 0.0, "zero vector");
        assert_eq!(clustopt_cosine(u.as_ptr(), ptr::null(), 2, &mut c), ClustoptStatus::NullPointer);
        assert_eq!(clustopt_cosine(u.as_ptr(), u.as_ptr(), 2, &mut c), ClustoptStatus::Ok);
        assert!((c - 1.0).abs() < 1e-15);

        assert_eq!(clustopt_trajectories_len(ptr::null()), 0);
        clustopt_trajectories_free(ptr::null_mut());
        assert!(!CStr::from_ptr(clustopt_version()).to_bytes().is_empty());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/clustopt.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["clustopt_model_fit", "clustopt_stability", "CLUSTOPT_STATUS_NULL_POINTER"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}
