use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand_distr::{Distribution, Normal};

use clustopt::algorithms::{self, AlgorithmConfig, AlgorithmId};
use clustopt::clustering::ClusterModel;
use clustopt::problems::{FunctionId, ProblemInstance};
use clustopt::trajectory::{write_trajectories, Trajectory};
use clustopt::seed;

fn clustopt(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_clustopt"));
    cmd.args(args).env_remove("CLUSTOPT_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn clustopt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sphere_runs(dir: &Path) -> PathBuf {
    let inst = ProblemInstance::new(FunctionId::Sphere, 2, 1).unwrap();
    let runs: Vec<Trajectory> = [AlgorithmId::DeRand1Bin, AlgorithmId::Woa]
        .iter()
        .flat_map(|&a| {
            let inst = &inst;
            (0..3).map(move |s| {
                algorithms::run(&AlgorithmConfig::new(a).with_budget(10, 8), inst, s)
                    .unwrap()
                    .trajectory
            })
        })
        .collect();
    let path = dir.join("runs.csv");
    write_trajectories(&runs, &path).unwrap();
    path
}

#[test]
fn stage_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let runs = sphere_runs(d);
    let (model, reps, stab, sim) = (d.join("model.json"), d.join("reps.csv"), d.join("stab.csv"), d.join("sim.csv"));

    let out = clustopt(&["ingest", "--in", p(&runs), "--validate"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 6);

    let out = clustopt(&["cluster", "--trajectories", p(&runs), "--k", "auto", "--k-max", "8", "--seed", "3", "--out", p(&model)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fitted = ClusterModel::load(&model).unwrap();
    assert_eq!(fitted.problem.as_deref(), Some("sphere-d2-i1"));
    assert_eq!(fitted.k_selection_trace.len(), 7);

    let out = clustopt(&["represent", "--trajectories", p(&runs), "--model", p(&model), "--out", p(&reps)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(d.join("reps.csv.meta.json").exists());

    let out = clustopt(&["stability", "--reps", p(&reps), "--out", p(&stab)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&stab).unwrap();
    assert!(text.starts_with("problem,de_rand_1_bin,woa\nsphere-d2-i1,"), "{text}");

    let out = clustopt(&["similarity", "--reps", p(&reps), "--out", p(&sim)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(fs::read_to_string(&sim).unwrap().starts_with("algorithm,de_rand_1_bin,woa\nde_rand_1_bin,1,"));

    let svg = d.join("h.svg");
    let out = clustopt(&["plot", "heatmap", "--in", p(&reps), "--model", p(&model), "--out", p(&svg)], &[]);
    assert_eq!(code(&out), 1, "ambiguous selection is a usage error");
    let out = clustopt(
        &["plot", "heatmap", "--in", p(&reps), "--model", p(&model), "--algorithm", "woa", "--seed", "2", "--out", p(&svg)],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&svg).unwrap().matches("class=\"cell\"").count(), 8 * fitted.num_clusters());

    for (kind, input) in [("clustermap", &sim), ("stability", &stab)] {
        let svg = d.join(format!("{kind}.svg"));
        let out = clustopt(&["plot", kind, "--in", p(input), "--out", p(&svg)], &[]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(fs::read_to_string(&svg).unwrap().starts_with("<?xml"));
    }
}

#[test]
fn fixed_k_on_three_blobs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = seed::rng(5);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut data = Vec::new();
    for c in [[-3.0, -3.0], [3.0, -2.0], [0.0, 3.5]] {
        for _ in 0..40 {
            data.push(c[0] + noise.sample(&mut rng));
            data.push(c[1] + noise.sample(&mut rng));
        }
    }
    let t = Trajectory::new("ext", "blobs", 0, (1, 120, 2), data, vec![0.0; 120]).unwrap();
    let input = tmp.path().join("blobs.csv");
    write_trajectories(&[t], &input).unwrap();
    let model = tmp.path().join("model.json");
    let out = clustopt(&["cluster", "--trajectories", p(&input), "--k", "3", "--out", p(&model)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = ClusterModel::load(&model).unwrap();
    assert_eq!(m.num_clusters(), 3);
    let mut raw = m.raw_centroids();
    raw.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for (c, want) in raw.iter().zip([[-3.0, -3.0], [0.0, 3.5], [3.0, -2.0]]) {
        assert!((c[0] - want[0]).abs() < 0.05 && (c[1] - want[1]).abs() < 0.05, "{c:?}");
    }
}

#[test]
fn ingest_reports_bad_row_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(
        &path,
        "algorithm,problem,seed,iteration,slot,fitness,x0,x1\n\
         a,p,0,0,0,1.0,0.5,0.5\n\
         a,p,0,0,1,1.0,0.5\n",
    )
    .unwrap();
    let out = clustopt(&["ingest", "--in", p(&path), "--validate"], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&clustopt(&["cluster", "--bogus"], &[])), 1);
    assert_eq!(code(&clustopt(&[], &[])), 1);
    assert_eq!(code(&clustopt(&["--help"], &[])), 0);
    let out = clustopt(&["ingest", "--in", "/nonexistent/file.csv"], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/nonexistent/file.csv"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(&cfg, "functions = [\"sphere\"]\nalgorithms = [\"woa\"]\n").unwrap();
    let out = clustopt(&["run", "--config", p(&cfg)], &[]);
    assert_eq!(code(&out), 1, "no output directory");
    fs::write(&cfg, "functions = [\"sphere\"]\nalgorithms = [\"nope\"]\noutput_dir = \"x\"\n").unwrap();
    assert_eq!(code(&clustopt(&["run", "--config", p(&cfg)], &[])), 1);
    fs::write(&cfg, "functions = [\"sphere\"\n").unwrap();
    assert_eq!(code(&clustopt(&["run", "--config", p(&cfg), "--out", "x"], &[])), 2);
}

#[test]
fn run_writes_manifest_of_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        "functions = [\"sphere\", \"linear_slope\"]\ndimensions = [2]\ninstances = [1]\n\
         algorithms = [\"de_rand_1_bin\", \"aeo\"]\nruns = 2\niterations = 6\npopulation_size = 12\n\
         k_max = 6\nheatmaps = true\nmaster_seed = 9\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = clustopt(&["run", "--config", p(&cfg), "--out", p(&out_dir), "--jobs", "2"], &[("CLUSTOPT_SEED", "77")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 77);
    let listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    let mut on_disk = Vec::new();
    let mut stack = vec![out_dir.clone()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                on_disk.push(path.strip_prefix(&out_dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    on_disk.retain(|f| f != "manifest.json");
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert!(!on_disk.iter().any(|f| f.ends_with(".partial")));
    assert_eq!(listed.iter().filter(|f| f.starts_with("heatmaps/")).count(), 2 * 2 * 2);
    assert_eq!(manifest["problems"].as_array().unwrap().len(), 2);
    let stages: Vec<&str> = manifest["timings"].as_array().unwrap().iter().map(|t| t["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["run", "merge", "scale", "elbow", "fit", "represent", "metrics"]);
    assert!(manifest["timings"].as_array().unwrap().iter().all(|t| t["seconds"].as_f64().unwrap() >= 0.0));
}
