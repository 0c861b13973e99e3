use proptest::prelude::*;

use clustopt::algorithms::{self, AlgorithmConfig, AlgorithmId};
use clustopt::clustering::{ClusterModel, KSelection, Scaler};
use clustopt::metrics::{self, cosine_similarity, Granularity, Missing};
use clustopt::problems::{FunctionId, ProblemInstance};
use clustopt::representation::{build_representation, read_representations_from, representations_csv};
use clustopt::trajectory::{merge, read_trajectories_from, write_trajectories_to, Trajectory};
use clustopt::viz::{heatmap_svg, HeatmapSpec};

fn algorithm() -> impl Strategy<Value = AlgorithmId> {
    prop_oneof![
        Just(AlgorithmId::DeRand1Bin),
        Just(AlgorithmId::DeBest1Bin),
        Just(AlgorithmId::Woa),
        Just(AlgorithmId::Aeo),
    ]
}

fn function() -> impl Strategy<Value = FunctionId> {
    proptest::sample::select(FunctionId::ALL.to_vec())
}

fn small_run(alg: AlgorithmId, f: FunctionId, d: usize, seed: u64) -> Trajectory {
    run_on(alg, &ProblemInstance::new(f, d, seed % 7).unwrap(), seed)
}

fn run_on(alg: AlgorithmId, inst: &ProblemInstance, seed: u64) -> Trajectory {
    let cfg = AlgorithmConfig::new(alg).with_budget(8, 6);
    algorithms::run(&cfg, inst, seed).unwrap().trajectory
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_stay_in_bounds_and_spend_exact_budget(alg in algorithm(), f in function(), d in 1usize..4, seed in any::<u64>()) {
        let inst = ProblemInstance::new(f, d, seed % 5).unwrap();
        let cfg = AlgorithmConfig::new(alg).with_budget(6, 5);
        let record = algorithms::run(&cfg, &inst, seed).unwrap();
        prop_assert_eq!(record.evaluations, 6 * 5);
        prop_assert_eq!(record.trajectory.shape(), (5, 6, d));
        prop_assert!(record.trajectory.data().iter().all(|v| (-5.0..=5.0).contains(v)));
        prop_assert_eq!(&record, &algorithms::run(&cfg, &inst, seed).unwrap());
    }

    #[test]
    fn same_seed_same_initial_population(f in function(), seed in any::<u64>()) {
        let first: Vec<Trajectory> = [AlgorithmId::DeRand1Bin, AlgorithmId::Woa, AlgorithmId::Aeo]
            .iter()
            .map(|&a| small_run(a, f, 2, seed))
            .collect();
        for t in &first[1..] {
            prop_assert_eq!(t.iteration(0), first[0].iteration(0));
        }
    }

    #[test]
    fn de_slots_never_get_worse(f in function(), seed in any::<u64>(), best in any::<bool>()) {
        let alg = if best { AlgorithmId::DeBest1Bin } else { AlgorithmId::DeRand1Bin };
        let t = small_run(alg, f, 3, seed);
        for i in 1..t.iterations() {
            for (now, before) in t.iteration_fitness(i).iter().zip(t.iteration_fitness(i - 1)) {
                prop_assert!(now <= before);
            }
        }
    }

    #[test]
    fn rows_sum_to_population(alg in algorithm(), f in function(), seed in any::<u64>(), k in 1usize..6) {
        let t = small_run(alg, f, 2, seed);
        let merged = merge([&t]).unwrap();
        let model = ClusterModel::fit(&merged.points, 2, KSelection::Fixed(k), seed).unwrap();
        let rep = build_representation(&t, &model).unwrap();
        for i in 0..rep.iterations() {
            prop_assert_eq!(rep.row(i).iter().sum::<u32>() as usize, t.population());
        }
        let svg = heatmap_svg(&HeatmapSpec::new(&rep, &model).unwrap());
        let annotated: Vec<u32> = svg
            .lines()
            .filter(|l| l.contains("class=\"count\""))
            .map(|l| l.trim_end_matches("</text>").rsplit('>').next().unwrap().parse().unwrap())
            .collect();
        prop_assert_eq!(annotated.as_slice(), rep.flat());
    }

    #[test]
    fn scaler_maps_into_unit_box_and_inverts(points in proptest::collection::vec(-1e3f64..1e3, 3..60)) {
        let dim = 3;
        let points = &points[..points.len() / dim * dim];
        let scaler = Scaler::fit(points, dim).unwrap();
        let scaled = scaler.transform(points);
        prop_assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
        for (a, b) in scaler.inverse(&scaled).iter().zip(points) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn float_cosine_is_symmetric_and_bounded(
        u in proptest::collection::vec(-1e3f64..1e3, 1..40),
        seed in any::<u64>(),
    ) {
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| x * ((seed >> (i % 60)) & 7) as f64 - 3.0).collect();
        let a = cosine_similarity(&u, &v).unwrap();
        prop_assert!((a - cosine_similarity(&v, &u).unwrap()).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn trajectory_csv_round_trips(alg in algorithm(), f in function(), seed in any::<u64>()) {
        let t = small_run(alg, f, 2, seed);
        let mut buf = Vec::new();
        write_trajectories_to(std::slice::from_ref(&t), &mut buf).unwrap();
        prop_assert_eq!(read_trajectories_from(buf.as_slice(), "mem").unwrap(), vec![t]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn metrics_ignore_input_order(seed in any::<u64>(), rotate in 0usize..20) {
        let mut reps = Vec::new();
        for f in [FunctionId::Sphere, FunctionId::Rastrigin] {
            let inst = ProblemInstance::new(f, 2, 1).unwrap();
            let runs: Vec<Trajectory> = [AlgorithmId::DeRand1Bin, AlgorithmId::Woa]
                .iter()
                .flat_map(|&a| (0..3).map(|s| run_on(a, &inst, seed.wrapping_add(s))).collect::<Vec<_>>())
                .collect();
            let merged = merge(&runs).unwrap();
            let model = ClusterModel::fit(&merged.points, 2, KSelection::Fixed(3), seed).unwrap();
            reps.extend(runs.iter().map(|t| build_representation(t, &model).unwrap()));
        }
        let table = metrics::stability_table(&reps).unwrap();
        let sim = metrics::similarity_matrix(&reps, Missing::Fail, Granularity::Instance).unwrap();

        let mut shuffled = reps.clone();
        shuffled.rotate_left(rotate % reps.len());
        shuffled.reverse();
        prop_assert_eq!(metrics::stability_table(&shuffled).unwrap(), table);
        prop_assert_eq!(metrics::similarity_matrix(&shuffled, Missing::Fail, Granularity::Instance).unwrap(), sim.clone());
        for i in 0..2 {
            prop_assert_eq!(sim.values[i][i], 1.0);
            for j in 0..2 {
                prop_assert_eq!(sim.values[i][j], sim.values[j][i]);
            }
        }

        let csv = representations_csv(&reps).unwrap();
        let back = read_representations_from(csv.as_slice(), "mem").unwrap();
        prop_assert_eq!(back.iter().map(|r| r.flat().to_vec()).collect::<Vec<_>>(), reps.iter().map(|r| r.flat().to_vec()).collect::<Vec<_>>());
    }
}

#[test]
fn overflowing_objective_aborts_with_location() {
    let mut inst = ProblemInstance::new(FunctionId::Ellipsoid, 2, 1).unwrap();
    inst.shift = vec![1e200, -1e200];
    let err = algorithms::run(&AlgorithmConfig::new(AlgorithmId::Woa).with_budget(5, 3), &inst, 0).unwrap_err();
    assert_eq!(err.kind(), clustopt::ErrorKind::Numeric);
    let msg = err.to_string();
    assert!(msg.contains("iteration 0") && msg.contains("slot 0") && msg.contains("woa"), "{msg}");
}
