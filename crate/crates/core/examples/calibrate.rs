use std::time::Instant;

use cgmc_core::analysis::{exit_time, weak_strong_errors};
use cgmc_core::kmc::{
    run_trajectory, Engine, InitConfig, Process, RunOptions, Sampling, TimeStepMode,
    TrajectorySample, UpdateMode,
};
use cgmc_core::lattice::project;
use cgmc_core::oracle::{gibbs_measure, total_variation, MicroStateSpace};
use cgmc_core::rng::realization_rng;
use cgmc_core::{FieldMode, LatticeSpec, MicroConfig, PotentialModel};

fn ensemble(
    process: Process,
    spec: &LatticeSpec,
    model: &PotentialModel,
    opts: &RunOptions,
    master: u64,
    reals: u64,
) -> Vec<Vec<TrajectorySample>> {
    (0..reals)
        .map(|r| {
            let mut rng = realization_rng(master, r);
            let init = match process {
                Process::Coarse => InitConfig::Coarse(project(spec, &MicroConfig::empty(spec))),
                _ => InitConfig::Micro(MicroConfig::empty(spec)),
            };
            run_trajectory(process, spec, model, &FieldMode::Grouped, &init, opts, &mut rng)
                .unwrap()
        })
        .collect()
}

fn main() {
    // Criterion 2: sampler vs oracle occupation, N=8 L=2 betaJ0=2, 1e6 events.
    {
        let spec = LatticeSpec::new(8, 1, 2).unwrap();
        let model = PotentialModel::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let field = FieldMode::NONE;
        let mut rng = realization_rng(42, 0);
        let mut engine = Engine::new(
            Process::Micro,
            &spec,
            &model,
            &field,
            &InitConfig::Micro(MicroConfig::empty(&spec)),
            UpdateMode::Local,
            TimeStepMode::Paper,
        )
        .unwrap();
        let space = MicroStateSpace::new(&spec);
        let mut weights = vec![0.0f64; space.len()];
        let start = Instant::now();
        for _ in 0..1_000_000u64 {
            let idx: usize = engine
                .block_occupancy()
                .unwrap()
                .iter()
                .enumerate()
                .map(|(x, &e)| (e as usize) << x)
                .sum();
            let ev = engine.step(&mut rng).unwrap();
            weights[idx] += ev.dt;
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let mu = gibbs_measure(Process::Micro, &spec, &model, &field).unwrap();
        println!(
            "criterion2: TV = {:.5} wall={:.1}s",
            total_variation(&weights, &mu),
            start.elapsed().as_secs_f64()
        );
    }

    // Criterion 6a: c0=1, L=100, q=5: relative strong error.
    {
        let model = PotentialModel::new(6.0, 1.0, 1.0, 1.0).unwrap();
        let spec1 = LatticeSpec::new(1000, 1, 100).unwrap();
        let spec5 = LatticeSpec::new(1000, 5, 100).unwrap();
        let mut opts = RunOptions::to_time(30.0);
        opts.sampling = Sampling::Grid { dt: 0.1 };
        let start = Instant::now();
        let reference = ensemble(Process::Micro, &spec1, &model, &opts, 7, 100);
        let coarse = ensemble(Process::Coarse, &spec5, &model, &opts, 7, 100);
        let report = weak_strong_errors(&reference, &coarse).unwrap();
        println!(
            "criterion6a (c0=1,L=100,q=5): rel_e_s = {:.5} (abs {:.5}) wall={:.1}s",
            report.strong_relative,
            report.strong,
            start.elapsed().as_secs_f64()
        );
    }

    // Criterion 6b: c0=0.07, L=20, q=10: transition time then rel e_s.
    {
        let model = PotentialModel::new(6.0, 1.0, 1.0, 0.07).unwrap();
        let spec1 = LatticeSpec::new(1000, 1, 20).unwrap();
        let mut topts = RunOptions::to_time(100_000.0);
        topts.sampling = Sampling::Grid { dt: 2.0 };
        topts.stop_at_coverage = Some(0.9);
        let taus: Vec<f64> = ensemble(Process::Micro, &spec1, &model, &topts, 11, 12)
            .iter()
            .filter_map(|t| exit_time(t, 0.9).unwrap())
            .collect();
        let mean = taus.iter().sum::<f64>() / taus.len().max(1) as f64;
        println!("criterion6b tau (L=20, c0=0.07): crossed {}/12 mean {mean:.0}", taus.len());

        let spec10 = LatticeSpec::new(1000, 10, 20).unwrap();
        let t_final = 1.5 * mean;
        let mut opts = RunOptions::to_time(t_final);
        opts.sampling = Sampling::Grid { dt: t_final / 500.0 };
        let start = Instant::now();
        let reference = ensemble(Process::Micro, &spec1, &model, &opts, 13, 100);
        let coarse = ensemble(Process::Coarse, &spec10, &model, &opts, 13, 100);
        let report = weak_strong_errors(&reference, &coarse).unwrap();
        println!(
            "criterion6b (c0=0.07,L=20,q=10): rel_e_s = {:.5} wall={:.1}s",
            report.strong_relative,
            start.elapsed().as_secs_f64()
        );
    }

    // Criterion 10: CPU ratio q=1 vs q=10 in global mode, fixed T.
    {
        let model = PotentialModel::new(6.0, 1.0, 1.0, 0.072).unwrap();
        let t_final = 15.0;
        let mut cpu = Vec::new();
        for q in [1usize, 10] {
            let spec = LatticeSpec::new(1000, q, 100).unwrap();
            let mut opts = RunOptions::to_time(t_final);
            opts.sampling = Sampling::Grid { dt: 5.0 };
            opts.update = UpdateMode::Global;
            let start = Instant::now();
            let process = if q == 1 { Process::Micro } else { Process::Coarse };
            let init = match process {
                Process::Coarse => InitConfig::Coarse(project(&spec, &MicroConfig::empty(&spec))),
                _ => InitConfig::Micro(MicroConfig::empty(&spec)),
            };
            let mut rng = realization_rng(3, 0);
            run_trajectory(process, &spec, &model, &FieldMode::Grouped, &init, &opts, &mut rng)
                .unwrap();
            cpu.push(start.elapsed().as_secs_f64());
            println!("criterion10: q={q} global wall {:.3}s", cpu.last().unwrap());
        }
        println!("criterion10 ratio: {:.1}", cpu[0] / cpu[1]);
    }
}
