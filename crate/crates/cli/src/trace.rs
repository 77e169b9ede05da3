//! CSV traces of optimization runs and string simulations.

use std::io::Write;

use foldwright_core::optimize::EvolutionRun;
use foldwright_core::string_sim::QuasiStaticState;
use foldwright_core::tg::EntryFlag;

/// One row per run and generation.
pub fn write_optimization_trace<W: Write>(out: W, runs: &[EvolutionRun]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "seed", "first_flag", "generation", "best_fitness", "generation_best", "sigma"])?;
    for run in runs {
        let flag = match run.first_flag {
            EntryFlag::Mountain => "mountain",
            EntryFlag::Valley => "valley",
        };
        for g in &run.generations {
            w.write_record([
                run.index.to_string(),
                run.seed.to_string(),
                flag.to_string(),
                g.generation.to_string(),
                g.best_fitness.to_string(),
                g.generation_best.to_string(),
                g.sigma.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per quasi-static state with the slack and total length of every
/// string.
pub fn write_simulation_trace<W: Write>(out: W, states: &[QuasiStaticState]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let strings = states.first().map_or(0, |s| s.strings.len());
    let mut header: Vec<String> = ["index", "twist", "fold_theta", "pose_x", "pose_y", "pose_phi", "is_final"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..strings {
        header.push(format!("slack_{i}"));
        header.push(format!("length_{i}"));
    }
    w.write_record(&header)?;
    for s in states {
        let mut row = vec![
            s.index.to_string(),
            s.twist.to_string(),
            s.fold_theta.to_string(),
            s.pose.x.to_string(),
            s.pose.y.to_string(),
            s.pose.phi.to_string(),
            s.is_final.to_string(),
        ];
        for st in &s.strings {
            row.push(st.slack.to_string());
            row.push(st.total().to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
