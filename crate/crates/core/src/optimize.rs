//! Target-reaching arm design: the fitness of a transition-graph design on a
//! planar task, the unconstrained genome used by CMA-ES, and the multi-run
//! search.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmaes::{cma_es_minimize_observed, CmaesConfig, CmaesError, GenerationRecord};
use crate::geom::{convex_signed_distance, cross, P2};
use crate::tg::{
    polyline_self_intersects, sample_trajectory, EntryFlag, PlanarState, TransitionGraphDesign,
    DEFAULT_STEP,
};

/// Fitness reported for designs that cannot be evaluated.
pub const WORST_FITNESS: f64 = -1.0e9;
/// Upper bound of the reward weight; the two reward terms share this budget.
pub const REWARD_BUDGET: f64 = 600.0;
pub const PENALTY_PER_STATE: f64 = 4.0;
pub const MIN_LENGTH: f64 = 1.0;
pub const DEFAULT_UNIT_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("a task needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("reward weight {0} must lie in (0, 600)")]
    RewardWeight(f64),
    #[error("unit count must be at least 1")]
    UnitCount,
    #[error("run count must be at least 1")]
    NoRuns,
    #[error(transparent)]
    Cmaes(#[from] CmaesError),
}

/// Closed planar region. Box bounds are inclusive; a missing bound is open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    AxisBox {
        #[serde(default)]
        x_min: Option<f64>,
        #[serde(default)]
        x_max: Option<f64>,
        #[serde(default)]
        y_min: Option<f64>,
        #[serde(default)]
        y_max: Option<f64>,
    },
    Circle {
        center: P2,
        radius: f64,
    },
    /// Simple polygon, either orientation.
    Polygon { vertices: Vec<P2> },
}

impl Region {
    /// Quadrant `x ≥ x_min ∧ y ≥ y_min`.
    pub fn quadrant(x_min: f64, y_min: f64) -> Self {
        Region::AxisBox {
            x_min: Some(x_min),
            x_max: None,
            y_min: Some(y_min),
            y_max: None,
        }
    }

    pub fn contains(&self, p: P2) -> bool {
        match self {
            Region::AxisBox {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                x_min.is_none_or(|v| p.x >= v)
                    && x_max.is_none_or(|v| p.x <= v)
                    && y_min.is_none_or(|v| p.y >= v)
                    && y_max.is_none_or(|v| p.y <= v)
            }
            Region::Circle { center, radius } => (p - center).norm() <= *radius,
            Region::Polygon { vertices } => polygon_contains(vertices, p),
        }
    }
}

fn polygon_contains(poly: &[P2], p: P2) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    if crate::geom::is_convex_ccw(poly, 0.0) {
        return convex_signed_distance(poly, p) >= 0.0;
    }
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if crate::geom::point_segment_distance(p, a, b) == 0.0 {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let side = cross(b - a, p - a);
            if (side > 0.0) == (b.y > a.y) {
                inside = !inside;
            }
        }
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTask {
    pub start_anchor: P2,
    /// `P_start, …, P_end`
    pub waypoints: Vec<P2>,
    #[serde(default)]
    pub warning_regions: Vec<Region>,
    #[serde(default)]
    pub prohibited_regions: Vec<Region>,
    pub reward_weight: f64,
    pub unit_count: usize,
}

impl DesignTask {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.waypoints.len() < 2 {
            return Err(TaskError::TooFewWaypoints(self.waypoints.len()));
        }
        if !(self.reward_weight > 0.0 && self.reward_weight < REWARD_BUDGET) {
            return Err(TaskError::RewardWeight(self.reward_weight));
        }
        if self.unit_count == 0 {
            return Err(TaskError::UnitCount);
        }
        Ok(())
    }

    pub fn p_start(&self) -> P2 {
        self.waypoints[0]
    }

    pub fn p_end(&self) -> P2 {
        *self.waypoints.last().expect("validated task has waypoints")
    }

    pub fn genome_dimension(&self) -> usize {
        2 * self.unit_count + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub start_distance: f64,
    pub end_distance: f64,
    /// Distances to intermediate waypoints, in order.
    #[serde(default)]
    pub waypoint_distances: Vec<f64>,
    pub improper_count: u32,
    pub prohibited_hit: bool,
    pub fitness: f64,
    #[serde(default)]
    pub degenerate: bool,
}

impl FitnessBreakdown {
    /// Recompute the fitness from the stored components.
    pub fn recompute(&self, reward_weight: f64) -> f64 {
        fitness_value(
            reward_weight,
            self.start_distance,
            self.end_distance,
            &self.waypoint_distances,
            self.improper_count,
        )
    }
}

/// `α/(10 + d_start) + (600 − α)/(10 + d_end) − 4N`, plus `α/(10 + d_k)` for
/// every intermediate waypoint.
pub fn fitness_value(
    reward_weight: f64,
    start_distance: f64,
    end_distance: f64,
    waypoint_distances: &[f64],
    improper_count: u32,
) -> f64 {
    let mut reward = reward_weight / (10.0 + start_distance)
        + (REWARD_BUDGET - reward_weight) / (10.0 + end_distance);
    for d in waypoint_distances {
        reward += reward_weight / (10.0 + d);
    }
    reward - PENALTY_PER_STATE * improper_count as f64
}

/// Count sampled states that self-intersect or put the endpoint in a warning
/// or prohibited region; report whether any endpoint entered a prohibited one.
pub fn count_improper_states(trajectory: &[PlanarState], task: &DesignTask) -> (u32, bool) {
    let mut count = 0;
    let mut prohibited = false;
    for state in trajectory {
        let e = state.endpoint;
        let in_prohibited = task.prohibited_regions.iter().any(|r| r.contains(e));
        let in_warning = task.warning_regions.iter().any(|r| r.contains(e));
        prohibited |= in_prohibited;
        if in_prohibited || in_warning || polyline_self_intersects(state) {
            count += 1;
        }
    }
    (count, prohibited)
}

/// State index sampled for intermediate waypoint `k` of `n_p`.
fn waypoint_state(k: usize, waypoints: usize, states: usize) -> usize {
    ((k * (states - 1)) as f64 / (waypoints - 1) as f64).round() as usize
}

pub fn evaluate_fitness(design: &TransitionGraphDesign, task: &DesignTask) -> FitnessBreakdown {
    let degenerate = || FitnessBreakdown {
        start_distance: f64::INFINITY,
        end_distance: f64::INFINITY,
        waypoint_distances: Vec::new(),
        improper_count: 0,
        prohibited_hit: false,
        fitness: WORST_FITNESS,
        degenerate: true,
    };
    let Ok(trajectory) = sample_trajectory(design, DEFAULT_STEP) else {
        return degenerate();
    };
    let first = trajectory[0].endpoint;
    let last = trajectory[trajectory.len() - 1].endpoint;
    if !(first.x.is_finite() && first.y.is_finite() && last.x.is_finite() && last.y.is_finite()) {
        return degenerate();
    }
    let np = task.waypoints.len();
    let waypoint_distances: Vec<f64> = (1..np - 1)
        .map(|k| {
            let s = waypoint_state(k, np, trajectory.len());
            (trajectory[s].endpoint - task.waypoints[k]).norm()
        })
        .collect();
    let start_distance = (first - task.p_start()).norm();
    let end_distance = (last - task.p_end()).norm();
    let (improper_count, prohibited_hit) = count_improper_states(&trajectory, task);
    FitnessBreakdown {
        start_distance,
        end_distance,
        fitness: fitness_value(
            task.reward_weight,
            start_distance,
            end_distance,
            &waypoint_distances,
            improper_count,
        ),
        waypoint_distances,
        improper_count,
        prohibited_hit,
        degenerate: false,
    }
}

const BETA_LOW: f64 = 0.02 * PI;
const BETA_SPAN: f64 = 0.92 * PI;
const BETA_GAP_START: f64 = 0.48 * PI;
const BETA_GAP: f64 = 0.04 * PI;
const LENGTH_GENE_RANGE: (f64, f64) = (-30.0, 10.0);

fn logistic(g: f64) -> f64 {
    1.0 / (1.0 + (-g).exp())
}

pub fn decode_length(gene: f64) -> f64 {
    let g = if gene.is_nan() { 0.0 } else { gene };
    MIN_LENGTH + g.clamp(LENGTH_GENE_RANGE.0, LENGTH_GENE_RANGE.1).exp()
}

pub fn encode_length(length: f64) -> f64 {
    (length - MIN_LENGTH).max(1e-12).ln()
}

/// Logistic map onto `(0.02π, 0.98π)` with the band `[0.48π, 0.52π)` removed.
pub fn decode_shape_angle(gene: f64) -> f64 {
    let g = if gene.is_nan() { 0.0 } else { gene };
    let s = logistic(g.clamp(-700.0, 700.0));
    let beta = BETA_LOW + s * BETA_SPAN;
    let beta = if beta >= BETA_GAP_START { beta + BETA_GAP } else { beta };
    beta.clamp(BETA_LOW, PI - BETA_LOW)
}

/// Genome layout: `[g_l0 … g_ln, g_β1 … g_βn]`.
pub fn decode_genome(genome: &[f64], task: &DesignTask, flag: EntryFlag) -> TransitionGraphDesign {
    let n = task.unit_count;
    let lengths = genome[..=n].iter().map(|&g| decode_length(g)).collect();
    let betas = genome[n + 1..2 * n + 1]
        .iter()
        .map(|&g| decode_shape_angle(g))
        .collect();
    TransitionGraphDesign::new(task.start_anchor, lengths, betas, flag)
        .expect("decoded genomes are valid designs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub index: usize,
    pub seed: u64,
    pub first_flag: EntryFlag,
    pub init_mean: Vec<f64>,
    pub init_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub best_fitness: f64,
    pub generation_best: f64,
    pub sigma: f64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub index: usize,
    pub seed: u64,
    pub first_flag: EntryFlag,
    pub generations: Vec<GenerationSummary>,
    pub evaluations: usize,
    pub best_design: TransitionGraphDesign,
    pub best_breakdown: FitnessBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDesign {
    pub run: usize,
    pub seed: u64,
    pub design: TransitionGraphDesign,
    pub breakdown: FitnessBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDesignResult {
    pub ranking: Vec<RankedDesign>,
    pub runs: Vec<EvolutionRun>,
    #[serde(default)]
    pub diagnostic: Option<String>,
}

/// Default per-run budget: 300 generations or 3·10⁴ evaluations.
pub fn default_budget() -> CmaesConfig {
    CmaesConfig::default()
}

/// Randomized starting points for `runs` independent searches; flags
/// alternate so both entry flags get half of the runs.
pub fn plan_runs(task: &DesignTask, runs: usize, seed: u64) -> Result<Vec<RunSpec>, TaskError> {
    task.validate()?;
    if runs == 0 {
        return Err(TaskError::NoRuns);
    }
    let n = task.unit_count;
    let reach = (task.p_start() - task.start_anchor).norm().max(10.0 * (n + 1) as f64);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let beta_gene = Normal::new(0.0, 1.5).expect("valid normal");
    Ok((0..runs)
        .map(|index| {
            let run_seed = master.next_u64();
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            let mut init_mean = Vec::with_capacity(2 * n + 1);
            for _ in 0..=n {
                let l = reach / (n + 1) as f64 * rng.random_range(0.7..1.3);
                init_mean.push(encode_length(l));
            }
            for _ in 0..n {
                init_mean.push(beta_gene.sample(&mut rng));
            }
            RunSpec {
                index,
                seed: run_seed,
                first_flag: if index % 2 == 0 {
                    EntryFlag::Mountain
                } else {
                    EntryFlag::Valley
                },
                init_mean,
                init_sigma: rng.random_range(0.3..1.0),
            }
        })
        .collect())
}

/// One CMA-ES run maximizing the fitness.
pub fn execute_run<P>(
    task: &DesignTask,
    spec: &RunSpec,
    budget: &CmaesConfig,
    mut progress: P,
) -> Result<EvolutionRun, TaskError>
where
    P: FnMut(&GenerationRecord),
{
    task.validate()?;
    let objective = |g: &[f64]| -evaluate_fitness(&decode_genome(g, task, spec.first_flag), task).fitness;
    let result = cma_es_minimize_observed(
        objective,
        &spec.init_mean,
        spec.init_sigma,
        budget,
        spec.seed,
        |r| progress(r),
    )?;
    let best_design = decode_genome(&result.best_x, task, spec.first_flag);
    let best_breakdown = evaluate_fitness(&best_design, task);
    Ok(EvolutionRun {
        index: spec.index,
        seed: spec.seed,
        first_flag: spec.first_flag,
        generations: result
            .history
            .iter()
            .map(|r| GenerationSummary {
                generation: r.generation,
                best_fitness: -r.best_so_far,
                generation_best: -r.generation_best,
                sigma: r.sigma,
                mean: r.mean.clone(),
            })
            .collect(),
        evaluations: result.evaluations,
        best_design,
        best_breakdown,
    })
}

/// Rank run results by fitness (descending, ties by seed), dropping designs
/// whose endpoint ever entered a prohibited region.
pub fn rank_runs(runs: Vec<EvolutionRun>) -> ArmDesignResult {
    let mut ranking: Vec<RankedDesign> = runs
        .iter()
        .filter(|r| !r.best_breakdown.prohibited_hit && !r.best_breakdown.degenerate)
        .map(|r| RankedDesign {
            run: r.index,
            seed: r.seed,
            design: r.best_design.clone(),
            breakdown: r.best_breakdown.clone(),
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.breakdown
            .fitness
            .total_cmp(&a.breakdown.fitness)
            .then(a.seed.cmp(&b.seed))
    });
    let diagnostic = if ranking.is_empty() {
        Some(alloc::format!(
            "all {} runs ended with an endpoint inside a prohibited region",
            runs.len()
        ))
    } else {
        None
    };
    ArmDesignResult {
        ranking,
        runs,
        diagnostic,
    }
}

/// Run `runs` independent searches and rank their best designs.
pub fn design_arm<P>(
    task: &DesignTask,
    runs: usize,
    seed: u64,
    budget: &CmaesConfig,
    mut progress: P,
) -> Result<ArmDesignResult, TaskError>
where
    P: FnMut(usize, &GenerationRecord),
{
    let specs = plan_runs(task, runs, seed)?;
    let mut results = Vec::with_capacity(runs);
    for spec in &specs {
        results.push(execute_run(task, spec, budget, |r| progress(spec.index, r))?);
    }
    Ok(rank_runs(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tg::fold_state;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn reaching_task() -> DesignTask {
        DesignTask {
            start_anchor: P2::origin(),
            waypoints: vec![P2::new(250.0, 0.0), P2::new(50.0, 133.3)],
            warning_regions: vec![Region::quadrant(140.0, 30.0)],
            prohibited_regions: vec![Region::quadrant(150.0, 40.0)],
            reward_weight: 120.0,
            unit_count: 5,
        }
    }

    fn state_at(p: P2) -> PlanarState {
        PlanarState {
            theta: 0.0,
            start: P2::origin(),
            vectors: vec![crate::tg::TransitionVector {
                length: p.coords.norm(),
                absolute_angle: p.y.atan2(p.x),
                entry_flag: EntryFlag::Mountain,
            }],
            endpoint: p,
        }
    }

    #[test]
    fn fitness_arithmetic() {
        assert_eq!(fitness_value(120.0, 0.0, 0.0, &[], 0), 60.0);
        assert_relative_eq!(fitness_value(120.0, 10.0, 20.0, &[], 2), 14.0, epsilon = 1e-12);
        for n in 0..10 {
            let d = fitness_value(120.0, 3.7, 11.2, &[], n + 1) - fitness_value(120.0, 3.7, 11.2, &[], n);
            assert_relative_eq!(d, -4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn improper_state_examples() {
        let task = reaching_task();
        let (n, hit) = count_improper_states(&[state_at(P2::new(100.0, 10.0))], &task);
        assert_eq!((n, hit), (0, false));
        let (n, hit) = count_improper_states(&[state_at(P2::new(150.0, 35.0))], &task);
        assert_eq!((n, hit), (1, false));
        let (n, hit) = count_improper_states(&[state_at(P2::new(160.0, 45.0))], &task);
        assert_eq!((n, hit), (1, true));
    }

    #[test]
    fn regions() {
        let c = Region::Circle {
            center: P2::new(1.0, 1.0),
            radius: 1.0,
        };
        assert!(c.contains(P2::new(2.0, 1.0)));
        assert!(!c.contains(P2::new(2.1, 1.0)));
        let l = Region::Polygon {
            vertices: vec![
                P2::new(0.0, 0.0),
                P2::new(4.0, 0.0),
                P2::new(4.0, 1.0),
                P2::new(1.0, 1.0),
                P2::new(1.0, 4.0),
                P2::new(0.0, 4.0),
            ],
        };
        assert!(l.contains(P2::new(0.5, 3.0)));
        assert!(l.contains(P2::new(3.0, 0.5)));
        assert!(!l.contains(P2::new(3.0, 3.0)));
        assert!(l.contains(P2::new(4.0, 0.5)));
    }

    #[test]
    fn task_validation() {
        let mut t = reaching_task();
        assert!(t.validate().is_ok());
        t.reward_weight = 600.0;
        assert_eq!(t.validate(), Err(TaskError::RewardWeight(600.0)));
        t.reward_weight = 120.0;
        t.waypoints.pop();
        assert_eq!(t.validate(), Err(TaskError::TooFewWaypoints(1)));
    }

    #[test]
    fn decode_is_total() {
        let task = reaching_task();
        for g in [-1e300, -50.0, -3.0, 0.0, 0.001, 2.0, 40.0, 1e300, f64::NAN, f64::INFINITY] {
            let b = decode_shape_angle(g);
            assert!(b > 0.0 && b < PI && (b - PI / 2.0).abs() >= 0.02 * PI - 1e-12, "{g} → {b}");
            assert!(decode_length(g) >= MIN_LENGTH);
            let d = decode_genome(&[g; 11], &task, EntryFlag::Valley);
            assert!(d.validate().is_ok());
        }
    }

    #[test]
    fn breakdown_recomputes_exactly() {
        let task = reaching_task();
        let d = decode_genome(&[3.5, 3.6, 3.7, 3.4, 3.5, 3.6, 0.2, -0.4, 1.0, -1.2, 0.3], &task, EntryFlag::Mountain);
        let b = evaluate_fitness(&d, &task);
        assert_eq!(b.recompute(task.reward_weight), b.fitness);
    }

    #[test]
    fn exact_hits_score_sixty() {
        let d = TransitionGraphDesign::new(
            P2::origin(),
            vec![10.0, 10.0],
            vec![PI / 4.0],
            EntryFlag::Valley,
        )
        .unwrap();
        let task = DesignTask {
            start_anchor: P2::origin(),
            waypoints: vec![
                fold_state(&d, 0.0).unwrap().endpoint,
                fold_state(&d, PI).unwrap().endpoint,
            ],
            warning_regions: vec![],
            prohibited_regions: vec![],
            reward_weight: 120.0,
            unit_count: 1,
        };
        let b = evaluate_fitness(&d, &task);
        assert_eq!(b.improper_count, 0);
        assert_relative_eq!(b.fitness, 60.0, epsilon = 1e-9);
    }

    #[test]
    fn ranking_excludes_prohibited_and_orders_by_seed() {
        let task = reaching_task();
        let design = decode_genome(&[3.0; 11], &task, EntryFlag::Mountain);
        let mk = |index, seed, fitness, hit| EvolutionRun {
            index,
            seed,
            first_flag: EntryFlag::Mountain,
            generations: vec![],
            evaluations: 0,
            best_design: design.clone(),
            best_breakdown: FitnessBreakdown {
                start_distance: 0.0,
                end_distance: 0.0,
                waypoint_distances: vec![],
                improper_count: 0,
                prohibited_hit: hit,
                fitness,
                degenerate: false,
            },
        };
        let r = rank_runs(vec![mk(0, 9, 5.0, false), mk(1, 3, 7.0, true), mk(2, 4, 5.0, false), mk(3, 1, 6.0, false)]);
        let order: Vec<usize> = r.ranking.iter().map(|d| d.run).collect();
        assert_eq!(order, vec![3, 2, 0]);
        let all_bad = rank_runs(vec![mk(0, 1, 1.0, true)]);
        assert!(all_bad.ranking.is_empty());
        assert!(all_bad.diagnostic.is_some());
    }

    #[test]
    fn short_seeded_search_is_deterministic() {
        let task = reaching_task();
        let budget = CmaesConfig {
            max_generations: 15,
            ..CmaesConfig::default()
        };
        let a = design_arm(&task, 2, 7, &budget, |_, _| {}).unwrap();
        let b = design_arm(&task, 2, 7, &budget, |_, _| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs[0].first_flag, EntryFlag::Mountain);
        assert_eq!(a.runs[1].first_flag, EntryFlag::Valley);
        for run in &a.runs {
            for w in run.generations.windows(2) {
                assert!(w[1].best_fitness >= w[0].best_fitness);
            }
        }
    }
}
