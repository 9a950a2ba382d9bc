//! Real-coded genetic algorithm with feasibility-first ranking.

use std::cmp::Ordering;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExposureLedger, ExposureModel, SpeedError, SpeedProfile, VoyageConstraints};

/// Penalty per tolerance-multiple of distance violation, dB.
pub const PENALTY_WEIGHT_DB: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub max_generations: usize,
    /// Stop when the best fitness improves by less than this over
    /// `stagnation_generations`, dB.
    pub objective_tolerance_db: f64,
    pub stagnation_generations: usize,
    /// Wall-clock budget. Runs that stop on it are not reproducible.
    pub time_budget_s: Option<f64>,
    pub crossover_start: f64,
    pub crossover_end: f64,
    pub mutation_start: f64,
    pub mutation_end: f64,
    /// Gaussian mutation standard deviation as a fraction of `v_max − v_min`.
    pub mutation_sigma: f64,
    /// Distribution index of the simulated binary crossover.
    pub sbx_eta: f64,
    pub elite_fraction: f64,
    pub tournament: usize,
    /// Relative jitter of the seeded constant-speed individuals.
    pub jitter: f64,
    /// Share of the initial population seeded around the constant speed.
    pub seeded_fraction: f64,
    /// Rescale each offspring onto the distance constraint within the bounds.
    pub repair: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 1000,
            max_generations: 200,
            objective_tolerance_db: 0.01,
            stagnation_generations: 20,
            time_budget_s: None,
            crossover_start: 0.9,
            crossover_end: 0.6,
            mutation_start: 0.3,
            mutation_end: 0.05,
            mutation_sigma: 0.1,
            sbx_eta: 15.0,
            elite_fraction: 0.02,
            tournament: 3,
            jitter: 0.2,
            seeded_fraction: 0.5,
            repair: true,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), SpeedError> {
        if self.population < 2 {
            return Err(SpeedError::Model("population must be at least 2".into()));
        }
        if self.tournament == 0 {
            return Err(SpeedError::Model("tournament size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `J_s + W·max(0, |TDT − l|·1852 − ε)/ε`.
pub fn penalized_fitness(objective_db: f64, tdt_nm: f64, c: &VoyageConstraints) -> f64 {
    objective_db + PENALTY_WEIGHT_DB * c.violation_m(tdt_nm) / c.tolerance_m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub profile: SpeedProfile,
    pub ledger: ExposureLedger,
    /// Mean SEL of the returned profile; `None` without mammals.
    pub objective_db: Option<f64>,
    /// Mean SEL of the constant-speed profile on the same model.
    pub constant_objective_db: Option<f64>,
    pub generations: usize,
    /// Best fitness after each generation.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<f64>,
    objective: f64,
    violation_m: f64,
    fitness: f64,
}

fn rank(a: &Individual, b: &Individual) -> Ordering {
    (a.violation_m > 0.0)
        .cmp(&(b.violation_m > 0.0))
        .then_with(|| a.fitness.total_cmp(&b.fitness))
}

fn stream(seed: u64, generation: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    rng
}

/// Clips to the bounds, then rescales the genes that can still move until the
/// total distance matches `l`.
pub fn repair(genes: &mut [f64], c: &VoyageConstraints, dt_h: f64) {
    for v in genes.iter_mut() {
        *v = v.clamp(c.v_min_kt, c.v_max_kt);
    }
    let target = c.length_nm / dt_h;
    for _ in 0..=genes.len() {
        let diff = target - genes.iter().sum::<f64>();
        if diff.abs() * dt_h * crate::geo::METERS_PER_NM < 1e-6 {
            break;
        }
        let movable = |v: f64| if diff > 0.0 { v < c.v_max_kt } else { v > c.v_min_kt };
        let free: f64 = genes.iter().copied().filter(|&v| movable(v)).sum();
        if free <= 0.0 {
            break;
        }
        let factor = (free + diff) / free;
        for v in genes.iter_mut() {
            if movable(*v) {
                *v = (*v * factor).clamp(c.v_min_kt, c.v_max_kt);
            }
        }
    }
}

fn evaluate(model: &ExposureModel, c: &VoyageConstraints, dt_h: f64, genes: Vec<f64>) -> Individual {
    let objective = model.objective(&genes).expect("mammals present");
    let tdt = super::tdt(&genes, dt_h);
    Individual { violation_m: c.violation_m(tdt), fitness: penalized_fitness(objective, tdt, c), objective, genes }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn sbx<R: Rng>(p1: &[f64], p2: &[f64], eta: f64, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    p1.iter()
        .zip(p2)
        .map(|(&a, &b)| {
            let u: f64 = rng.random();
            let beta = if u <= 0.5 { (2.0 * u).powf(1.0 / (eta + 1.0)) } else { (0.5 / (1.0 - u)).powf(1.0 / (eta + 1.0)) };
            let c = if rng.random::<bool>() {
                0.5 * ((1.0 + beta) * a + (1.0 - beta) * b)
            } else {
                0.5 * ((1.0 - beta) * a + (1.0 + beta) * b)
            };
            c.clamp(lo, hi)
        })
        .collect()
}

/// Optimises per-leg speeds on `model` subject to `constraints`.
///
/// Without mammals the constant-speed profile is returned. `progress` is
/// called with the fraction of the generation budget used.
pub fn optimize_speeds(
    model: &ExposureModel,
    constraints: &VoyageConstraints,
    ga: &GaConfig,
    progress: Option<&(dyn Fn(f64) + Sync)>,
) -> Result<Optimized, SpeedError> {
    constraints.validate()?;
    ga.validate()?;
    let legs = model.legs();
    let dt_h = model.dt_h();
    if (dt_h * legs as f64 - constraints.eta_h).abs() > 1e-9 * constraints.eta_h {
        return Err(SpeedError::Model(format!(
            "model covers {} h but the ETA is {} h",
            dt_h * legs as f64,
            constraints.eta_h
        )));
    }
    let constant = SpeedProfile::constant(constraints, legs);
    if model.mammal_count() == 0 {
        return Ok(Optimized {
            ledger: model.ledger(&constant.speeds_kt),
            profile: constant,
            objective_db: None,
            constant_objective_db: None,
            generations: 0,
            history: Vec::new(),
        });
    }
    let c = constraints;
    let span = c.v_max_kt - c.v_min_kt;
    let sigma = (ga.mutation_sigma * span).max(f64::MIN_POSITIVE);
    let noise = Normal::new(0.0, sigma).map_err(|e| SpeedError::Model(e.to_string()))?;

    let seeded = ((ga.population as f64 * ga.seeded_fraction).round() as usize).clamp(1, ga.population);
    let initial: Vec<Vec<f64>> = (0..ga.population)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return constant.speeds_kt.clone();
            }
            let mut rng = stream(ga.seed, 0, k as u64);
            let mut g: Vec<f64> = if k < seeded {
                constant.speeds_kt.iter().map(|&v| v * (1.0 + rng.random_range(-ga.jitter..=ga.jitter))).collect()
            } else {
                (0..legs).map(|_| if span > 0.0 { rng.random_range(c.v_min_kt..=c.v_max_kt) } else { c.v_min_kt }).collect()
            };
            if ga.repair {
                repair(&mut g, c, dt_h);
            } else {
                g.iter_mut().for_each(|v| *v = v.clamp(c.v_min_kt, c.v_max_kt));
            }
            g
        })
        .collect();
    let mut pop: Vec<Individual> = initial.into_par_iter().map(|g| evaluate(model, c, dt_h, g)).collect();
    pop.sort_by(rank);

    let elites = ((ga.population as f64 * ga.elite_fraction).ceil() as usize).clamp(1, ga.population - 1);
    let clock = Instant::now();
    let mut history = vec![pop[0].fitness];
    let mut generations = 0;
    for gen in 1..=ga.max_generations {
        if let Some(p) = progress {
            p((gen - 1) as f64 / ga.max_generations as f64);
        }
        if ga.time_budget_s.is_some_and(|b| clock.elapsed().as_secs_f64() > b) {
            log::info!("speed optimisation time budget reached at generation {gen}");
            break;
        }
        let t = if ga.max_generations > 1 { (gen - 1) as f64 / (ga.max_generations - 1) as f64 } else { 1.0 };
        let p_cross = lerp(ga.crossover_start, ga.crossover_end, t);
        let p_mut = lerp(ga.mutation_start, ga.mutation_end, t);
        let parents = &pop;
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            (0..ga.tournament).map(|_| rng.random_range(0..parents.len())).min().expect("tournament ≥ 1")
        };
        let children: Vec<Individual> = (0..ga.population - elites)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(ga.seed, gen as u64, k as u64);
                let a = tournament(&mut rng);
                let b = tournament(&mut rng);
                let mut g = if rng.random::<f64>() < p_cross {
                    sbx(&parents[a].genes, &parents[b].genes, ga.sbx_eta, c.v_min_kt, c.v_max_kt, &mut rng)
                } else {
                    parents[a].genes.clone()
                };
                for v in g.iter_mut() {
                    if rng.random::<f64>() < p_mut {
                        *v = (*v + noise.sample(&mut rng)).clamp(c.v_min_kt, c.v_max_kt);
                    }
                }
                if ga.repair {
                    repair(&mut g, c, dt_h);
                }
                evaluate(model, c, dt_h, g)
            })
            .collect();
        pop.truncate(elites);
        pop.extend(children);
        pop.sort_by(rank);
        history.push(pop[0].fitness);
        generations = gen;
        let w = ga.stagnation_generations;
        if w > 0 && history.len() > w && history[history.len() - 1 - w] - history[history.len() - 1] < ga.objective_tolerance_db {
            log::debug!("speed optimisation converged at generation {gen}");
            break;
        }
    }
    if let Some(p) = progress {
        p(1.0);
    }

    let best = &pop[0];
    if best.violation_m > 0.0 {
        return Err(SpeedError::NoFeasible { violation_m: best.violation_m, objective: best.objective });
    }
    let profile = SpeedProfile::new(best.genes.clone(), dt_h);
    Ok(Optimized {
        ledger: model.ledger(&profile.speeds_kt),
        objective_db: Some(best.objective),
        constant_objective_db: Some(model.objective(&constant.speeds_kt)?),
        profile,
        generations,
        history,
    })
}
