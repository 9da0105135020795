//! Generational evolutionary search over bounded camera poses.
//!
//! Each generation: tournament selection refills the population, consecutive
//! pairs undergo two-point crossover with probability `crossover_rate`, each
//! offspring is Gaussian-mutated with probability `mutation_rate`, and
//! modified individuals are re-evaluated. The best individual ever seen is
//! tracked outside the population.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};

/// Genes: x, y, z (m), pitch, yaw (rad).
pub const GENES: usize = 5;
pub type Genome = [f64; GENES];

/// Axis-aligned box constraining genomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseBounds {
    pub lower: Genome,
    pub upper: Genome,
}

impl PoseBounds {
    /// `lower[k] ≤ upper[k]` is required; equal limits pin a gene.
    pub fn new(lower: Genome, upper: Genome) -> Result<Self> {
        for k in 0..GENES {
            if !(lower[k].is_finite() && upper[k].is_finite()) || lower[k] > upper[k] {
                return Err(NbvError::InvalidConfig(format!(
                    "bound {k}: [{}, {}] is not a valid range",
                    lower[k], upper[k]
                )));
            }
        }
        Ok(PoseBounds { lower, upper })
    }

    pub fn range(&self, gene: usize) -> f64 {
        self.upper[gene] - self.lower[gene]
    }

    pub fn clamp(&self, g: &mut Genome) {
        for k in 0..GENES {
            g[k] = g[k].clamp(self.lower[k], self.upper[k]);
        }
    }

    pub fn contains(&self, g: &Genome) -> bool {
        (0..GENES).all(|k| g[k] >= self.lower[k] && g[k] <= self.upper[k])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Individual {
            genome,
            fitness: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Population size `I`.
    pub population: usize,
    /// Number of generations `N_G` after the initial one.
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    /// Mutation standard deviation as a fraction of each gene's bound range.
    pub sigma_fraction: f64,
    /// Absolute standard deviation for every gene; overrides `sigma_fraction`.
    pub sigma_absolute: Option<f64>,
    /// Probability that a gene of a mutated individual is perturbed.
    pub gene_mutation_prob: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: 50,
            generations: 20,
            crossover_rate: 0.8,
            mutation_rate: 0.2,
            tournament_size: 3,
            sigma_fraction: 0.05,
            sigma_absolute: None,
            gene_mutation_prob: 0.2,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let problem = if self.population < 2 {
            Some("population must be at least 2")
        } else if self.tournament_size < 1 {
            Some("tournament_size must be at least 1")
        } else if !unit(self.crossover_rate) || !unit(self.mutation_rate) {
            Some("crossover_rate and mutation_rate must lie in [0, 1]")
        } else if !unit(self.gene_mutation_prob) {
            Some("gene_mutation_prob must lie in [0, 1]")
        } else if !(self.sigma_fraction >= 0.0) || self.sigma_absolute.is_some_and(|s| !(s >= 0.0))
        {
            Some("mutation sigma must be non-negative")
        } else {
            None
        };
        match problem {
            Some(msg) => Err(NbvError::InvalidConfig(msg.into())),
            None => Ok(()),
        }
    }

    /// Per-gene mutation standard deviations for `bounds`.
    pub fn sigmas(&self, bounds: &PoseBounds) -> Genome {
        std::array::from_fn(|k| match self.sigma_absolute {
            Some(s) => s,
            None => self.sigma_fraction * bounds.range(k),
        })
    }
}

/// `cfg.population` individuals drawn uniformly inside `bounds`.
pub fn initialize<R: Rng>(bounds: &PoseBounds, cfg: &EvolutionConfig, rng: &mut R) -> Vec<Individual> {
    (0..cfg.population)
        .map(|_| {
            let mut g: Genome = std::array::from_fn(|k| {
                bounds.lower[k] + rng.random::<f64>() * bounds.range(k)
            });
            bounds.clamp(&mut g);
            Individual::new(g)
        })
        .collect()
}

/// Index of the fittest of `size` members drawn uniformly with replacement.
/// The first drawn wins ties.
pub fn tournament_select<R: Rng>(population: &[Individual], size: usize, rng: &mut R) -> Result<usize> {
    if let Some(i) = population.iter().position(|ind| ind.fitness.is_none()) {
        return Err(NbvError::UnevaluatedFitness(i));
    }
    if population.is_empty() {
        return Err(NbvError::InvalidConfig("empty population".into()));
    }
    let mut best = rng.random_range(0..population.len());
    for _ in 1..size.max(1) {
        let i = rng.random_range(0..population.len());
        if population[i].fitness > population[best].fitness {
            best = i;
        }
    }
    Ok(best)
}

/// Swaps genes `[p, q)` between the parents.
pub fn two_point_crossover_at(a: &Genome, b: &Genome, p: usize, q: usize) -> (Genome, Genome) {
    let (mut c, mut d) = (*a, *b);
    for k in p.min(GENES)..q.min(GENES) {
        std::mem::swap(&mut c[k], &mut d[k]);
    }
    (c, d)
}

/// Two-point crossover with cut points `1 ≤ p < q ≤ GENES`.
pub fn two_point_crossover<R: Rng>(a: &Genome, b: &Genome, rng: &mut R) -> (Genome, Genome) {
    let p = rng.random_range(1..=GENES);
    let mut q = rng.random_range(1..GENES);
    let (p, q) = if q >= p {
        q += 1;
        (p, q)
    } else {
        (q, p)
    };
    two_point_crossover_at(a, b, p, q)
}

/// Perturbs each gene with probability `gene_prob` by `N(0, sigma[k]²)`, then
/// clamps to `bounds`.
pub fn gaussian_mutate<R: Rng>(
    g: &Genome,
    sigma: &Genome,
    gene_prob: f64,
    bounds: &PoseBounds,
    rng: &mut R,
) -> Genome {
    let mut out = *g;
    for k in 0..GENES {
        if rng.random::<f64>() < gene_prob {
            let z: f64 = rng.sample(StandardNormal);
            out[k] += sigma[k] * z;
        }
    }
    bounds.clamp(&mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub max_fitness: f64,
    pub mean_fitness: f64,
    /// Best fitness seen up to and including this generation.
    pub best_ever: f64,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub best: Genome,
    pub best_fitness: f64,
    /// Generation 0 is the random initial population.
    pub stats: Vec<GenerationStats>,
    pub evaluations: usize,
}

fn generation_rng(seed: u64, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation as u64);
    rng
}

/// Maximizes `fitness` over `bounds`.
///
/// Evaluations within a generation run in parallel; the outcome depends only
/// on `cfg.seed`. NaN fitness values rank below every number.
pub fn run<F, E>(fitness: F, bounds: &PoseBounds, cfg: &EvolutionConfig) -> std::result::Result<EvolutionResult, E>
where
    F: Fn(&Genome) -> std::result::Result<f64, E> + Sync,
    E: Send + From<NbvError>,
{
    cfg.validate()?;
    let sigma = cfg.sigmas(bounds);
    let mut evaluations = 0usize;

    let evaluate = |pop: &mut Vec<Individual>, evaluations: &mut usize| -> std::result::Result<(), E> {
        let pending: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_none()).collect();
        let values = pending
            .par_iter()
            .map(|&i| fitness(&pop[i].genome).map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v }))
            .collect::<std::result::Result<Vec<f64>, E>>()?;
        *evaluations += pending.len();
        for (i, v) in pending.into_iter().zip(values) {
            pop[i].fitness = Some(v);
        }
        Ok(())
    };

    let mut pop = initialize(bounds, cfg, &mut generation_rng(cfg.seed, 0));
    evaluate(&mut pop, &mut evaluations)?;

    let mut best = pop[0].genome;
    let mut best_fitness = f64::NEG_INFINITY;
    let mut stats = Vec::with_capacity(cfg.generations + 1);
    let mut record = |generation: usize, pop: &[Individual], best: &mut Genome, best_fitness: &mut f64| {
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for ind in pop {
            let f = ind.fitness.unwrap_or(f64::NEG_INFINITY);
            sum += f;
            if f > max {
                max = f;
            }
            if f > *best_fitness {
                *best_fitness = f;
                *best = ind.genome;
            }
        }
        stats.push(GenerationStats {
            generation,
            max_fitness: max,
            mean_fitness: sum / pop.len() as f64,
            best_ever: *best_fitness,
        });
    };
    record(0, &pop, &mut best, &mut best_fitness);

    for generation in 1..=cfg.generations {
        let mut rng = generation_rng(cfg.seed, generation);
        let mut offspring = Vec::with_capacity(pop.len());
        for _ in 0..pop.len() {
            let i = tournament_select(&pop, cfg.tournament_size, &mut rng)?;
            offspring.push(pop[i].clone());
        }
        for pair in offspring.chunks_exact_mut(2) {
            if rng.random::<f64>() < cfg.crossover_rate {
                let (c, d) = two_point_crossover(&pair[0].genome, &pair[1].genome, &mut rng);
                pair[0] = Individual::new(c);
                pair[1] = Individual::new(d);
            }
        }
        for ind in &mut offspring {
            if rng.random::<f64>() < cfg.mutation_rate {
                *ind = Individual::new(gaussian_mutate(
                    &ind.genome,
                    &sigma,
                    cfg.gene_mutation_prob,
                    bounds,
                    &mut rng,
                ));
            }
        }
        evaluate(&mut offspring, &mut evaluations)?;
        pop = offspring;
        record(generation, &pop, &mut best, &mut best_fitness);
    }

    Ok(EvolutionResult {
        best,
        best_fitness,
        stats,
        evaluations,
    })
}

/// Per-generation CSV `generation,max_fitness,mean_fitness`.
pub fn write_stats_csv(path: &Path, stats: &[GenerationStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "max_fitness", "mean_fitness"])?;
    for s in stats {
        w.write_record([
            s.generation.to_string(),
            s.max_fitness.to_string(),
            s.mean_fitness.to_string(),
        ])?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}
