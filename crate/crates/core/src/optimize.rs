//! Genetic-algorithm hyperparameter search.
//!
//! Genomes live in the unit cube; each gene decodes linearly or
//! logarithmically into its parameter range. One generation keeps the best
//! `elitism_frac` of the population unchanged and fills the rest with
//! children of size-2 tournament winners (uniform crossover), each child
//! having one gene redrawn with probability `mutation_prob`. The search stops
//! as soon as a generation's best fitness does not improve on the previous
//! generation's best (or at the generation cap). Lower fitness is better.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParam {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
}

impl SearchParam {
    pub fn decode(&self, gene: f64) -> f64 {
        let g = gene.clamp(0.0, 1.0);
        match self.scale {
            Scale::Linear => self.low + g * (self.high - self.low),
            Scale::Logarithmic => (self.low.ln() + g * (self.high.ln() - self.low.ln())).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<SearchParam>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), Error> {
        for (i, p) in self.params.iter().enumerate() {
            if !(p.low < p.high) {
                return Err(Error::invalid(format!("search.{}", p.name), "need low < high"));
            }
            if p.scale == Scale::Logarithmic && p.low <= 0.0 {
                return Err(Error::invalid(format!("search.{}", p.name), "logarithmic range must be positive"));
            }
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::invalid(format!("search.{}", p.name), "duplicate name"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// `(name, value)` pairs for a genome.
    pub fn decode<'a>(&'a self, genome: &Genome) -> Vec<(&'a str, f64)> {
        self.params.iter().zip(&genome.0).map(|(p, &g)| (p.name.as_str(), p.decode(g))).collect()
    }
}

/// Genes in `[0, 1]`, one per search parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    fn random(n: usize, rng: &mut Rng) -> Self {
        Genome((0..n).map(|_| rng.random::<f64>()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub mutation_prob: f64,
    pub elitism_frac: f64,
    pub seeds_per_fitness: usize,
    /// Hard cap on the number of generations (generation 0 included).
    pub max_generations: Option<usize>,
    pub seed: u64,
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.elitism_frac > 0.0 && self.elitism_frac < 1.0) {
            return Err(Error::invalid("ga.elitism_frac", "must lie in (0, 1)"));
        }
        if self.n_elite() < 1 || self.population < 2 {
            return Err(Error::invalid("ga.population", "need population >= 2 and at least one elite"));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::invalid("ga.mutation_prob", "must be a probability"));
        }
        if self.seeds_per_fitness == 0 {
            return Err(Error::invalid("ga.seeds_per_fitness", "must be positive"));
        }
        if self.max_generations == Some(0) {
            return Err(Error::invalid("ga.max_generations", "must be positive"));
        }
        Ok(())
    }

    pub fn n_elite(&self) -> usize {
        ((self.population as f64 * self.elitism_frac) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
    pub best_so_far: f64,
    /// Individuals whose fitness was the degenerate-run penalty.
    pub penalized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Genome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

/// Fitness of a degenerate individual: the worst finite fitness seen so far
/// (at least 1, the score of the centroid predictor) plus this margin.
pub const PENALTY_MARGIN: f64 = 1.0;

struct Scored {
    genome: Genome,
    fitness: f64,
    penalized: bool,
}

fn evaluate<F>(genomes: Vec<Genome>, fitness: &F, worst_seen: &mut f64) -> Vec<Scored>
where
    F: Fn(&Genome) -> Option<f64> + Sync,
{
    let raw: Vec<Option<f64>> = genomes.par_iter().map(fitness).collect();
    for f in raw.iter().flatten() {
        if f.is_finite() && *f > *worst_seen {
            *worst_seen = *f;
        }
    }
    let penalty = *worst_seen + PENALTY_MARGIN;
    genomes
        .into_iter()
        .zip(raw)
        .map(|(genome, f)| match f {
            Some(v) if v.is_finite() => Scored { genome, fitness: v, penalized: false },
            _ => Scored { genome, fitness: penalty, penalized: true },
        })
        .collect()
}

fn tournament<'a>(pop: &'a [Scored], rng: &mut Rng) -> &'a Genome {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if b.fitness < a.fitness {
        &b.genome
    } else {
        &a.genome
    }
}

/// Runs the search. `fitness` returns `None` for a degenerate run. Individuals
/// of a generation are evaluated in parallel; results are identical to a
/// sequential evaluation.
pub fn ga_run<F>(space: &SearchSpace, config: &GaConfig, fitness: F) -> Result<GaResult, Error>
where
    F: Fn(&Genome) -> Option<f64> + Sync,
{
    space.validate()?;
    config.validate()?;
    let mut rng = rng::stream(config.seed, "ga");
    let n_genes = space.len();
    let mut worst_seen = 1.0f64;

    let initial: Vec<Genome> = (0..config.population).map(|_| Genome::random(n_genes, &mut rng)).collect();
    let mut evaluations = initial.len();
    let mut pop = evaluate(initial, &fitness, &mut worst_seen);
    sort_population(&mut pop);

    let mut history = vec![stats(0, &pop, f64::INFINITY)];
    let mut best = pop[0].genome.clone();
    let mut best_fitness = pop[0].fitness;

    let n_elite = config.n_elite();
    loop {
        let generation = history.len();
        if config.max_generations.is_some_and(|cap| generation >= cap) {
            break;
        }
        let children: Vec<Genome> = (0..config.population - n_elite)
            .map(|_| {
                let a = tournament(&pop, &mut rng).clone();
                let b = tournament(&pop, &mut rng);
                let mut child =
                    Genome(a.0.iter().zip(&b.0).map(|(x, y)| if rng.random::<bool>() { *x } else { *y }).collect());
                if n_genes > 0 && rng.random::<f64>() < config.mutation_prob {
                    let g = rng.random_range(0..n_genes);
                    child.0[g] = rng.random::<f64>();
                }
                child
            })
            .collect();
        evaluations += children.len();
        let scored = evaluate(children, &fitness, &mut worst_seen);
        pop.truncate(n_elite);
        pop.extend(scored);
        sort_population(&mut pop);

        let previous_best = history.last().unwrap().best;
        let s = stats(generation, &pop, history.last().unwrap().best_so_far);
        history.push(s);
        if pop[0].fitness < best_fitness {
            best_fitness = pop[0].fitness;
            best = pop[0].genome.clone();
        }
        if !(s.best < previous_best) {
            break;
        }
    }
    Ok(GaResult { best, best_fitness, history, evaluations })
}

fn sort_population(pop: &mut [Scored]) {
    // stable: ties keep elites ahead of newcomers
    pop.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

fn stats(generation: usize, pop: &[Scored], best_so_far: f64) -> GenerationStats {
    let best = pop[0].fitness;
    let worst = pop[pop.len() - 1].fitness;
    let mean = pop.iter().map(|s| s.fitness).sum::<f64>() / pop.len() as f64;
    GenerationStats {
        generation,
        best,
        mean,
        worst,
        best_so_far: best_so_far.min(best),
        penalized: pop.iter().filter(|s| s.penalized).count(),
    }
}
