use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossover::crossover;
use super::genome::{mutate, sample_genome, Genome};
use super::template::ArchTemplate;
use crate::dataset::WindowDataset;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::nn::{evaluate_mse, train, TrainConfig};

const STREAM_INIT: u64 = 0x1417;
const STREAM_BREED: u64 = 0xb4ee;
const STREAM_FITNESS: u64 = 0xf175;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_death_age")]
    pub death_age: u32,
    #[serde(default = "default_parents")]
    pub parents: usize,
    pub generations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub elitism: bool,
    /// Training epochs per fitness evaluation.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// When positive, fitness is the MSE on this trailing fraction of the
    /// windows, which are then excluded from training.
    #[serde(default)]
    pub holdout_fraction: f64,
}

fn default_population() -> usize {
    10
}
fn default_death_age() -> u32 {
    3
}
fn default_parents() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_epochs() -> usize {
    5
}
fn default_batch() -> usize {
    32
}

impl EvolutionConfig {
    pub fn new(generations: usize, seed: u64) -> Self {
        Self {
            population: default_population(),
            death_age: default_death_age(),
            parents: default_parents(),
            generations,
            seed,
            elitism: true,
            epochs: default_epochs(),
            batch_size: default_batch(),
            holdout_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::Config("search.population must be at least 1".into()));
        }
        if self.parents < 2 {
            return Err(Error::Config("search.parents must be at least 2".into()));
        }
        if self.generations == 0 {
            return Err(Error::Config(
                "search.generations must be at least 1".into(),
            ));
        }
        if self.death_age == 0 {
            return Err(Error::Config("search.death_age must be at least 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "search.epochs and search.batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(
                "search.holdout_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub genome: Genome,
    pub age: u32,
    /// Final training MSE; `None` until evaluated, `+inf` if training diverged.
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_genome_id: String,
}

/// Everything needed to continue a search after generation `generation - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    /// Next generation to run.
    pub generation: usize,
    pub population: Vec<Individual>,
    pub best: Option<Individual>,
    pub history: Vec<GenerationStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Individual,
    pub history: Vec<GenerationStats>,
    /// Every individual evaluated by this call, in evaluation order.
    pub evaluated: Vec<Individual>,
}

/// Trains the genome's network under the budget and returns its final-epoch
/// mean training MSE (or holdout MSE when a holdout fraction is set).
/// Divergence yields `+inf` rather than an error.
pub fn evaluate_fitness(
    genome: &Genome,
    template: &ArchTemplate,
    data: &WindowDataset,
    epochs: usize,
    batch_size: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData(
            "fitness needs at least one window".into(),
        ));
    }
    let spec = data.spec;
    let m = data.n_tags;
    let mut net =
        genome.build_network(template, (spec.input_len, m), (spec.forecast_len, m), seed)?;
    let n_hold = ((data.len() as f64) * holdout_fraction).floor() as usize;
    let (fit, hold) = if n_hold > 0 && n_hold < data.len() {
        let cut = data.len() - n_hold;
        (data.subset(0, cut), Some(data.subset(cut, data.len())))
    } else {
        (data.clone(), None)
    };
    let config = TrainConfig {
        epochs,
        batch_size,
        seed: derive_seed(seed, &[1]),
        optimizer: genome.optimizer_config(template),
    };
    let history = match train(&mut net, &fit, &config) {
        Ok(h) => h,
        Err(Error::Diverged(_)) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let fitness = match hold {
        Some(h) => evaluate_mse(&net, &h)?,
        None => *history.last().expect("epochs >= 1"),
    };
    Ok(if fitness.is_finite() {
        fitness
    } else {
        f64::INFINITY
    })
}

fn fitness_of(ind: &Individual) -> f64 {
    ind.fitness.unwrap_or(f64::INFINITY)
}

fn best_in(pop: &[Individual]) -> Option<&Individual> {
    pop.iter()
        .min_by(|a, b| fitness_of(a).total_cmp(&fitness_of(b)))
}

fn initial_state(template: &ArchTemplate, config: &EvolutionConfig) -> Result<SearchState> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_INIT]));
    let population = (0..config.population)
        .map(|slot| {
            Ok(Individual {
                id: format!("g000-{slot:02}"),
                genome: sample_genome(template, &mut rng)?,
                age: 0,
                fitness: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchState {
        generation: 0,
        population,
        best: None,
        history: Vec::new(),
    })
}

/// Runs the search from scratch. See [`evolve_with`].
pub fn evolve(
    template: &ArchTemplate,
    data: &WindowDataset,
    config: &EvolutionConfig,
) -> Result<SearchOutcome> {
    evolve_with(template, data, config, None, |_, _| Ok(()))
}

/// Generation loop: evaluate unevaluated individuals (in parallel), record the
/// best, age everyone, retire those at the death age (the elite survives when
/// elitism is on), then refill by rank-selected multi-parent crossover
/// followed by one mutation.
///
/// `on_generation` sees the state after each completed generation together
/// with the individuals evaluated in it; returning an error stops the search.
/// Passing a saved state in `resume` continues from its next generation.
pub fn evolve_with(
    template: &ArchTemplate,
    data: &WindowDataset,
    config: &EvolutionConfig,
    resume: Option<SearchState>,
    mut on_generation: impl FnMut(&SearchState, &[Individual]) -> Result<()>,
) -> Result<SearchOutcome> {
    config.validate()?;
    template.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData(
            "search needs at least one window".into(),
        ));
    }
    let mut state = match resume {
        Some(s) => {
            if let Some(bad) = s.population.iter().find(|i| !i.genome.satisfies(template)) {
                return Err(Error::Config(format!(
                    "resumed individual {} does not satisfy the template",
                    bad.id
                )));
            }
            s
        }
        None => initial_state(template, config)?,
    };
    let mut evaluated_all = Vec::new();

    while state.generation < config.generations {
        let generation = state.generation;
        let pending: Vec<usize> = (0..state.population.len())
            .filter(|&i| state.population[i].fitness.is_none())
            .collect();
        let scores = pending
            .par_iter()
            .map(|&slot| {
                let seed = derive_seed(
                    config.seed,
                    &[STREAM_FITNESS, generation as u64, slot as u64],
                );
                evaluate_fitness(
                    &state.population[slot].genome,
                    template,
                    data,
                    config.epochs,
                    config.batch_size,
                    config.holdout_fraction,
                    seed,
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut evaluated = Vec::with_capacity(pending.len());
        for (&slot, fitness) in pending.iter().zip(scores) {
            state.population[slot].fitness = Some(fitness);
            evaluated.push(state.population[slot].clone());
        }

        let current = best_in(&state.population)
            .expect("population non-empty")
            .clone();
        if state
            .best
            .as_ref()
            .is_none_or(|b| fitness_of(&current) < fitness_of(b))
        {
            state.best = Some(current);
        }
        let best = state.best.as_ref().expect("set above");
        let finite: Vec<f64> = state
            .population
            .iter()
            .map(fitness_of)
            .filter(|f| f.is_finite())
            .collect();
        let mean = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        state.history.push(GenerationStats {
            generation,
            best_fitness: fitness_of(best),
            mean_fitness: mean,
            best_genome_id: best.id.clone(),
        });

        if generation + 1 < config.generations {
            breed(template, config, &mut state, generation + 1)?;
        }
        state.generation += 1;
        evaluated_all.extend(evaluated.iter().cloned());
        on_generation(&state, &evaluated)?;
    }

    let best = state
        .best
        .clone()
        .ok_or_else(|| Error::Config("search state has no evaluated individual".into()))?;
    Ok(SearchOutcome {
        best,
        history: state.history,
        evaluated: evaluated_all,
    })
}

fn breed(
    template: &ArchTemplate,
    config: &EvolutionConfig,
    state: &mut SearchState,
    next_generation: usize,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        &[STREAM_BREED, next_generation as u64],
    ));
    let elite_id = best_in(&state.population).map(|b| b.id.clone());
    for ind in &mut state.population {
        ind.age += 1;
    }
    state.population.retain(|ind| {
        ind.age < config.death_age || (config.elitism && Some(&ind.id) == elite_id.as_ref())
    });

    // rank 0 is the fittest; selection weight N_living - rank
    let mut ranked: Vec<&Individual> = state.population.iter().collect();
    ranked.sort_by(|a, b| {
        fitness_of(a)
            .total_cmp(&fitness_of(b))
            .then_with(|| a.id.cmp(&b.id))
    });
    let n_living = ranked.len();
    let weights: Vec<usize> = (0..n_living).map(|r| n_living - r).collect();
    let mut children = Vec::new();
    for slot in n_living..config.population {
        let genome = if n_living == 0 {
            sample_genome(template, &mut rng)?
        } else {
            let dist = WeightedIndex::new(&weights).expect("positive weights");
            let parents: Vec<Genome> = (0..config.parents)
                .map(|_| ranked[dist.sample(&mut rng)].genome.clone())
                .collect();
            let child = crossover(&parents, template, &mut rng)?;
            mutate(&child, template, &mut rng)?
        };
        children.push(Individual {
            id: format!("g{next_generation:03}-{slot:02}"),
            genome,
            age: 0,
            fitness: None,
        });
    }
    state.population.extend(children);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{TimeSeriesFrame, WindowSpec};
    use crate::ga::genome::tests::{singleton_template, toy_template};
    use crate::ga::template::OptimizerKind;
    use ndarray::Array2;

    fn data() -> WindowDataset {
        let s = 120;
        let ts = (0..s).map(|t| t as f64).collect();
        let v = Array2::from_shape_fn((s, 2), |(t, i)| ((t as f64) * 0.2 + i as f64).sin());
        let frame = TimeSeriesFrame::new(ts, v, vec!["a".into(), "b".into()]).unwrap();
        WindowDataset::from_frame(&frame, &WindowSpec::new(6, 2, 2).unwrap()).unwrap()
    }

    fn small_config(generations: usize) -> EvolutionConfig {
        EvolutionConfig {
            population: 4,
            death_age: 3,
            parents: 3,
            generations,
            seed: 5,
            elitism: true,
            epochs: 3,
            batch_size: 16,
            holdout_fraction: 0.0,
        }
    }

    #[test]
    fn degenerate_search() {
        let t = singleton_template();
        let cfg = EvolutionConfig {
            population: 1,
            generations: 1,
            ..small_config(1)
        };
        let out = evolve(&t, &data(), &cfg).unwrap();
        assert_eq!(out.best.genome.layers.len(), 1);
        assert_eq!(out.best.genome.layers[0].size, 6);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn fitness_improves_on_untrained() {
        let t = singleton_template();
        let d = data();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = sample_genome(&t, &mut rng).unwrap();
        let net = g.build_network(&t, (6, 2), (2, 2), 77).unwrap();
        let untrained = evaluate_mse(&net, &d).unwrap();
        let f1 = evaluate_fitness(&g, &t, &d, 30, 8, 0.0, 77).unwrap();
        let f2 = evaluate_fitness(&g, &t, &d, 30, 8, 0.0, 77).unwrap();
        assert_eq!(f1.to_bits(), f2.to_bits());
        assert!(f1 < untrained);
    }

    #[test]
    fn divergence_is_infinite_fitness() {
        let mut t = singleton_template();
        t.optimizer.kinds = vec![OptimizerKind::Sgd];
        t.optimizer.learning_rate = crate::ga::LogGrid {
            min: 1e8,
            max: 1e8,
            steps: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = sample_genome(&t, &mut rng).unwrap();
        assert_eq!(
            evaluate_fitness(&g, &t, &data(), 20, 4, 0.0, 1).unwrap(),
            f64::INFINITY
        );
        let out = evolve(
            &t,
            &data(),
            &EvolutionConfig {
                epochs: 20,
                ..small_config(2)
            },
        )
        .unwrap();
        assert_eq!(out.history.len(), 2);
    }

    #[test]
    fn elitist_history_is_monotone_and_reproducible() {
        let t = toy_template();
        let cfg = small_config(4);
        let a = evolve(&t, &data(), &cfg).unwrap();
        let b = evolve(&t, &data(), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
        for w in a.history.windows(2) {
            assert!(w[1].best_fitness <= w[0].best_fitness);
        }
        assert!(a.evaluated.iter().all(|i| i.genome.satisfies(&t)));
    }

    #[test]
    fn death_age_bound() {
        let t = toy_template();
        let cfg = EvolutionConfig {
            death_age: 2,
            ..small_config(6)
        };
        evolve_with(&t, &data(), &cfg, None, |state, _| {
            let over: Vec<_> = state
                .population
                .iter()
                .filter(|i| i.age >= cfg.death_age)
                .collect();
            assert!(over.len() <= 1, "{over:?}");
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let t = toy_template();
        let cfg = small_config(4);
        let full = evolve(&t, &data(), &cfg).unwrap();
        let mut saved = None;
        let _ = evolve_with(&t, &data(), &cfg, None, |state, _| {
            if state.generation == 2 {
                saved = Some(state.clone());
                return Err(Error::Config("interrupted".into()));
            }
            Ok(())
        });
        let resumed = evolve_with(&t, &data(), &cfg, saved, |_, _| Ok(())).unwrap();
        assert_eq!(resumed.history, full.history);
        assert_eq!(resumed.best, full.best);
    }

    #[test]
    fn invalid_config() {
        let t = toy_template();
        assert!(evolve(
            &t,
            &data(),
            &EvolutionConfig {
                parents: 1,
                ..small_config(1)
            }
        )
        .is_err());
        assert!(evolve(
            &t,
            &data(),
            &EvolutionConfig {
                generations: 0,
                ..small_config(1)
            }
        )
        .is_err());
    }
}
