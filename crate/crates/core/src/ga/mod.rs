//! Template-constrained genetic search over dense network architectures.
//!
//! A template names, per layer slot, the admissible layer kinds, activations
//! and sizes, plus optimizer and initializer choices. Genomes are concrete
//! picks under a template; every operator here maps template-satisfying genomes
//! to template-satisfying genomes.

mod crossover;
mod evolve;
mod genome;
mod template;

pub use crossover::{bitwise_majority, bitwise_vote, crossover, modal_choice};
pub use evolve::{
    evaluate_fitness, evolve, evolve_with, EvolutionConfig, GenerationStats, Individual,
    SearchOutcome, SearchState,
};
pub use genome::{mutate, sample_genome, Gene, Genome};
pub use template::{ArchTemplate, LayerSlot, LogGrid, OptimizerKind, OptimizerSpace, SizeSpec};
