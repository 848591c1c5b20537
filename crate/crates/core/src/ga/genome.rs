use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::template::{ArchTemplate, LayerSlot, OptimizerKind, SizeSpec};
use crate::error::{Error, Result};
use crate::nn::{
    init_network_with, Activation, Initializer, LayerConfig, LayerKind, Network, OptimizerConfig,
};

const SAMPLE_RETRIES: usize = 64;

/// One hidden layer. `size` is the unit count for Dense layers and an index
/// into the slot's `dropout_rates` for Dropout layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gene {
    pub kind: LayerKind,
    pub activation: Activation,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub optimizer: OptimizerKind,
    /// Index into the template's learning-rate grid.
    pub learning_rate: u32,
    pub initializer: Initializer,
    pub layers: Vec<Gene>,
}

fn gene_admitted(slot: &LayerSlot, gene: &Gene) -> bool {
    slot.kinds.contains(&gene.kind)
        && slot.activations.contains(&gene.activation)
        && match gene.kind {
            LayerKind::Dropout => (gene.size as usize) < slot.dropout_rates.len(),
            _ => slot.units.admits(gene.size),
        }
}

impl Genome {
    /// Whether every field lies inside the template and the genome
    /// materialises into a trainable network.
    pub fn satisfies(&self, template: &ArchTemplate) -> bool {
        self.check(template).is_ok()
    }

    pub fn check(&self, template: &ArchTemplate) -> Result<()> {
        let n = self.layers.len();
        if n == 0 || n > template.max_layers {
            return Err(Error::Parameter(format!(
                "genome has {n} layers, template allows 1..={}",
                template.max_layers
            )));
        }
        if !template.optimizer.kinds.contains(&self.optimizer) {
            return Err(Error::Parameter(format!(
                "optimizer {:?} not in template",
                self.optimizer
            )));
        }
        if self.learning_rate >= template.optimizer.learning_rate.steps {
            return Err(Error::Parameter("learning-rate index outside grid".into()));
        }
        if !template.initializers.contains(&self.initializer) {
            return Err(Error::Parameter(format!(
                "initializer {:?} not in template",
                self.initializer
            )));
        }
        for (i, gene) in self.layers.iter().enumerate() {
            if !gene_admitted(template.slot(i), gene) {
                return Err(Error::Parameter(format!(
                    "layer {i} gene {gene:?} violates its slot"
                )));
            }
            if !gene.kind.is_implemented() {
                return Err(Error::UnimplementedLayer {
                    layer: i,
                    kind: gene.kind.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Hidden layers followed by the decoder emitting `output_width` values.
    pub fn layer_configs(&self, template: &ArchTemplate, output_width: usize) -> Vec<LayerConfig> {
        let mut configs: Vec<LayerConfig> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, g)| match g.kind {
                LayerKind::Dropout => {
                    LayerConfig::dropout(template.slot(i).dropout_rates[g.size as usize])
                }
                kind => LayerConfig {
                    kind,
                    activation: g.activation,
                    units: g.size as usize,
                    rate: 0.0,
                },
            })
            .collect();
        configs.push(LayerConfig::dense(output_width, template.output_activation));
        configs
    }

    pub fn build_network(
        &self,
        template: &ArchTemplate,
        input_dims: (usize, usize),
        output_dims: (usize, usize),
        seed: u64,
    ) -> Result<Network> {
        self.check(template)?;
        let configs = self.layer_configs(template, output_dims.0 * output_dims.1);
        init_network_with(&configs, input_dims, output_dims, self.initializer, seed)
    }

    pub fn optimizer_config(&self, template: &ArchTemplate) -> OptimizerConfig {
        let learning_rate = template.optimizer.learning_rate.value(self.learning_rate);
        match self.optimizer {
            OptimizerKind::Adam => OptimizerConfig::adam(learning_rate),
            OptimizerKind::Sgd => OptimizerConfig::Sgd { learning_rate },
        }
    }

    /// Short human-readable form, e.g. `adam@1.0e-3 glorot_uniform [dense:relu:64, dropout:-:0]`.
    pub fn describe(&self, template: &ArchTemplate) -> String {
        let layers: Vec<String> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, g)| match g.kind {
                LayerKind::Dropout => format!(
                    "dropout:{}",
                    template
                        .slot(i)
                        .dropout_rates
                        .get(g.size as usize)
                        .copied()
                        .unwrap_or(f64::NAN)
                ),
                k => format!(
                    "{}:{}:{}",
                    k.to_string().to_lowercase(),
                    g.activation,
                    g.size
                ),
            })
            .collect();
        format!(
            "{:?}@{:.1e} {:?} [{}]",
            self.optimizer,
            template.optimizer.learning_rate.value(self.learning_rate),
            self.initializer,
            layers.join(", ")
        )
        .to_lowercase()
    }
}

fn pick<T: Copy>(items: &[T], rng: &mut impl Rng) -> T {
    items[rng.random_range(0..items.len())]
}

fn sample_size(spec: &SizeSpec, rng: &mut impl Rng) -> u32 {
    match spec {
        SizeSpec::Range { min, max } => rng.random_range(*min..=*max),
        SizeSpec::Choices { choices, weights } if weights.is_empty() => pick(choices, rng),
        SizeSpec::Choices { choices, weights } => {
            let dist = WeightedIndex::new(weights).expect("validated weights");
            choices[dist.sample(rng)]
        }
    }
}

/// Draws a trainable gene for `slot`, retrying past unimplemented kinds.
pub(crate) fn sample_gene(slot: &LayerSlot, rng: &mut impl Rng) -> Result<Gene> {
    for _ in 0..SAMPLE_RETRIES {
        let kind = pick(&slot.kinds, rng);
        let activation = pick(&slot.activations, rng);
        let size = match kind {
            LayerKind::Dropout => rng.random_range(0..slot.dropout_rates.len() as u32),
            _ => sample_size(&slot.units, rng),
        };
        if kind.is_implemented() {
            return Ok(Gene {
                kind,
                activation,
                size,
            });
        }
    }
    Err(Error::InfeasibleTemplate(format!(
        "no trainable layer kind drawn from {:?} after {SAMPLE_RETRIES} attempts",
        slot.kinds
    )))
}

/// Uniform draw: layer count in `[1, max_layers]`, then every field from its slot.
pub fn sample_genome(template: &ArchTemplate, rng: &mut impl Rng) -> Result<Genome> {
    template.validate()?;
    let n = rng.random_range(1..=template.max_layers);
    let optimizer = pick(&template.optimizer.kinds, rng);
    let learning_rate = rng.random_range(0..template.optimizer.learning_rate.steps);
    let initializer = pick(&template.initializers, rng);
    let layers = (0..n)
        .map(|i| sample_gene(template.slot(i), rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Genome {
        optimizer,
        learning_rate,
        initializer,
        layers,
    })
}

/// Copies `genome` and re-samples the full gene of one uniformly chosen layer.
pub fn mutate(genome: &Genome, template: &ArchTemplate, rng: &mut impl Rng) -> Result<Genome> {
    let mut child = genome.clone();
    let i = rng.random_range(0..child.layers.len());
    child.layers[i] = sample_gene(template.slot(i), rng)?;
    Ok(child)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ga::template::{LogGrid, OptimizerSpace};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy_template() -> ArchTemplate {
        ArchTemplate {
            max_layers: 3,
            optimizer: OptimizerSpace {
                kinds: vec![OptimizerKind::Adam, OptimizerKind::Sgd],
                learning_rate: LogGrid {
                    min: 1e-4,
                    max: 1e-2,
                    steps: 5,
                },
            },
            initializers: vec![Initializer::GlorotUniform, Initializer::HeUniform],
            output_activation: Activation::Linear,
            layers: vec![
                LayerSlot {
                    kinds: vec![LayerKind::Dense],
                    activations: vec![Activation::Relu, Activation::Tanh],
                    units: SizeSpec::Range { min: 4, max: 40 },
                    dropout_rates: vec![],
                },
                LayerSlot {
                    kinds: vec![LayerKind::Dense, LayerKind::Dropout, LayerKind::Gru],
                    activations: vec![Activation::Relu, Activation::Sigmoid, Activation::Linear],
                    units: SizeSpec::Choices {
                        choices: vec![8, 16, 32],
                        weights: vec![1.0, 2.0, 1.0],
                    },
                    dropout_rates: vec![0.1, 0.3],
                },
            ],
        }
    }

    pub(crate) fn singleton_template() -> ArchTemplate {
        ArchTemplate {
            max_layers: 1,
            optimizer: OptimizerSpace::default(),
            initializers: vec![Initializer::GlorotUniform],
            output_activation: Activation::Linear,
            layers: vec![LayerSlot {
                kinds: vec![LayerKind::Dense],
                activations: vec![Activation::Tanh],
                units: SizeSpec::Range { min: 6, max: 6 },
                dropout_rates: vec![],
            }],
        }
    }

    #[test]
    fn singleton_template_unique_genome() {
        let t = singleton_template();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = sample_genome(&t, &mut rng).unwrap();
        assert_eq!(
            g,
            Genome {
                optimizer: OptimizerKind::Adam,
                learning_rate: 0,
                initializer: Initializer::GlorotUniform,
                layers: vec![Gene {
                    kind: LayerKind::Dense,
                    activation: Activation::Tanh,
                    size: 6
                }],
            }
        );
        assert_eq!(mutate(&g, &t, &mut rng).unwrap(), g);
    }

    #[test]
    fn activation_support_covered() {
        let mut t = singleton_template();
        t.layers[0].activations = vec![Activation::Relu, Activation::Sigmoid];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seen: std::collections::HashSet<_> = (0..1000)
            .map(|_| sample_genome(&t, &mut rng).unwrap().layers[0].activation)
            .collect();
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn fixed_seed_same_sequence() {
        let t = toy_template();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..20)
                .map(|_| sample_genome(&t, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn unimplemented_only_slot_is_infeasible() {
        let mut t = singleton_template();
        t.layers[0].kinds = vec![LayerKind::Lstm, LayerKind::Convolutional];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_genome(&t, &mut rng),
            Err(Error::InfeasibleTemplate(_))
        ));
    }

    #[test]
    fn single_layer_mutation_resamples_that_layer() {
        let mut t = singleton_template();
        t.layers[0].units = SizeSpec::Range { min: 1, max: 1000 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_genome(&t, &mut rng).unwrap();
        let changed = (0..20).any(|_| mutate(&g, &t, &mut rng).unwrap().layers[0] != g.layers[0]);
        assert!(changed);
    }

    #[test]
    fn genome_builds_network() {
        let t = toy_template();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let g = sample_genome(&t, &mut rng).unwrap();
            let net = g.build_network(&t, (5, 2), (2, 2), 1).unwrap();
            assert_eq!(net.output_width(), 4);
            assert_eq!(net.layers().len(), g.layers.len() + 1);
        }
    }

    proptest! {
        #[test]
        fn sample_and_mutate_stay_in_template(seed in any::<u64>()) {
            let t = toy_template();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_genome(&t, &mut rng).unwrap();
            prop_assert!(g.satisfies(&t));
            let m = mutate(&g, &t, &mut rng).unwrap();
            prop_assert!(m.satisfies(&t));
            prop_assert_eq!(m.layers.len(), g.layers.len());
            prop_assert_eq!((m.optimizer, m.learning_rate, m.initializer), (g.optimizer, g.learning_rate, g.initializer));
            let differing = m.layers.iter().zip(&g.layers).filter(|(a, b)| a != b).count();
            prop_assert!(differing <= 1);
        }
    }
}
