use rand::Rng;

use super::genome::Genome;
use super::template::ArchTemplate;
use crate::error::{Error, Result};
use crate::nn::LayerKind;

/// Per-bit vote across `values`. A bit is set when more than half of the
/// voters set it; on an exact tie (even voter count) the bit is taken from
/// `tie_bits`. For three voters this is `(a & b) | (a & c) | (b & c)`.
pub fn bitwise_vote(values: &[u64], tie_bits: u64) -> u64 {
    let n = values.len();
    let mut out = 0u64;
    for bit in 0..64 {
        let mask = 1u64 << bit;
        let ones = values.iter().filter(|&&v| v & mask != 0).count();
        if 2 * ones > n || (2 * ones == n && n > 0 && tie_bits & mask != 0) {
            out |= mask;
        }
    }
    out
}

/// [`bitwise_vote`] with ties resolved to 0.
pub fn bitwise_majority(values: &[u64]) -> u64 {
    bitwise_vote(values, 0)
}

/// Most frequent value; ties are broken uniformly at random.
pub fn modal_choice<T: PartialEq + Copy>(values: &[T], rng: &mut impl Rng) -> T {
    assert!(!values.is_empty(), "modal_choice of nothing");
    let mut counts: Vec<(T, usize)> = Vec::new();
    for &v in values {
        match counts.iter_mut().find(|(u, _)| *u == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let best = counts.iter().map(|(_, c)| *c).max().expect("non-empty");
    let modes: Vec<T> = counts
        .into_iter()
        .filter(|(_, c)| *c == best)
        .map(|(v, _)| v)
        .collect();
    if modes.len() == 1 {
        modes[0]
    } else {
        modes[rng.random_range(0..modes.len())]
    }
}

fn vote_u32(values: &[u32], rng: &mut impl Rng) -> u32 {
    let wide: Vec<u64> = values.iter().map(|&v| u64::from(v)).collect();
    let tie = if values.len().is_multiple_of(2) {
        rng.random::<u64>()
    } else {
        0
    };
    // every voter fits in 32 bits, so the vote does too
    bitwise_vote(&wide, tie & u64::from(u32::MAX)) as u32
}

/// Multi-parent, layer-by-layer crossover.
///
/// Categorical fields (optimizer, initializer, layer kind, activation, layer
/// count) take the parents' modal value; numeric fields (layer size,
/// learning-rate grid index) take the bitwise vote, clamped back into the
/// template. Layers are aligned from the front; positions past a shorter
/// parent's end simply have fewer voters.
pub fn crossover(
    parents: &[Genome],
    template: &ArchTemplate,
    rng: &mut impl Rng,
) -> Result<Genome> {
    if parents.is_empty() {
        return Err(Error::Parameter(
            "crossover needs at least one parent".into(),
        ));
    }
    if let Some(i) = parents.iter().position(|p| !p.satisfies(template)) {
        return Err(Error::Parameter(format!(
            "parent {i} does not satisfy the template"
        )));
    }
    let lengths: Vec<usize> = parents.iter().map(|p| p.layers.len()).collect();
    let n_layers = modal_choice(&lengths, rng);
    let optimizer = modal_choice(
        &parents.iter().map(|p| p.optimizer).collect::<Vec<_>>(),
        rng,
    );
    let initializer = modal_choice(
        &parents.iter().map(|p| p.initializer).collect::<Vec<_>>(),
        rng,
    );
    let lr_votes: Vec<u32> = parents.iter().map(|p| p.learning_rate).collect();
    let learning_rate = vote_u32(&lr_votes, rng).min(template.optimizer.learning_rate.steps - 1);

    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let voters: Vec<_> = parents.iter().filter_map(|p| p.layers.get(i)).collect();
        let kind = modal_choice(&voters.iter().map(|g| g.kind).collect::<Vec<_>>(), rng);
        let activation = modal_choice(
            &voters.iter().map(|g| g.activation).collect::<Vec<_>>(),
            rng,
        );
        let sizes: Vec<u32> = voters
            .iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.size)
            .collect();
        let voted = vote_u32(&sizes, rng);
        let slot = template.slot(i);
        let size = match kind {
            LayerKind::Dropout => voted.min(slot.dropout_rates.len() as u32 - 1),
            _ => slot.units.clamp(voted),
        };
        layers.push(super::genome::Gene {
            kind,
            activation,
            size,
        });
    }
    let child = Genome {
        optimizer,
        learning_rate,
        initializer,
        layers,
    };
    debug_assert!(child.satisfies(template));
    Ok(child)
}
