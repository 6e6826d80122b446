//! NSGA-II: elitist non-dominated sorting genetic algorithm used to
//! maximize several acquisition objectives at once over the unit cube.
//! Genomes live in [0,1]^dim; all objectives are maximized.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: DVector<f64>,
    pub objectives: Vec<f64>,
    rank: usize,
    crowding: f64,
}

/// `a` dominates `b` when it is at least as good everywhere and strictly
/// better somewhere (maximization).
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

fn genomes_matrix(pop: &[Individual]) -> DMatrix<f64> {
    let dim = pop[0].genome.len();
    DMatrix::from_fn(pop.len(), dim, |i, j| pop[i].genome[j])
}

fn fast_non_dominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if dominates(&pop[i].objectives, &pop[j].objectives) {
                dominated_by[i].push(j);
            } else if dominates(&pop[j].objectives, &pop[i].objectives) {
                domination_count[i] += 1;
            }
        }
        if domination_count[i] == 0 {
            pop[i].rank = 0;
            fronts[0].push(i);
        }
    }
    let mut f = 0;
    while !fronts[f].is_empty() {
        let mut next = Vec::new();
        for &i in &fronts[f] {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    pop[j].rank = f + 1;
                    next.push(j);
                }
            }
        }
        f += 1;
        fronts.push(next);
    }
    fronts.pop(); // trailing empty front
    fronts
}

fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() < 3 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let n_obj = pop[front[0]].objectives.len();
    for k in 0..n_obj {
        let mut order: Vec<usize> = front.to_vec();
        order.sort_by(|&a, &b| {
            pop[a].objectives[k]
                .partial_cmp(&pop[b].objectives[k])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let lo = pop[order[0]].objectives[k];
        let hi = pop[order[order.len() - 1]].objectives[k];
        pop[order[0]].crowding = f64::INFINITY;
        pop[order[order.len() - 1]].crowding = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap =
                (pop[order[w + 1]].objectives[k] - pop[order[w - 1]].objectives[k]) / span;
            pop[order[w]].crowding += gap;
        }
    }
}

fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if pop[a].rank < pop[b].rank
        || (pop[a].rank == pop[b].rank && pop[a].crowding > pop[b].crowding)
    {
        a
    } else {
        b
    }
}

const SBX_ETA: f64 = 15.0;
const MUT_ETA: f64 = 20.0;
const CROSSOVER_P: f64 = 0.9;

fn sbx_pair(x1: f64, x2: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u: f64 = rng.gen();
    let beta = if u <= 0.5 {
        (2.0 * u).powf(1.0 / (SBX_ETA + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (SBX_ETA + 1.0))
    };
    let c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2);
    let c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2);
    (c1.clamp(0.0, 1.0), c2.clamp(0.0, 1.0))
}

fn polynomial_mutation(x: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    let delta = if u < 0.5 {
        (2.0 * u).powf(1.0 / (MUT_ETA + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (MUT_ETA + 1.0))
    };
    (x + delta).clamp(0.0, 1.0)
}

fn make_children(pop: &[Individual], rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let dim = pop[0].genome.len();
    let mut children = Vec::with_capacity(pop.len());
    while children.len() < pop.len() {
        let p1 = &pop[tournament(pop, rng)].genome;
        let p2 = &pop[tournament(pop, rng)].genome;
        let mut c1 = p1.clone();
        let mut c2 = p2.clone();
        if rng.gen::<f64>() < CROSSOVER_P {
            for j in 0..dim {
                if rng.gen::<f64>() < 0.5 {
                    let (a, b) = sbx_pair(p1[j], p2[j], rng);
                    c1[j] = a;
                    c2[j] = b;
                }
            }
        }
        for j in 0..dim {
            if rng.gen::<f64>() < 1.0 / dim as f64 {
                c1[j] = polynomial_mutation(c1[j], rng);
            }
            if rng.gen::<f64>() < 1.0 / dim as f64 {
                c2[j] = polynomial_mutation(c2[j], rng);
            }
        }
        children.push(c1);
        if children.len() < pop.len() {
            children.push(c2);
        }
    }
    children
}

/// Run NSGA-II and return the final non-dominated front. `evaluate` maps a
/// matrix of genomes (one per row) to their objective vectors; every
/// objective is maximized.
pub fn nsga2<F>(
    dim: usize,
    population: usize,
    generations: usize,
    evaluate: F,
    rng: &mut ChaCha8Rng,
) -> Vec<Individual>
where
    F: Fn(&DMatrix<f64>) -> Vec<Vec<f64>>,
{
    assert!(population >= 4, "population too small");
    let mut pop: Vec<Individual> = (0..population)
        .map(|_| Individual {
            genome: DVector::from_fn(dim, |_, _| rng.gen_range(0.0..1.0)),
            objectives: Vec::new(),
            rank: 0,
            crowding: 0.0,
        })
        .collect();
    let objs = evaluate(&genomes_matrix(&pop));
    for (ind, o) in pop.iter_mut().zip(objs) {
        ind.objectives = o;
    }
    let fronts = fast_non_dominated_sort(&mut pop);
    for front in &fronts {
        assign_crowding(&mut pop, front);
    }

    for _gen in 0..generations {
        let child_genomes = make_children(&pop, rng);
        let child_matrix = DMatrix::from_fn(child_genomes.len(), dim, |i, j| child_genomes[i][j]);
        let child_objs = evaluate(&child_matrix);
        let mut combined = pop;
        for (genome, objectives) in child_genomes.into_iter().zip(child_objs) {
            combined.push(Individual {
                genome,
                objectives,
                rank: 0,
                crowding: 0.0,
            });
        }
        let fronts = fast_non_dominated_sort(&mut combined);
        for front in &fronts {
            assign_crowding(&mut combined, front);
        }
        let mut next: Vec<Individual> = Vec::with_capacity(population);
        for front in &fronts {
            if next.len() + front.len() <= population {
                next.extend(front.iter().map(|&i| combined[i].clone()));
            } else {
                let mut rest: Vec<usize> = front.clone();
                rest.sort_by(|&a, &b| {
                    combined[b]
                        .crowding
                        .partial_cmp(&combined[a].crowding)
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                for &i in rest.iter().take(population - next.len()) {
                    next.push(combined[i].clone());
                }
                break;
            }
        }
        pop = next;
    }

    let fronts = fast_non_dominated_sort(&mut pop);
    for front in &fronts {
        assign_crowding(&mut pop, front);
    }
    fronts
        .first()
        .map(|front| front.iter().map(|&i| pop[i].clone()).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn two_bowl_objectives(genomes: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..genomes.nrows())
            .map(|i| {
                let x = genomes[(i, 0)];
                vec![-(x - 0.2) * (x - 0.2), -(x - 0.8) * (x - 0.8)]
            })
            .collect()
    }

    #[test]
    fn front_spans_the_trade_off_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let front = nsga2(1, 40, 40, two_bowl_objectives, &mut rng);
        assert!(!front.is_empty());
        let xs: Vec<f64> = front.iter().map(|ind| ind.genome[0]).collect();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(min < 0.25, "front should reach the first optimum, min {min}");
        assert!(max > 0.75, "front should reach the second optimum, max {max}");
        // Points outside [0.2, 0.8] are dominated by the nearest endpoint.
        assert!(xs.iter().all(|&x| (0.15..=0.85).contains(&x)));
    }

    #[test]
    fn returned_front_is_mutually_non_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let front = nsga2(2, 24, 15, |g| {
            (0..g.nrows())
                .map(|i| {
                    let (x, y) = (g[(i, 0)], g[(i, 1)]);
                    vec![x, -x + 0.3 * y, y]
                })
                .collect()
        }, &mut rng);
        for a in &front {
            for b in &front {
                assert!(
                    !dominates(&a.objectives, &b.objectives),
                    "front members must not dominate each other"
                );
            }
        }
        for ind in &front {
            assert!(ind.genome.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn runs_are_deterministic_for_a_fixed_seed() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            nsga2(1, 16, 10, two_bowl_objectives, &mut rng)
                .iter()
                .map(|i| i.genome[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
