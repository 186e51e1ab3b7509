//! Genetic search over whole trajectories with every point confined to its
//! slot's region.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::objective::TrajectoryProblem;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sim::{sample_walk, uniform_point_in, MobilityConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-slot probability of a Gaussian perturbation.
    pub mutation_rate: f64,
    pub tournament: usize,
    /// Standard deviation of a mutation, per coordinate (m).
    pub mutation_step: f64,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            generations: 50,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            tournament: 5,
            mutation_step: 0.5,
            elitism: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("ga: {m}")));
        if self.population < 2 || self.generations < 1 {
            return bad(format!(
                "need population >= 2 and generations >= 1, got {} and {}",
                self.population, self.generations
            ));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        if self.tournament == 0 || self.tournament > self.population {
            return bad(format!("tournament size {} must lie in 1..=population", self.tournament));
        }
        if self.elitism == 0 || self.elitism > self.population {
            return bad(format!("elitism {} must lie in 1..=population", self.elitism));
        }
        if !(self.mutation_step >= 0.0) {
            return bad("mutation_step must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Vec<Point>,
    pub fitness: f64,
    /// Best fitness of the initial population, then after every generation.
    pub trace: Vec<f64>,
}

impl GaOutcome {
    /// Number of generations whose best fitness fell below the previous one.
    pub fn regressions(&self) -> usize {
        self.trace.windows(2).filter(|w| w[1] < w[0]).count()
    }
}

#[derive(Clone)]
struct Individual {
    pts: Vec<Point>,
    ll: Vec<f64>,
    fitness: f64,
}

fn finish(problem: &TrajectoryProblem, pts: Vec<Point>, ll: Vec<f64>) -> Individual {
    let mut fitness: f64 = ll.iter().sum();
    for t in 1..pts.len() {
        fitness += problem.step_logprior(t, pts[t - 1], pts[t]);
    }
    if fitness.is_nan() {
        fitness = f64::NEG_INFINITY;
    }
    Individual { pts, ll, fitness }
}

fn evaluate(problem: &TrajectoryProblem, pts: Vec<Point>) -> Individual {
    let ll = pts
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            if problem.polygon(t).contains(p) {
                problem.slot_loglik(t, p)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    finish(problem, pts, ll)
}

/// Random walk through the window's label runs, each run starting at a uniform
/// point of its region.
fn random_walk<R: Rng + ?Sized>(problem: &TrajectoryProblem, mobility: &MobilityConfig, rng: &mut R) -> Vec<Point> {
    let labels = problem.labels();
    let mut pts = Vec::with_capacity(labels.len());
    let mut t = 0;
    while t < labels.len() {
        let mut end = t + 1;
        while end < labels.len() && labels[end] == labels[t] {
            end += 1;
        }
        let poly = problem.polygon(t);
        let start = uniform_point_in(poly, rng);
        pts.extend(sample_walk(poly, end - t, mobility, start, rng));
        t = end;
    }
    pts
}

fn tournament<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].fitness > pop[best].fitness || (pop[c].fitness == pop[best].fitness && c < best) {
            best = c;
        }
    }
    best
}

fn confine(problem: &TrajectoryProblem, t: usize, p: Point) -> Point {
    let poly = problem.polygon(t);
    if poly.contains(p) {
        p
    } else {
        poly.project(p)
    }
}

/// Evolves a population seeded with `init` plus region-constrained random walks
/// and returns the best trajectory found. With `elitism >= 1` the best fitness
/// never decreases between generations.
pub fn ga_search<R: Rng + ?Sized>(
    problem: &TrajectoryProblem,
    init: &[Point],
    config: &GaConfig,
    mobility: &MobilityConfig,
    rng: &mut R,
) -> Result<GaOutcome> {
    if init.len() != problem.len() {
        return Err(Error::InvalidArgument(format!(
            "initial trajectory has {} points for {} slots",
            init.len(),
            problem.len()
        )));
    }
    let size = config.population.max(1);
    let elites = config.elitism.clamp(1, size);
    let tour = config.tournament.clamp(1, size);
    let t_len = problem.len();

    let mut pop = Vec::with_capacity(size);
    pop.push(evaluate(problem, init.to_vec()));
    while pop.len() < size {
        let walk = random_walk(problem, mobility, rng);
        pop.push(evaluate(problem, walk));
    }
    let best_of = |pop: &[Individual]| {
        let mut b = 0;
        for (i, ind) in pop.iter().enumerate() {
            if ind.fitness > pop[b].fitness {
                b = i;
            }
        }
        b
    };
    let mut trace = vec![pop[best_of(&pop)].fitness];

    for _ in 0..config.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness).then(a.cmp(&b)));
        let mut next: Vec<Individual> = order[..elites].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < size {
            let a = &pop[tournament(&pop, tour, rng)];
            let (mut pts, mut ll) = (a.pts.clone(), a.ll.clone());
            if config.crossover_rate > 0.0 && rng.random::<f64>() < config.crossover_rate {
                let b = &pop[tournament(&pop, tour, rng)];
                for t in 0..t_len {
                    if a.pts[t] == b.pts[t] {
                        continue;
                    }
                    let lambda: f64 = rng.random();
                    let p = confine(problem, t, a.pts[t].lerp(b.pts[t], 1.0 - lambda));
                    pts[t] = p;
                    ll[t] = problem.slot_loglik(t, p);
                }
            }
            if config.mutation_rate > 0.0 {
                for t in 0..t_len {
                    if rng.random::<f64>() < config.mutation_rate {
                        let dx: f64 = rng.sample(StandardNormal);
                        let dy: f64 = rng.sample(StandardNormal);
                        let p = confine(
                            problem,
                            t,
                            pts[t] + Point::new(dx, dy) * config.mutation_step,
                        );
                        pts[t] = p;
                        ll[t] = problem.slot_loglik(t, p);
                    }
                }
            }
            next.push(finish(problem, pts, ll));
        }
        pop = next;
        trace.push(pop[best_of(&pop)].fitness);
    }
    let b = best_of(&pop);
    let best = pop.swap_remove(b);
    Ok(GaOutcome {
        fitness: best.fitness,
        best: best.pts,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, VisibilityRule};
    use crate::geometry::Polygon;
    use crate::propagation::{PathLoss, PropagationModel};
    use crate::rng::seeded;

    fn world() -> (Environment, PropagationModel) {
        let env = Environment::new(
            vec![Polygon::rectangle(0.0, 0.0, 6.0, 6.0)],
            vec![Point::new(0.5, 0.5), Point::new(5.5, 1.0), Point::new(3.0, 5.5)],
            vec![],
            0.5,
            VisibilityRule::Centroid,
        )
        .unwrap();
        let mut pm = PropagationModel::new();
        for q in 1..=3 {
            pm.insert(1, q, PathLoss { alpha: -25.0, beta: -30.0, sigma2: 1.0 });
        }
        (env, pm)
    }

    #[test]
    fn degenerate_ga_returns_init() {
        let (env, pm) = world();
        let mob = MobilityConfig::default();
        let rss = vec![vec![-50.0, -55.0, -52.0]; 3];
        let prob = TrajectoryProblem::new(&[1, 1, 1], &rss, &pm, &env, &mob, None).unwrap();
        let init = vec![Point::new(1.0, 1.0), Point::new(1.5, 1.2), Point::new(2.0, 1.9)];
        let cfg = GaConfig {
            population: 1,
            generations: 10,
            crossover_rate: 0.0,
            mutation_rate: 0.0,
            ..GaConfig::default()
        };
        let out = ga_search(&prob, &init, &cfg, &mob, &mut seeded(0)).unwrap();
        assert_eq!(out.best, init);
        assert_eq!(out.trace.len(), 11);
    }

    #[test]
    fn elitism_keeps_best_fitness_monotone() {
        let (env, pm) = world();
        let mob = MobilityConfig::default();
        let rss: Vec<Vec<f64>> = (0..20).map(|t| vec![-50.0 - t as f64 * 0.3, -55.0, -52.0]).collect();
        let labels = vec![1; 20];
        let prob = TrajectoryProblem::new(&labels, &rss, &pm, &env, &mob, None).unwrap();
        let init = vec![Point::new(3.0, 3.0); 20];
        let out = ga_search(&prob, &init, &GaConfig::default(), &mob, &mut seeded(9)).unwrap();
        assert_eq!(out.regressions(), 0);
        assert!(out.fitness >= out.trace[0]);
        assert!((prob.score(&out.best) - out.fitness).abs() < 1e-6 * out.fitness.abs().max(1.0));
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        assert!(GaConfig { population: 1, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { tournament: 200, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { mutation_rate: 1.5, ..GaConfig::default() }.validate().is_err());
    }
}
