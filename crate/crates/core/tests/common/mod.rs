#![allow(dead_code)]

use clonebo::likelihood::LikelihoodParams;
use clonebo::numerics::mean_var;
use clonebo::rng::rng_from;
use clonebo::seq_model::{
    sample_latent, Alphabet, ConjugateModel, ConjugateModelParams, LatentClone, Sequence,
};
use clonebo::smc::ConditioningSet;

/// Exact-conjugate model with `A = 3`, `L = 3` and three measurements.
pub struct Tiny {
    pub model: ConjugateModel,
    pub latent: LatentClone,
    pub x0: Sequence,
    pub cond: ConditioningSet,
    pub params: LikelihoodParams,
}

pub fn conjugate(a: usize, len: usize, concentration: f64) -> ConjugateModel {
    let alphabet = Alphabet::new(a).unwrap();
    ConjugateModel::new(
        alphabet,
        ConjugateModelParams::uniform(len, a, concentration),
    )
    .unwrap()
}

/// Standardizes values to zero mean and unit population variance.
pub fn standardize(ys: &[f64]) -> Vec<f64> {
    let (m, v) = mean_var(ys);
    let s = if v > 0.0 { v.sqrt() } else { 1.0 };
    ys.iter().map(|y| (y - m) / s).collect()
}

/// Concentrations without symmetries, so no two measured sequences tie in
/// fitness by accident of integer counts.
pub fn generic_alpha(a: usize, len: usize, seed: u64) -> ConjugateModelParams {
    use rand::Rng;
    let mut rng = rng_from(seed, &[99]);
    ConjugateModelParams {
        length: len,
        alpha: (0..len)
            .map(|_| (0..a).map(|_| rng.random_range(0.5..2.0)).collect())
            .collect(),
    }
}

pub fn tiny(seed: u64) -> Tiny {
    let params = generic_alpha(3, 3, seed);
    let alphabet = Alphabet::new(3).unwrap();
    let model = ConjugateModel::new(alphabet.clone(), params.clone()).unwrap();
    let latent = sample_latent(&params, &alphabet, &mut rng_from(seed, &[0])).unwrap();
    let mut rng = rng_from(seed, &[1]);
    let x0 = latent.sample(&mut rng);
    let mut seqs: Vec<Sequence> = Vec::new();
    while seqs.len() < 3 {
        let x = latent.sample(&mut rng);
        if !seqs.contains(&x) {
            seqs.push(x);
        }
    }
    let ys: Vec<f64> = seqs.iter().map(|x| latent.log_prob(x).unwrap()).collect();
    let cond = ConditioningSet::new(seqs, standardize(&ys)).unwrap();
    let params = LikelihoodParams::with_sigma(1.0);
    Tiny {
        model,
        latent,
        x0,
        cond,
        params,
    }
}

/// Averages the self-normalized particle weights of `runs` independent SMC
/// runs into a distribution over the enumeration index.
pub fn smc_empirical(
    t: &Tiny,
    post: &clonebo::smc::ExactPosterior,
    particles: usize,
    runs: usize,
    seed: u64,
) -> Vec<f64> {
    use clonebo::smc::{SmcConfig, TwistedSmc};
    use rayon::prelude::*;
    let config = SmcConfig {
        particles,
        members: post.members,
        ..SmcConfig::default()
    };
    let smc = TwistedSmc::new(&t.model, &t.x0, &t.cond, &config, &t.params).unwrap();
    let partial: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let run = smc.run(&mut rng_from(seed, &[r as u64])).unwrap();
            let w = run.normalized_weights().unwrap();
            let mut hist = vec![0.0; post.len()];
            for (p, wi) in run.particles.iter().zip(w) {
                hist[post.index_of(&p.clone.members).unwrap()] += wi;
            }
            hist
        })
        .collect();
    let mut hist = vec![0.0; post.len()];
    for h in partial {
        for (a, b) in hist.iter_mut().zip(h) {
            *a += b / runs as f64;
        }
    }
    hist
}
