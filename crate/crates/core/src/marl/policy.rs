use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ActorKind;
use crate::diffusion::{chain_backward, run_chain, ChainTrace, DenoiserNet, DiffusionError, Mlp, MlpCache, MlpGrads, NoiseSchedule};

/// Maps an observation to action logits.
#[derive(Debug, Clone, PartialEq)]
pub enum Actor {
    /// Logits are the end of a reverse diffusion chain conditioned on the
    /// observation.
    Diffusion(DenoiserNet),
    /// Logits come straight out of an MLP.
    Direct(Mlp),
}

/// Intermediate values of an actor forward pass.
#[derive(Debug, Clone)]
pub enum ActorTrace {
    Chain(ChainTrace),
    Direct(MlpCache),
}

impl Actor {
    pub fn diffusion<R: Rng + ?Sized>(obs_dim: usize, actions: usize, hidden: &[usize], steps: usize, rng: &mut R) -> Actor {
        Actor::Diffusion(DenoiserNet::new(actions, obs_dim, hidden, steps, rng))
    }

    pub fn direct<R: Rng + ?Sized>(obs_dim: usize, actions: usize, hidden: &[usize], rng: &mut R) -> Actor {
        let sizes: Vec<usize> = std::iter::once(obs_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(actions))
            .collect();
        Actor::Direct(Mlp::new(&sizes, rng))
    }

    /// Rebuilds an actor around stored weights. A diffusion actor's network
    /// takes `[x_t, observation, t/T]` and outputs one value per action.
    pub fn from_mlp(kind: ActorKind, mlp: Mlp, steps: usize) -> Actor {
        match kind {
            ActorKind::Diffusion => {
                let action_dim = mlp.output_dim();
                let cond_dim = mlp.input_dim() - action_dim - 1;
                Actor::Diffusion(DenoiserNet {
                    mlp,
                    action_dim,
                    cond_dim,
                    steps,
                })
            }
            ActorKind::Direct => Actor::Direct(mlp),
        }
    }

    pub fn mlp(&self) -> &Mlp {
        match self {
            Actor::Diffusion(d) => &d.mlp,
            Actor::Direct(m) => m,
        }
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        match self {
            Actor::Diffusion(d) => &mut d.mlp,
            Actor::Direct(m) => m,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Actor::Diffusion(d) => d.action_dim,
            Actor::Direct(m) => m.output_dim(),
        }
    }

    /// Logits for a batch of observations. Diffusion chains start from
    /// `x_T ~ N(0, I)` and scale their per-step noise by `noise_scale`.
    pub fn logits<R: Rng + ?Sized>(
        &self,
        obs: ArrayView2<f64>,
        schedule: &NoiseSchedule,
        noise_scale: f64,
        rng: &mut R,
    ) -> Result<(Array2<f64>, ActorTrace), DiffusionError> {
        match self {
            Actor::Diffusion(net) => {
                let rows = obs.nrows();
                let mut draw = |scale: f64| {
                    Array2::from_shape_simple_fn((rows, net.action_dim), || scale * rng.sample::<f64, _>(StandardNormal))
                };
                let x_start = draw(1.0);
                let noises = (0..schedule.steps()).map(|_| draw(noise_scale)).collect();
                let trace = run_chain(net, obs, x_start, noises, schedule)?;
                Ok((trace.x0.clone(), ActorTrace::Chain(trace)))
            }
            Actor::Direct(mlp) => {
                let (out, cache) = mlp.forward_cached(obs)?;
                Ok((out, ActorTrace::Direct(cache)))
            }
        }
    }

    /// Parameter gradient given `∂loss/∂logits`.
    pub fn backward(&self, trace: &ActorTrace, grad_logits: ArrayView2<f64>, schedule: &NoiseSchedule) -> MlpGrads {
        match (self, trace) {
            (Actor::Diffusion(net), ActorTrace::Chain(t)) => chain_backward(net, t, grad_logits, schedule),
            (Actor::Direct(mlp), ActorTrace::Direct(cache)) => mlp.backward(cache, grad_logits).0,
            _ => panic!("trace does not belong to this actor"),
        }
    }
}

/// Highest-logit feasible action, lowest index on ties; 0 when nothing is
/// feasible.
pub fn masked_argmax(logits: &[f64], mask: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, (&x, &ok)) in logits.iter().zip(mask).enumerate() {
        if ok && best.is_none_or(|b| x > logits[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

/// With probability `epsilon` a uniformly drawn feasible action, otherwise
/// the masked argmax.
pub fn epsilon_greedy<R: Rng + ?Sized>(logits: &[f64], mask: &[bool], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        let feasible: Vec<usize> = mask.iter().enumerate().filter(|(_, &ok)| ok).map(|(i, _)| i).collect();
        if !feasible.is_empty() {
            return feasible[rng.random_range(0..feasible.len())];
        }
    }
    masked_argmax(logits, mask)
}

/// Softmax of `logits / temperature` over the feasible entries; infeasible
/// entries get probability zero.
pub fn masked_softmax(logits: &[f64], mask: &[bool], temperature: f64) -> Vec<f64> {
    let top = logits
        .iter()
        .zip(mask)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&x, &ok)| if ok { ((x - top) / temperature).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

/// `∂loss/∂logits` from `∂loss/∂p` for `p = masked_softmax(logits)`.
pub fn masked_softmax_backward(p: &[f64], grad_p: &[f64], temperature: f64) -> Vec<f64> {
    let dot: f64 = p.iter().zip(grad_p).map(|(a, b)| a * b).sum();
    p.iter().zip(grad_p).map(|(&pi, &gi)| pi * (gi - dot) / temperature).collect()
}

pub fn one_hot(index: usize, size: usize) -> Vec<f64> {
    let mut v = vec![0.0; size];
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn argmax_respects_mask_and_ties() {
        assert_eq!(masked_argmax(&[5.0, 1.0, 1.0], &[false, true, true]), 1);
        assert_eq!(masked_argmax(&[5.0, 1.0], &[false, false]), 0);
    }

    #[test]
    fn epsilon_one_only_picks_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mask = [false, true, false, true];
        for _ in 0..200 {
            let a = epsilon_greedy(&[9.0, 0.0, 9.0, 0.0], &mask, 1.0, &mut rng);
            assert!(mask[a]);
        }
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let logits = [0.3, -1.2, 0.8, 2.0];
        let mask = [true, true, false, true];
        let coeff = [0.7, -0.4, 1.3, 0.2];
        let temp = 0.7;
        let f = |l: &[f64]| masked_softmax(l, &mask, temp).iter().zip(&coeff).map(|(a, b)| a * b).sum::<f64>();
        let p = masked_softmax(&logits, &mask, temp);
        let analytic = masked_softmax_backward(&p, &coeff, temp);
        let h = 1e-6;
        for i in 0..logits.len() {
            let mut up = logits;
            let mut down = logits;
            up[i] += h;
            down[i] -= h;
            assert!((analytic[i] - (f(&up) - f(&down)) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn direct_actor_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actor = Actor::direct(3, 4, &[8], &mut rng);
        let s = NoiseSchedule::default();
        let obs = array![[0.1, 0.2, 0.3]];
        let a = actor.logits(obs.view(), &s, 1.0, &mut rng).unwrap().0;
        let b = actor.logits(obs.view(), &s, 1.0, &mut rng).unwrap().0;
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution_on_the_mask(
            logits in proptest::collection::vec(-20.0f64..20.0, 1..8),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mask: Vec<bool> = logits.iter().map(|_| rng.random::<bool>()).collect();
            mask[0] = true;
            let p = masked_softmax(&logits, &mask, 1.0);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (pi, ok) in p.iter().zip(&mask) {
                prop_assert!(*ok || *pi == 0.0);
            }
        }
    }
}
