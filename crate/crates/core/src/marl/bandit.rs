use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buffer::{ReplayBuffer, Transition};
use super::learner::{critic_forward, Maddpg, Minibatch};
use super::{ActorKind, MarlError, TrainConfig};

/// Result of training a single agent on a one-step, two-action problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditOutcome {
    /// Action chosen most often by greedy decoding after training.
    pub greedy_action: usize,
    /// Share of greedy decodes that picked `greedy_action`.
    pub agreement: f64,
    /// Learned value of each action.
    pub q: [f64; 2],
}

/// Trains a one-agent learner whose every episode is a single pull paying
/// `payoffs[action]`, for `updates` gradient updates.
pub fn run_bandit(payoffs: [f64; 2], updates: usize, kind: ActorKind, config: &TrainConfig) -> Result<BanditOutcome, MarlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut learner = Maddpg::new(kind, 1, 1, 2, config, &mut rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let obs = vec![vec![1.0]];
    let mask = vec![vec![true, true]];
    let mut done_updates = 0;
    let mut pulls: u64 = 0;
    while done_updates < updates {
        let actions = learner.act(&obs, &mask, config.epsilon_at(pulls), &mut rng)?;
        pulls += 1;
        buffer.push(Transition {
            obs: obs.clone(),
            masks: mask.clone(),
            rewards: vec![payoffs[actions[0]]],
            actions,
            next_obs: obs.clone(),
            next_masks: mask.clone(),
            done: true,
        });
        if let Some(sample) = buffer.sample(config.batch_size, &mut rng) {
            learner.update(&Minibatch::from_transitions(&sample), &mut rng)?;
            done_updates += 1;
        }
    }
    let decodes = 50;
    let picks = (0..decodes)
        .map(|_| learner.act(&obs, &mask, 0.0, &mut rng).map(|a| a[0]))
        .collect::<Result<Vec<usize>, MarlError>>()?;
    let ones = picks.iter().filter(|&&a| a == 1).count();
    let greedy_action = usize::from(ones * 2 > decodes);
    let agree = if greedy_action == 1 { ones } else { decodes - ones };
    let input = ndarray::array![[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]];
    let q = critic_forward(&learner.critics[0], input.view())?;
    Ok(BanditOutcome {
        greedy_action,
        agreement: agree as f64 / decodes as f64,
        q: [q[0], q[1]],
    })
}
