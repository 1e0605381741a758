/// What an agent asks for in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intent {
    Idle,
    /// Run the next `layers` layers of the task in `slot`.
    Claim { slot: usize, layers: usize },
}

/// Discrete actions: index 0 is idle, then `block_max` block sizes per task
/// slot, slot-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub slots: usize,
    pub block_max: usize,
}

impl ActionSpace {
    pub fn new(slots: usize, block_max: usize) -> ActionSpace {
        ActionSpace { slots, block_max }
    }

    pub fn size(&self) -> usize {
        1 + self.slots * self.block_max
    }

    pub fn encode(&self, intent: Intent) -> usize {
        match intent {
            Intent::Idle => 0,
            Intent::Claim { slot, layers } => {
                debug_assert!(slot < self.slots && (1..=self.block_max).contains(&layers));
                1 + slot * self.block_max + (layers - 1)
            }
        }
    }

    /// `None` for indices outside the space.
    pub fn decode(&self, action: usize) -> Option<Intent> {
        if action == 0 {
            return Some(Intent::Idle);
        }
        if action >= self.size() {
            return None;
        }
        let k = action - 1;
        Some(Intent::Claim {
            slot: k / self.block_max,
            layers: k % self.block_max + 1,
        })
    }
}
