//! Random states, plans and instances shared by the integration tests.
#![allow(dead_code)]

use pstar::generator::{generate_instance, CurriculumParams, GeneratedInstance, GoalMode};
use pstar::state::{Action, BlockId, WorldState};
use rand::seq::SliceRandom;
use rand::Rng;

/// `n` blocks scattered over at most `max_towers` towers; with
/// `allow_held` one block may sit in the hand.
pub fn random_state<R: Rng>(rng: &mut R, n: usize, max_towers: usize, allow_held: bool) -> WorldState {
    let mut blocks: Vec<BlockId> = (1..=n as u32).map(BlockId::new).collect();
    blocks.shuffle(rng);
    let held = if allow_held && n > 1 && rng.random_bool(0.3) { blocks.pop() } else { None };
    let towers_wanted = rng.random_range(1..=max_towers.min(blocks.len()).max(1));
    let mut towers: Vec<Vec<BlockId>> = vec![Vec::new(); towers_wanted];
    for (i, x) in blocks.into_iter().enumerate() {
        // the first blocks seed every tower so none stays empty
        let t = if i < towers_wanted { i } else { rng.random_range(0..towers_wanted) };
        towers[t].push(x);
    }
    towers.retain(|t| !t.is_empty());
    WorldState::new(towers, held).expect("random layout is valid")
}

/// A walk of up to `len` applicable actions from `start`.
pub fn random_walk<R: Rng>(rng: &mut R, start: &WorldState, len: usize) -> Vec<Action> {
    let mut s = start.clone();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let acts = s.applicable_actions();
        let a = acts[rng.random_range(0..acts.len())];
        s = s.apply(a).unwrap();
        out.push(a);
    }
    out
}

/// Any action over blocks `1..=n`, applicable or not.
pub fn random_action<R: Rng>(rng: &mut R, n: u32) -> Action {
    let x = BlockId::new(rng.random_range(1..=n));
    let mut y = BlockId::new(rng.random_range(1..=n));
    if y == x {
        y = BlockId::new(x.index() % n + 1);
    }
    match rng.random_range(0..4) {
        0 => Action::PickUp(x),
        1 => Action::PutDown(x),
        2 => Action::Stack(x, y),
        _ => Action::Unstack(x, y),
    }
}

/// Small generator parameters, at most `max_blocks` blocks.
pub fn small_params<R: Rng>(rng: &mut R, mode: GoalMode, max_blocks: usize, max_towers: usize) -> CurriculumParams {
    loop {
        let width = rng.random_range(1..=max_towers);
        let h_min = rng.random_range(1..=max_blocks);
        let h_max = rng.random_range(h_min..=max_blocks);
        if width * h_max > max_blocks {
            continue;
        }
        let targets = match mode {
            GoalMode::Chain => rng.random_range(1..=width),
            GoalMode::Retrieve => 1,
            GoalMode::Interleaved => 2 * width,
        };
        let p = CurriculumParams { width, h_min, h_max, targets, mode };
        if p.validate().is_ok() {
            return p;
        }
    }
}

pub fn small_instance<R: Rng>(rng: &mut R, mode: GoalMode, max_blocks: usize, max_towers: usize) -> GeneratedInstance {
    let params = small_params(rng, mode, max_blocks, max_towers);
    generate_instance(&params, rng.random(), "small").unwrap()
}
