//! Finite parity games and a recursive (Zielonka-style) solver.
//!
//! Convention: a position with no successors is lost by its owner. An
//! infinite play is won by Eve iff the maximum priority seen infinitely
//! often is even. Solutions carry a positional strategy for the winner
//! of each position.

use super::{AutomataError, Owner};

#[derive(Clone, Debug, Default)]
pub struct ParityGame {
    pub owners: Vec<Owner>,
    pub priorities: Vec<usize>,
    pub edges: Vec<Vec<usize>>,
    pub initial: usize,
}

#[derive(Clone, Debug)]
pub struct GameSolution {
    /// Winner per position.
    pub eve_wins: Vec<bool>,
    /// For positions owned by their winner: the successor the positional
    /// winning strategy prescribes. `None` elsewhere.
    pub strategy: Vec<Option<usize>>,
}

impl ParityGame {
    pub fn add_position(&mut self, owner: Owner, priority: usize) -> usize {
        self.owners.push(owner);
        self.priorities.push(priority);
        self.edges.push(Vec::new());
        self.owners.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        self.edges[from].push(to);
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    fn validate(&self) -> Result<(), AutomataError> {
        let n = self.len();
        if self.priorities.len() != n || self.edges.len() != n {
            return Err(AutomataError::Malformed(
                "parity game arrays disagree in length".into(),
            ));
        }
        if n == 0 {
            return Err(AutomataError::Malformed("empty parity game".into()));
        }
        if self.initial >= n {
            return Err(AutomataError::Malformed(
                "initial position out of range".into(),
            ));
        }
        for succs in &self.edges {
            for &w in succs {
                if w >= n {
                    return Err(AutomataError::Malformed(
                        "edge target out of range".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Compress priorities to a minimal contiguous range, preserving parity
/// and relative order. Returns the compressed copy.
pub fn compress_priorities(priorities: &[usize]) -> Vec<usize> {
    let mut distinct: Vec<usize> = priorities.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut map = std::collections::BTreeMap::new();
    let mut next = 0usize;
    for (i, &p) in distinct.iter().enumerate() {
        if i == 0 {
            next = p % 2;
        } else if p % 2 != distinct[i - 1] % 2 {
            next += 1;
        }
        map.insert(p, next);
    }
    priorities.iter().map(|p| map[p]).collect()
}

/// Solve a finite parity game exactly. Deterministic: the strategy picks
/// the smallest qualifying successor at every position.
pub fn solve_parity_game(g: &ParityGame) -> Result<GameSolution, AutomataError> {
    g.validate()?;
    let n = g.len();
    // Augment with two sinks so every position has a successor: a stuck
    // owner loses, which the sinks encode as self-loops of the right
    // parity. The sinks are appended and stripped again at the end.
    let eve_sink = n;
    let adam_sink = n + 1;
    let mut owners = g.owners.clone();
    let mut priorities = compress_priorities(&g.priorities);
    let mut edges = g.edges.clone();
    owners.push(Owner::Adam);
    priorities.push(0); // even self-loop: Eve wins here
    edges.push(vec![eve_sink]);
    owners.push(Owner::Eve);
    priorities.push(1); // odd self-loop: Adam wins here
    edges.push(vec![adam_sink]);
    for v in 0..n {
        if g.edges[v].is_empty() {
            edges[v].push(match g.owners[v] {
                Owner::Eve => adam_sink,
                Owner::Adam => eve_sink,
            });
        }
    }

    let mut strategy = vec![None; n + 2];
    let alive = vec![true; n + 2];
    let eve_region = zielonka(&owners, &priorities, &edges, alive, &mut strategy);

    let mut eve_wins = vec![false; n];
    let mut out_strategy = vec![None; n];
    for v in 0..n {
        eve_wins[v] = eve_region[v];
        let winner_owns = match g.owners[v] {
            Owner::Eve => eve_wins[v],
            Owner::Adam => !eve_wins[v],
        };
        if winner_owns {
            // Strip strategy edges that lead into the artificial sinks
            // (they correspond to being stuck, which the winner never is).
            out_strategy[v] = strategy[v].filter(|&w| w < n);
        }
    }
    Ok(GameSolution {
        eve_wins,
        strategy: out_strategy,
    })
}

/// Recursive solver on the subgame induced by `alive`. Every alive
/// position is assumed to have at least one alive successor (maintained
/// by construction: attractors are removed together with everything they
/// dominate). Returns Eve's winning region and fills winner strategies.
fn zielonka(
    owners: &[Owner],
    priorities: &[usize],
    edges: &[Vec<usize>],
    alive: Vec<bool>,
    strategy: &mut Vec<Option<usize>>,
) -> Vec<bool> {
    let n = owners.len();
    if !alive.iter().any(|&a| a) {
        return vec![false; n];
    }
    let d = (0..n)
        .filter(|&v| alive[v])
        .map(|v| priorities[v])
        .max()
        .unwrap();
    let player = if d % 2 == 0 { Owner::Eve } else { Owner::Adam };
    let top: Vec<usize> = (0..n)
        .filter(|&v| alive[v] && priorities[v] == d)
        .collect();
    let (attr, attr_strategy) = attractor(owners, edges, &alive, &top, player);

    let mut rest = alive.clone();
    for v in 0..n {
        if attr[v] {
            rest[v] = false;
        }
    }
    let sub_eve = zielonka(owners, priorities, edges, rest.clone(), strategy);
    let opponent_region: Vec<bool> = (0..n)
        .map(|v| {
            rest[v]
                && match player {
                    Owner::Eve => !sub_eve[v],
                    Owner::Adam => sub_eve[v],
                }
        })
        .collect();

    if !opponent_region.iter().any(|&b| b) {
        // `player` wins everywhere in the current subgame. Keep the
        // subgame strategies, add the attractor strategy, and give the
        // top positions any successor that stays inside the subgame.
        for v in 0..n {
            if alive[v] && attr[v] && owners[v] == player {
                if let Some(w) = attr_strategy[v] {
                    strategy[v] = Some(w);
                } else if priorities[v] == d || strategy[v].is_none() {
                    strategy[v] = edges[v].iter().copied().find(|&w| alive[w]);
                }
            }
        }
        return (0..n)
            .map(|v| {
                if !alive[v] {
                    false
                } else if attr[v] {
                    player == Owner::Eve
                } else {
                    sub_eve[v]
                }
            })
            .collect();
    }

    // The opponent wins part of the subgame; remove the opponent's
    // attractor of that part and re-solve the remainder.
    let opp = match player {
        Owner::Eve => Owner::Adam,
        Owner::Adam => Owner::Eve,
    };
    let seeds: Vec<usize> = (0..n).filter(|&v| opponent_region[v]).collect();
    let (b_attr, b_strategy) = attractor(owners, edges, &alive, &seeds, opp);
    for v in 0..n {
        if alive[v] && b_attr[v] && owners[v] == opp {
            if let Some(w) = b_strategy[v] {
                strategy[v] = Some(w);
            }
            // Positions inside the seed region keep the strategy computed
            // by the recursive call.
        }
    }
    let mut remaining = alive.clone();
    for v in 0..n {
        if b_attr[v] {
            remaining[v] = false;
        }
    }
    let final_eve = zielonka(owners, priorities, edges, remaining, strategy);
    (0..n)
        .map(|v| {
            if !alive[v] {
                false
            } else if b_attr[v] {
                opp == Owner::Eve
            } else {
                final_eve[v]
            }
        })
        .collect()
}

/// Attractor of `targets` for `player` within the `alive` subgame, with
/// the attracting strategy (for player-owned positions outside the
/// target set). Opponent positions with no alive successors count as
/// attracted, which encodes the stuck-owner-loses convention.
fn attractor(
    owners: &[Owner],
    edges: &[Vec<usize>],
    alive: &[bool],
    targets: &[usize],
    player: Owner,
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = owners.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_count = vec![0usize; n];
    for v in 0..n {
        if !alive[v] {
            continue;
        }
        for &w in &edges[v] {
            if alive[w] {
                preds[w].push(v);
                out_count[v] += 1;
            }
        }
    }
    let mut inside = vec![false; n];
    let mut strategy = vec![None; n];
    let mut queue: std::collections::VecDeque<usize> = targets.iter().copied().collect();
    for &t in targets {
        inside[t] = true;
    }
    // Opponent positions already stuck are attracted immediately.
    for v in 0..n {
        if alive[v] && !inside[v] && owners[v] != player && out_count[v] == 0 {
            inside[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(w) = queue.pop_front() {
        for &v in &preds[w] {
            if inside[v] {
                continue;
            }
            if owners[v] == player {
                inside[v] = true;
                strategy[v] = Some(w);
                queue.push_back(v);
            } else {
                out_count[v] -= 1;
                if out_count[v] == 0 {
                    inside[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    (inside, strategy)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: the winning region computed by evaluating the
    /// standard nested fixpoint over the game graph. A position of
    /// priority p steps into the variable of index p; variables of even
    /// index are greatest fixpoints, odd index least fixpoints, nested
    /// with the highest priority outermost.
    fn fixpoint_winner(g: &ParityGame) -> Vec<bool> {
        let n = g.len();
        let d = g.priorities.iter().copied().max().unwrap_or(0);
        let mut x: Vec<Vec<bool>> = (0..=d)
            .map(|p| vec![p % 2 == 0; n])
            .collect();
        eval(g, d, &mut x)
    }

    fn phi(g: &ParityGame, x: &[Vec<bool>]) -> Vec<bool> {
        (0..g.len())
            .map(|v| {
                let p = g.priorities[v];
                match g.owners[v] {
                    Owner::Eve => g.edges[v].iter().any(|&w| x[p][w]),
                    Owner::Adam => g.edges[v].iter().all(|&w| x[p][w]),
                }
            })
            .collect()
    }

    fn eval(g: &ParityGame, p: usize, x: &mut Vec<Vec<bool>>) -> Vec<bool> {
        loop {
            let inner = if p == 0 {
                phi(g, x)
            } else {
                for q in 0..p {
                    x[q] = vec![q % 2 == 0; g.len()];
                }
                eval(g, p - 1, x)
            };
            if inner == x[p] {
                return inner;
            }
            x[p] = inner;
        }
    }

    fn game(owners: &[Owner], priorities: &[usize], edges: &[&[usize]]) -> ParityGame {
        ParityGame {
            owners: owners.to_vec(),
            priorities: priorities.to_vec(),
            edges: edges.iter().map(|e| e.to_vec()).collect(),
            initial: 0,
        }
    }

    #[test]
    fn self_loops_follow_their_parity() {
        let even = game(&[Owner::Eve], &[2], &[&[0]]);
        assert!(solve_parity_game(&even).unwrap().eve_wins[0]);
        let odd = game(&[Owner::Eve], &[3], &[&[0]]);
        assert!(!solve_parity_game(&odd).unwrap().eve_wins[0]);
    }

    #[test]
    fn stuck_owner_loses() {
        let g = game(&[Owner::Eve], &[0], &[&[]]);
        assert!(!solve_parity_game(&g).unwrap().eve_wins[0]);
        let g = game(&[Owner::Adam], &[1], &[&[]]);
        assert!(solve_parity_game(&g).unwrap().eve_wins[0]);
    }

    #[test]
    fn escape_to_an_even_loop_beats_an_odd_detour() {
        // 0 (Eve, pri 1) may loop at 1 (pri 1, odd) or move to 2 (pri 2).
        let g = game(
            &[Owner::Eve, Owner::Eve, Owner::Eve],
            &[1, 1, 2],
            &[&[1, 2], &[0], &[2]],
        );
        let sol = solve_parity_game(&g).unwrap();
        assert_eq!(sol.eve_wins, vec![true, true, true]);
        assert_eq!(sol.strategy[0], Some(2));
    }

    #[test]
    fn adam_traps_eve_in_the_odd_component() {
        // Adam at 0 chooses between an even Eve loop (1) and an odd trap
        // (2); he picks the trap.
        let g = game(
            &[Owner::Adam, Owner::Eve, Owner::Eve],
            &[0, 0, 1],
            &[&[1, 2], &[1], &[2]],
        );
        let sol = solve_parity_game(&g).unwrap();
        assert_eq!(sol.eve_wins, vec![false, true, false]);
        assert_eq!(sol.strategy[0], Some(2));
    }

    #[test]
    fn compression_preserves_parity_and_order() {
        assert_eq!(compress_priorities(&[4, 7, 4, 9]), vec![0, 1, 0, 1]);
        assert_eq!(compress_priorities(&[2, 3, 6]), vec![0, 1, 2]);
        assert_eq!(compress_priorities(&[5]), vec![1]);
        assert_eq!(compress_priorities(&[0, 2, 4]), vec![0, 0, 0]);
    }

    #[test]
    fn random_games_agree_with_the_nested_fixpoint_oracle() {
        // Deterministic linear-congruential stream; no external RNG needed.
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for round in 0..60 {
            let n = 2 + (next() % 49) as usize;
            let max_pri = 1 + (next() % 4) as usize;
            let mut g = ParityGame::default();
            for _ in 0..n {
                let owner = if next() % 2 == 0 { Owner::Eve } else { Owner::Adam };
                let pri = (next() % (max_pri as u64 + 1)) as usize;
                g.add_position(owner, pri);
            }
            for v in 0..n {
                let degree = (next() % 3) as usize + usize::from(round % 3 == 0);
                for _ in 0..degree {
                    let w = (next() % n as u64) as usize;
                    g.add_edge(v, w);
                }
            }
            let sol = solve_parity_game(&g).unwrap();
            let oracle = fixpoint_winner(&g);
            assert_eq!(sol.eve_wins, oracle, "disagreement on round {round}");
        }
    }

    #[test]
    fn winning_strategies_replay_to_wins() {
        // Validate strategies by replaying: follow the winner's strategy,
        // let the loser play every option (depth-limited cycle check on
        // the induced subgraph).
        let mut seed = 0xDEADBEEFCAFEu64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..20 {
            let n = 2 + (next() % 14) as usize;
            let mut g = ParityGame::default();
            for _ in 0..n {
                let owner = if next() % 2 == 0 { Owner::Eve } else { Owner::Adam };
                g.add_position(owner, (next() % 4) as usize);
            }
            for v in 0..n {
                for _ in 0..((next() % 3) as usize) {
                    g.add_edge(v, (next() % n as u64) as usize);
                }
            }
            let sol = solve_parity_game(&g).unwrap();
            for v in 0..n {
                assert!(verify_strategy(&g, &sol, v));
            }
        }
    }

    /// Replay check: in the graph restricted to the winner's strategy at
    /// winner-owned positions (all edges at loser-owned ones), every
    /// reachable cycle must have its maximum priority on the winner's
    /// side, and the loser must never force the winner stuck.
    fn verify_strategy(g: &ParityGame, sol: &GameSolution, start: usize) -> bool {
        let eve = sol.eve_wins[start];
        let n = g.len();
        let succs = |v: usize| -> Vec<usize> {
            let winner_owns = (g.owners[v] == Owner::Eve) == eve;
            if winner_owns {
                sol.strategy[v].into_iter().collect()
            } else {
                g.edges[v].clone()
            }
        };
        // Reachable positions under the restriction.
        let mut reach = vec![false; n];
        let mut stack = vec![start];
        reach[start] = true;
        while let Some(v) = stack.pop() {
            // A winner-owned position must have a strategy edge unless the
            // loser is stuck there (then it would be losing, contradiction).
            let winner_owns = (g.owners[v] == Owner::Eve) == eve;
            if winner_owns && sol.strategy[v].is_none() {
                return false;
            }
            if !winner_owns && g.edges[v].is_empty() {
                continue; // loser stuck: fine for the winner
            }
            for w in succs(v) {
                if sol.eve_wins[w] != eve {
                    return false; // strategy leaves the winning region
                }
                if !reach[w] {
                    reach[w] = true;
                    stack.push(w);
                }
            }
        }
        // Cycle parity check on the reachable restricted graph: for each
        // priority p of the wrong parity, the positions of priority >= p
        // must not contain a cycle whose maximum priority is exactly p.
        let max_p = g.priorities.iter().max().copied().unwrap_or(0);
        for p in 0..=max_p {
            let wrong_parity = (p % 2 == 0) != eve;
            if !wrong_parity {
                continue;
            }
            // Subgraph of reachable positions with priority <= p, looking
            // for a cycle through priority exactly p.
            if has_cycle_through(g, &reach, &succs, p) {
                return false;
            }
        }
        true
    }

    fn has_cycle_through(
        g: &ParityGame,
        reach: &[bool],
        succs: &dyn Fn(usize) -> Vec<usize>,
        p: usize,
    ) -> bool {
        let n = g.len();
        let keep: Vec<bool> = (0..n)
            .map(|v| reach[v] && g.priorities[v] <= p)
            .collect();
        for s in 0..n {
            if !keep[s] || g.priorities[s] != p {
                continue;
            }
            // DFS from s within keep, looking for a path back to s.
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for w in succs(v) {
                    if w == s {
                        return true;
                    }
                    if keep[w] && !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        false
    }
}
