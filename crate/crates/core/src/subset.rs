//! Subsets of a shift space and the quotiented prefix tree used by every tree DP.
//!
//! The prefix tree of a shift is never materialized. A node (a word `w`) is
//! summarized by a [`NodeState`]: where `w` sits relative to the subset's
//! defining structure (inside a trie of cylinders, inside the subset, or
//! disjoint from it) plus the last symbol when the transitions depend on it.
//! Nodes with equal depth and state have isomorphic subtrees, so DPs run over
//! `(depth, state)` classes held in a [`Layered`] graph.

use std::collections::HashMap;
use std::hash::Hash;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{check_square, vector_times_power, ShiftSpec, Transitions, Word};

/// The set `Z` (or compact `K`) on which covers are computed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsetSpec {
    Empty,
    WholeSpace,
    /// Finite union of cylinders; non-empty and deduplicated.
    CylinderUnion { cylinders: Vec<Word> },
    /// The SFT cut out by a sub-matrix of the ambient transitions.
    SftSubsystem { transitions: Transitions },
}

impl SubsetSpec {
    pub fn whole() -> Self {
        SubsetSpec::WholeSpace
    }

    pub fn cylinders(mut words: Vec<Word>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidSubset("cylinder union needs at least one word (use Empty)".into()));
        }
        words.sort();
        words.dedup();
        Ok(SubsetSpec::CylinderUnion { cylinders: words })
    }

    pub fn subsystem(transitions: Transitions) -> Self {
        SubsetSpec::SftSubsystem { transitions }
    }

    /// The golden-mean subsystem of the full 2-shift.
    pub fn golden_mean() -> Self {
        SubsetSpec::subsystem(vec![vec![true, true], vec![true, false]])
    }

    pub fn validate(&self, shift: &ShiftSpec) -> Result<()> {
        match self {
            SubsetSpec::Empty | SubsetSpec::WholeSpace => Ok(()),
            SubsetSpec::CylinderUnion { cylinders } => {
                if cylinders.is_empty() {
                    return Err(Error::InvalidSubset("empty cylinder list".into()));
                }
                for c in cylinders {
                    shift.check_word(c)?;
                }
                Ok(())
            }
            SubsetSpec::SftSubsystem { transitions } => {
                let n = shift.alphabet_size();
                check_square(transitions, n).map_err(Error::InvalidSubset)?;
                for i in 0..n {
                    for j in 0..n {
                        if transitions[i][j] && !shift.allows(i as u8, j as u8) {
                            return Err(Error::InvalidSubset(format!(
                                "subsystem allows {i}->{j}, which the ambient shift forbids"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Longest defining cylinder (0 when there are none).
    pub fn max_cylinder_len(&self) -> usize {
        match self {
            SubsetSpec::CylinderUnion { cylinders } => cylinders.iter().map(Word::len).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Whether the cylinder `[w]` meets the subset. Evaluated directly from the
    /// definition, independently of the automaton.
    pub fn intersects(&self, shift: &ShiftSpec, w: &Word) -> bool {
        if !shift.is_admissible(w.symbols()) {
            return false;
        }
        match self {
            SubsetSpec::Empty => false,
            SubsetSpec::WholeSpace => true,
            SubsetSpec::CylinderUnion { cylinders } => {
                cylinders.iter().any(|c| c.is_prefix_of(w) || w.is_prefix_of(c))
            }
            SubsetSpec::SftSubsystem { transitions } => {
                let essential = essential_vertices(transitions);
                let s = w.symbols();
                match s.last() {
                    None => essential.iter().any(|&e| e),
                    Some(&last) => {
                        s.windows(2).all(|p| transitions[p[0] as usize][p[1] as usize])
                            && essential[last as usize]
                    }
                }
            }
        }
    }

    /// Number of admissible words of length `depth` whose cylinder meets the subset.
    pub fn count_words(&self, shift: &ShiftSpec, depth: usize) -> Result<BigUint> {
        self.validate(shift)?;
        let automaton = SubsetAutomaton::new(shift, &Target::from_subset(self))?;
        Ok(automaton.count(depth))
    }
}

/// Vertices with an infinite forward path in the graph of `t`.
pub(crate) fn essential_vertices(t: &Transitions) -> Vec<bool> {
    let n = t.len();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for v in 0..n {
            if alive[v] && !(0..n).any(|u| t[v][u] && alive[u]) {
                alive[v] = false;
                changed = true;
            }
        }
        if !changed {
            return alive;
        }
    }
}

/// What a cover must dominate: the indicator of a subset, or a nonnegative
/// weight that is constant on each cylinder of a finite disjoint family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    Indicator(SubsetSpec),
    Weighted { cells: Vec<(Word, f64)> },
}

impl Target {
    pub fn from_subset(subset: &SubsetSpec) -> Self {
        Target::Indicator(subset.clone())
    }

    pub(crate) fn max_cylinder_len(&self) -> usize {
        match self {
            Target::Indicator(s) => s.max_cylinder_len(),
            Target::Weighted { cells } => cells.iter().map(|(w, _)| w.len()).max().unwrap_or(0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Region {
    /// Strict prefix of a defining cylinder; the word is trie node `id`.
    Trie(u32),
    /// Every admissible extension lies in the target with weight class `class`.
    Inside(u32),
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) struct NodeState {
    pub region: Region,
    pub last: Option<u8>,
}

#[derive(Clone, Debug)]
struct Trie {
    children: Vec<Vec<Option<u32>>>,
    terminal: Vec<Option<u32>>,
}

impl Trie {
    fn new(alphabet: usize) -> Self {
        Trie { children: vec![vec![None; alphabet]], terminal: vec![None] }
    }

    fn walk_or_insert(&mut self, word: &Word, class: u32, disjoint: bool) -> Result<()> {
        let alphabet = self.children[0].len();
        let mut node = 0usize;
        for &s in word.symbols() {
            if self.terminal[node].is_some() {
                if disjoint {
                    return Err(Error::InvalidSubset(format!("weighted cells overlap at {word}")));
                }
                // Already covered by a shorter cylinder.
                return Ok(());
            }
            node = match self.children[node][s as usize] {
                Some(c) => c as usize,
                None => {
                    self.children.push(vec![None; alphabet]);
                    self.terminal.push(None);
                    let id = self.children.len() - 1;
                    self.children[node][s as usize] = Some(id as u32);
                    id
                }
            };
        }
        if disjoint && (self.terminal[node].is_some() || self.children[node].iter().any(Option::is_some)) {
            return Err(Error::InvalidSubset(format!("weighted cells overlap at {word}")));
        }
        self.terminal[node] = Some(class);
        // Longer cylinders below this node are now redundant.
        self.children[node].iter_mut().for_each(|c| *c = None);
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Mode {
    Empty,
    Whole,
    Trie(Trie),
    Subsystem { transitions: Transitions, essential: Vec<bool> },
}

/// Deterministic automaton reading a word symbol by symbol and tracking its [`NodeState`].
#[derive(Clone, Debug)]
pub(crate) struct SubsetAutomaton {
    alphabet: usize,
    ambient: Option<Transitions>,
    mode: Mode,
    track_last: bool,
    /// Target value per weight class (all 1 for indicators).
    pub weights: Vec<f64>,
    max_cylinder_len: usize,
}

impl SubsetAutomaton {
    pub fn new(shift: &ShiftSpec, target: &Target) -> Result<Self> {
        Self::with_last(shift, target, false)
    }

    /// `force_last` keeps the last symbol in every state (Markov measures need it).
    pub fn with_last(shift: &ShiftSpec, target: &Target, force_last: bool) -> Result<Self> {
        let alphabet = shift.alphabet_size();
        let mut weights = vec![1.0];
        let mode = match target {
            Target::Indicator(subset) => {
                subset.validate(shift)?;
                match subset {
                    SubsetSpec::Empty => Mode::Empty,
                    SubsetSpec::WholeSpace => Mode::Whole,
                    SubsetSpec::CylinderUnion { cylinders } => {
                        let mut sorted = cylinders.clone();
                        sorted.sort_by_key(Word::len);
                        let mut trie = Trie::new(alphabet);
                        for c in &sorted {
                            trie.walk_or_insert(c, 0, false)?;
                        }
                        Mode::Trie(trie)
                    }
                    SubsetSpec::SftSubsystem { transitions } => {
                        let essential = essential_vertices(transitions);
                        if essential.iter().any(|&e| e) {
                            Mode::Subsystem { transitions: transitions.clone(), essential }
                        } else {
                            Mode::Empty
                        }
                    }
                }
            }
            Target::Weighted { cells } => {
                weights.clear();
                let mut trie = Trie::new(alphabet);
                let mut sorted: Vec<&(Word, f64)> = cells.iter().collect();
                sorted.sort_by_key(|(w, _)| w.len());
                for (w, value) in sorted {
                    if !(value.is_finite() && *value >= 0.0) {
                        return Err(Error::Config(format!("target weight must be finite and >= 0, got {value}")));
                    }
                    shift.check_word(w)?;
                    if *value == 0.0 {
                        continue;
                    }
                    let class = match weights.iter().position(|&x| x == *value) {
                        Some(i) => i,
                        None => {
                            weights.push(*value);
                            weights.len() - 1
                        }
                    };
                    trie.walk_or_insert(w, class as u32, true)?;
                }
                if weights.is_empty() {
                    Mode::Empty
                } else {
                    Mode::Trie(trie)
                }
            }
        };
        let track_last = force_last || !shift.is_full() || matches!(mode, Mode::Subsystem { .. });
        Ok(SubsetAutomaton {
            alphabet,
            ambient: shift.transitions().cloned(),
            mode,
            track_last,
            weights,
            max_cylinder_len: target.max_cylinder_len(),
        })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn max_cylinder_len(&self) -> usize {
        self.max_cylinder_len
    }

    pub fn root(&self) -> NodeState {
        let region = match &self.mode {
            Mode::Empty => Region::Outside,
            Mode::Whole | Mode::Subsystem { .. } => Region::Inside(0),
            Mode::Trie(t) => match t.terminal[0] {
                Some(c) => Region::Inside(c),
                None => Region::Trie(0),
            },
        };
        NodeState { region, last: None }
    }

    /// State after appending `symbol`, or `None` if the ambient shift forbids it.
    pub fn step(&self, state: NodeState, symbol: u8) -> Option<NodeState> {
        if let (Some(prev), Some(t)) = (state.last, &self.ambient) {
            if !t[prev as usize][symbol as usize] {
                return None;
            }
        }
        let region = match (state.region, &self.mode) {
            (Region::Outside, _) => Region::Outside,
            (Region::Inside(c), Mode::Subsystem { transitions, essential }) => {
                let ok = essential[symbol as usize]
                    && state.last.is_none_or(|p| transitions[p as usize][symbol as usize]);
                if ok {
                    Region::Inside(c)
                } else {
                    Region::Outside
                }
            }
            (Region::Inside(c), _) => Region::Inside(c),
            (Region::Trie(node), Mode::Trie(trie)) => match trie.children[node as usize][symbol as usize] {
                None => Region::Outside,
                Some(child) => match trie.terminal[child as usize] {
                    Some(class) => Region::Inside(class),
                    None => Region::Trie(child),
                },
            },
            (Region::Trie(_), _) => unreachable!("trie state outside trie mode"),
        };
        let last = if self.track_last { Some(symbol) } else { None };
        Some(NodeState { region, last })
    }

    /// Children of a node meeting the target, in symbol order.
    pub fn children(&self, state: NodeState) -> impl Iterator<Item = (u8, NodeState)> + '_ {
        (0..self.alphabet as u8).filter_map(move |a| {
            self.step(state, a)
                .filter(|s| s.region != Region::Outside)
                .map(|s| (a, s))
        })
    }

    #[cfg(test)]
    /// State of `word`, or `None` if inadmissible.
    pub fn state_of(&self, word: &Word) -> Option<NodeState> {
        word.symbols()
            .iter()
            .try_fold(self.root(), |s, &a| self.step(s, a))
    }

    /// Count admissible words of length `depth` meeting the target.
    ///
    /// Layer-by-layer until the trie is exhausted, then a transfer-matrix power.
    pub fn count(&self, depth: usize) -> BigUint {
        let mut layer: HashMap<NodeState, BigUint> = HashMap::new();
        let root = self.root();
        if root.region == Region::Outside {
            return BigUint::zero();
        }
        layer.insert(root, BigUint::one());
        let mut d = 0;
        let resolved = |layer: &HashMap<NodeState, BigUint>| {
            layer.keys().all(|s| matches!(s.region, Region::Inside(_)))
        };
        while d < depth && (d == 0 || !resolved(&layer)) {
            let mut next: HashMap<NodeState, BigUint> = HashMap::new();
            for (state, count) in &layer {
                for (_, child) in self.children(*state) {
                    *next.entry(child).or_insert_with(BigUint::zero) += count;
                }
            }
            layer = next;
            d += 1;
        }
        let remaining = depth - d;
        if remaining == 0 {
            return layer.values().sum();
        }
        if !self.track_last {
            // Full shift, inside: every extension is admissible.
            let total: BigUint = layer.values().sum();
            return total * BigUint::from(self.alphabet).pow(remaining as u32);
        }
        let matrix: Transitions = (0..self.alphabet)
            .map(|i| {
                (0..self.alphabet)
                    .map(|j| {
                        let probe = NodeState { region: Region::Inside(0), last: Some(i as u8) };
                        self.step(probe, j as u8).is_some_and(|s| s.region != Region::Outside)
                    })
                    .collect()
            })
            .collect();
        let mut by_vertex = vec![BigUint::zero(); self.alphabet];
        for (state, count) in &layer {
            by_vertex[state.last.expect("tracked") as usize] += count;
        }
        vector_times_power(&by_vertex, &matrix, remaining).into_iter().sum()
    }
}

/// A layered DAG of node classes: `layers[d]` holds the distinct classes at depth `d`,
/// `children[d][i]` lists `(index in layer d+1, multiplicity)`.
#[derive(Clone, Debug)]
pub(crate) struct Layered<K> {
    pub layers: Vec<Vec<K>>,
    pub index: Vec<HashMap<K, u32>>,
    pub children: Vec<Vec<Vec<(u32, u32)>>>,
}

impl<K: Clone + Eq + Hash> Layered<K> {
    /// Expand from `root` down to `max_depth`. `expand` returns child keys; repeats
    /// become multiplicities. An empty root list yields an empty graph.
    pub fn build<F>(roots: Vec<K>, max_depth: usize, mut expand: F) -> Self
    where
        F: FnMut(usize, &K) -> Vec<K>,
    {
        let mut layers = Vec::with_capacity(max_depth + 1);
        let mut index = Vec::with_capacity(max_depth + 1);
        let mut children = Vec::with_capacity(max_depth + 1);
        let mut current = roots;
        for d in 0..=max_depth {
            let mut map: HashMap<K, u32> = HashMap::with_capacity(current.len());
            for (i, k) in current.iter().enumerate() {
                map.insert(k.clone(), i as u32);
            }
            let mut next: Vec<K> = Vec::new();
            let mut next_map: HashMap<K, u32> = HashMap::new();
            let mut kids = Vec::with_capacity(current.len());
            if d < max_depth {
                for k in &current {
                    let mut list: Vec<(u32, u32)> = Vec::new();
                    for child in expand(d, k) {
                        let id = *next_map.entry(child.clone()).or_insert_with(|| {
                            next.push(child);
                            (next.len() - 1) as u32
                        });
                        match list.iter_mut().find(|(c, _)| *c == id) {
                            Some(entry) => entry.1 += 1,
                            None => list.push((id, 1)),
                        }
                    }
                    kids.push(list);
                }
            } else {
                kids.resize(current.len(), Vec::new());
            }
            layers.push(current);
            index.push(map);
            children.push(kids);
            current = next;
        }
        Layered { layers, index, children }
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn class_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

impl Layered<NodeState> {
    pub fn from_automaton(automaton: &SubsetAutomaton, max_depth: usize) -> Self {
        let root = automaton.root();
        let roots = if root.region == Region::Outside { Vec::new() } else { vec![root] };
        Layered::build(roots, max_depth, |_, s| automaton.children(*s).map(|(_, c)| c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_words(alphabet: usize, len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| (0..alphabet as u8).map(move |a| w.extended(a)))
                .collect();
        }
        out
    }

    fn brute_count(shift: &ShiftSpec, subset: &SubsetSpec, len: usize) -> usize {
        all_words(shift.alphabet_size(), len)
            .iter()
            .filter(|w| subset.intersects(shift, w))
            .count()
    }

    #[test]
    fn cylinder_union_counts() {
        let shift = ShiftSpec::full(2).unwrap();
        let z = SubsetSpec::cylinders(vec![Word::from(&[0u8, 1][..]), Word::from(&[1u8][..])]).unwrap();
        for d in 0..9 {
            assert_eq!(z.count_words(&shift, d).unwrap(), BigUint::from(brute_count(&shift, &z, d)));
        }
    }

    #[test]
    fn redundant_cylinders_collapse() {
        let shift = ShiftSpec::full(3).unwrap();
        let z = SubsetSpec::cylinders(vec![Word::from(&[0u8][..]), Word::from(&[0u8, 2, 1][..])]).unwrap();
        let a = SubsetAutomaton::new(&shift, &Target::Indicator(z)).unwrap();
        assert_eq!(a.state_of(&Word::from(&[0u8][..])).unwrap().region, Region::Inside(0));
        assert_eq!(a.count(5), BigUint::from(81u32));
    }

    #[test]
    fn subsystem_counts_are_fibonacci() {
        let shift = ShiftSpec::full(2).unwrap();
        let gm = SubsetSpec::golden_mean();
        let expected = [1u32, 2, 3, 5, 8, 13, 21, 34];
        for (d, &e) in expected.iter().enumerate() {
            assert_eq!(gm.count_words(&shift, d).unwrap(), BigUint::from(e));
            assert_eq!(brute_count(&shift, &gm, d), e as usize);
        }
    }

    #[test]
    fn subsystem_prunes_dead_ends() {
        let shift = ShiftSpec::full(3).unwrap();
        // symbol 2 has no outgoing edge, so it is not in the subsystem
        let sub = SubsetSpec::subsystem(vec![
            vec![true, true, true],
            vec![true, false, false],
            vec![false, false, false],
        ]);
        for d in 0..7 {
            assert_eq!(sub.count_words(&shift, d).unwrap(), BigUint::from(brute_count(&shift, &sub, d)));
        }
        let empty = SubsetSpec::subsystem(vec![vec![false; 3]; 3]);
        assert_eq!(empty.count_words(&shift, 3).unwrap(), BigUint::zero());
    }

    #[test]
    fn sft_ambient_with_cylinders() {
        let shift = ShiftSpec::golden_mean();
        let z = SubsetSpec::cylinders(vec![Word::from(&[1u8, 0, 1][..]), Word::from(&[0u8, 0][..])]).unwrap();
        for d in 0..10 {
            assert_eq!(z.count_words(&shift, d).unwrap(), BigUint::from(brute_count(&shift, &z, d)));
        }
        let bad = SubsetSpec::cylinders(vec![Word::from(&[1u8, 1][..])]).unwrap();
        assert!(bad.validate(&shift).is_err());
    }

    #[test]
    fn weighted_cells_must_be_disjoint() {
        let shift = ShiftSpec::full(2).unwrap();
        let t = Target::Weighted {
            cells: vec![(Word::from(&[0u8][..]), 1.0), (Word::from(&[0u8, 1][..]), 2.0)],
        };
        assert!(SubsetAutomaton::new(&shift, &t).is_err());
        let neg = Target::Weighted { cells: vec![(Word::from(&[0u8][..]), -1.0)] };
        assert!(SubsetAutomaton::new(&shift, &neg).is_err());
    }

    #[test]
    fn layered_graph_quotients_full_shift() {
        let shift = ShiftSpec::full(3).unwrap();
        let a = SubsetAutomaton::new(&shift, &Target::Indicator(SubsetSpec::whole())).unwrap();
        let g = Layered::from_automaton(&a, 100);
        assert_eq!(g.class_count(), 101);
        assert_eq!(g.children[0][0], vec![(0, 3)]);
    }
}
