//! The Gaifman graph of a knowledge base and r-neighborhoods in it.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::kb::{KnowledgeBase, ObjectId};

/// Undirected co-occurrence graph over the domain, stored as flat adjacency
/// arrays with per-object offsets. Neighbor lists are sorted, deduplicated and
/// free of self-loops.
#[derive(Clone, Debug)]
pub struct GaifmanGraph {
    offsets: Vec<usize>,
    neighbors: Vec<ObjectId>,
}

/// The objects within distance `radius` of any element of `center`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: Vec<ObjectId>,
    pub radius: usize,
    /// Ascending object ids.
    pub members: Vec<ObjectId>,
}

/// Reusable BFS buffers. One per worker; the graph itself is never mutated.
#[derive(Clone, Debug, Default)]
pub struct BfsScratch {
    stamp: Vec<u32>,
    generation: u32,
    queue: VecDeque<(ObjectId, usize)>,
}

impl BfsScratch {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, n: usize) {
        if self.stamp.len() < n {
            self.stamp.resize(n, 0);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.queue.clear();
    }

    /// Marks `obj` as visited, returning whether it was new.
    #[inline]
    fn visit(&mut self, obj: ObjectId) -> bool {
        let slot = &mut self.stamp[obj.index()];
        if *slot == self.generation {
            false
        } else {
            *slot = self.generation;
            true
        }
    }
}

impl GaifmanGraph {
    pub fn build(kb: &KnowledgeBase) -> Self {
        let n = kb.num_objects();
        let mut edges: Vec<Vec<ObjectId>> = vec![Vec::new(); n];
        for fact in kb.facts() {
            for (i, &a) in fact.args.iter().enumerate() {
                for &b in &fact.args[i + 1..] {
                    if a != b {
                        edges[a.index()].push(b);
                        edges[b.index()].push(a);
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in edges {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }
        GaifmanGraph { offsets, neighbors }
    }

    pub fn num_objects(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, obj: ObjectId) -> &[ObjectId] {
        &self.neighbors[self.offsets[obj.index()]..self.offsets[obj.index() + 1]]
    }

    #[inline]
    pub fn degree(&self, obj: ObjectId) -> usize {
        self.offsets[obj.index() + 1] - self.offsets[obj.index()]
    }

    pub fn neighborhood(&self, center: &[ObjectId], radius: usize) -> Neighborhood {
        self.neighborhood_with(&mut BfsScratch::new(), center, radius)
    }

    /// Multi-source BFS truncated at depth `radius`; this is the union of the
    /// single-element balls.
    pub fn neighborhood_with(
        &self,
        scratch: &mut BfsScratch,
        center: &[ObjectId],
        radius: usize,
    ) -> Neighborhood {
        let mut members = Vec::new();
        self.ball_into(scratch, center, radius, &mut members);
        Neighborhood {
            center: center.to_vec(),
            radius,
            members,
        }
    }

    /// Writes the sorted members of `N_radius(center)` into `out`.
    pub fn ball_into(
        &self,
        scratch: &mut BfsScratch,
        center: &[ObjectId],
        radius: usize,
        out: &mut Vec<ObjectId>,
    ) {
        out.clear();
        scratch.reset(self.num_objects());
        for &c in center {
            if scratch.visit(c) {
                out.push(c);
                scratch.queue.push_back((c, 0));
            }
        }
        while let Some((obj, depth)) = scratch.queue.pop_front() {
            if depth == radius {
                continue;
            }
            for &next in self.neighbors(obj) {
                if scratch.visit(next) {
                    out.push(next);
                    scratch.queue.push_back((next, depth + 1));
                }
            }
        }
        out.sort_unstable();
    }

    /// Number of objects per degree; counts sum to `|D|`.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for i in 0..self.num_objects() {
            *hist.entry(self.degree(ObjectId(i as u32))).or_insert(0) += 1;
        }
        hist
    }

    pub fn write_degree_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "degree,count")?;
        for (degree, count) in self.degree_histogram() {
            writeln!(out, "{degree},{count}")?;
        }
        Ok(())
    }

    /// Size of the largest single-object r-neighborhood.
    pub fn max_r_neighborhood_size(&self, radius: usize) -> usize {
        let n = self.num_objects();
        if n == 0 {
            return 0;
        }
        match radius {
            0 => 1,
            1 => {
                (0..n)
                    .map(|i| self.degree(ObjectId(i as u32)))
                    .max()
                    .unwrap_or(0)
                    + 1
            }
            _ => (0..n as u32)
                .into_par_iter()
                .map_init(
                    || (BfsScratch::new(), Vec::new()),
                    |(scratch, buf), i| {
                        self.ball_into(scratch, &[ObjectId(i)], radius, buf);
                        buf.len()
                    },
                )
                .max()
                .unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(names: &[&str]) -> (KnowledgeBase, GaifmanGraph) {
        let mut kb = KnowledgeBase::new();
        for w in names.windows(2) {
            kb.add_named("r", &[w[0], w[1]]).unwrap();
        }
        let g = GaifmanGraph::build(&kb);
        (kb, g)
    }

    fn ids(kb: &KnowledgeBase, names: &[&str]) -> Vec<ObjectId> {
        let mut v: Vec<ObjectId> = names.iter().map(|n| kb.object_id(n).unwrap()).collect();
        v.sort();
        v
    }

    #[test]
    fn path_graph_edges() {
        let (kb, g) = path(&["a", "b", "c", "d"]);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(
            g.neighbors(kb.object_id("b").unwrap()),
            ids(&kb, &["a", "c"]).as_slice()
        );
    }

    #[test]
    fn ternary_fact_gives_triangle() {
        let mut kb = KnowledgeBase::new();
        kb.add_named("t", &["a", "b", "c"]).unwrap();
        let g = GaifmanGraph::build(&kb);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.degree_histogram(), BTreeMap::from([(2, 3)]));
    }

    #[test]
    fn empty_and_isolated() {
        let g = GaifmanGraph::build(&KnowledgeBase::new());
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.max_r_neighborhood_size(1), 0);
        let mut kb = KnowledgeBase::new();
        kb.add_named("r", &["a", "a"]).unwrap();
        kb.intern_object("lonely");
        let g = GaifmanGraph::build(&kb);
        assert_eq!(g.num_edges(), 0);
        assert!(g.neighbors(ObjectId(1)).is_empty());
    }

    #[test]
    fn neighborhood_examples() {
        let (kb, g) = path(&["a", "b", "c", "d", "e"]);
        let c = kb.object_id("c").unwrap();
        assert_eq!(g.neighborhood(&[c], 1).members, ids(&kb, &["b", "c", "d"]));
        assert_eq!(g.neighborhood(&[c], 0).members, vec![c]);
        let (kb, g) = path(&["a", "b", "c", "d"]);
        let center = ids(&kb, &["a", "c"]);
        assert_eq!(
            g.neighborhood(&center, 1).members,
            ids(&kb, &["a", "b", "c", "d"])
        );
        assert_eq!(g.max_r_neighborhood_size(1), 3);
        assert_eq!(g.max_r_neighborhood_size(0), 1);
    }

    #[test]
    fn histogram_of_path() {
        let (_, g) = path(&["a", "b", "c"]);
        assert_eq!(g.degree_histogram(), BTreeMap::from([(1, 2), (2, 1)]));
        let mut csv = Vec::new();
        g.write_degree_histogram_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "degree,count\n1,2\n2,1\n");
    }

    fn arb_graph() -> impl Strategy<Value = GaifmanGraph> {
        proptest::collection::vec((0u32..30, 0u32..30), 0..60).prop_map(|edges| {
            let mut kb = KnowledgeBase::new();
            for i in 0..30 {
                kb.intern_object(&i.to_string());
            }
            let r = kb.intern_relation("r", 2).unwrap();
            for (a, b) in edges {
                kb.add_fact(crate::kb::Fact::binary(r, ObjectId(a), ObjectId(b)))
                    .unwrap();
            }
            GaifmanGraph::build(&kb)
        })
    }

    proptest! {
        #[test]
        fn balls_are_monotone_in_radius(g in arb_graph(), d in 0u32..30, r in 0usize..4) {
            let small = g.neighborhood(&[ObjectId(d)], r).members;
            let big = g.neighborhood(&[ObjectId(d)], r + 1).members;
            prop_assert!(small.iter().all(|x| big.binary_search(x).is_ok()));
        }

        #[test]
        fn tuple_ball_is_union(g in arb_graph(), a in 0u32..30, b in 0u32..30, r in 0usize..3) {
            let joint = g.neighborhood(&[ObjectId(a), ObjectId(b)], r).members;
            let mut union = g.neighborhood(&[ObjectId(a)], r).members;
            union.extend(g.neighborhood(&[ObjectId(b)], r).members);
            union.sort();
            union.dedup();
            prop_assert_eq!(joint, union);
        }

        #[test]
        fn adjacency_is_symmetric(g in arb_graph()) {
            for i in 0..30u32 {
                let d = ObjectId(i);
                prop_assert!(!g.neighbors(d).contains(&d));
                for &e in g.neighbors(d) {
                    prop_assert!(g.neighbors(e).contains(&d));
                }
            }
        }
    }
}
