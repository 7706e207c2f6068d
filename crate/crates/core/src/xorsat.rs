//! Two-variable XOR-SAT via a disjoint-set forest that tracks the parity of
//! every node relative to its root.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XorClause {
    pub a: usize,
    pub b: usize,
    /// Required value of `x_a xor x_b`.
    pub parity: bool,
}

impl XorClause {
    pub fn new(a: usize, b: usize, parity: bool) -> XorClause {
        XorClause { a, b, parity }
    }

    pub fn holds(&self, x: &[bool]) -> bool {
        (x[self.a] ^ x[self.b]) == self.parity
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct XorSystem {
    pub n_vars: usize,
    pub clauses: Vec<XorClause>,
}

impl XorSystem {
    pub fn new(n_vars: usize) -> XorSystem {
        XorSystem {
            n_vars,
            clauses: Vec::new(),
        }
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn add(&mut self, a: usize, b: usize, parity: bool) {
        assert!(a < self.n_vars && b < self.n_vars, "variable out of range");
        self.clauses.push(XorClause::new(a, b, parity));
    }

    pub fn is_satisfied_by(&self, x: &[bool]) -> bool {
        x.len() == self.n_vars && self.clauses.iter().all(|c| c.holds(x))
    }

    /// Returns an assignment satisfying every clause, or `None` when some
    /// cycle of clauses has odd total parity. Within each connected component
    /// the lowest-numbered variable is set to `false`.
    pub fn solve(&self) -> Option<Vec<bool>> {
        let mut dsu = ParityDsu::new(self.n_vars);
        for c in &self.clauses {
            if !dsu.union(c.a, c.b, c.parity) {
                return None;
            }
        }
        let mut x = vec![false; self.n_vars];
        // The root's value is free; pick it so that the component minimum reads 0.
        let mut root_value: Vec<Option<bool>> = vec![None; self.n_vars];
        for (v, slot) in x.iter_mut().enumerate() {
            let (r, p) = dsu.find(v);
            let rv = *root_value[r].get_or_insert(p);
            *slot = rv ^ p;
        }
        Some(x)
    }
}

struct ParityDsu {
    parent: Vec<usize>,
    parity: Vec<bool>,
    rank: Vec<u8>,
}

impl ParityDsu {
    fn new(n: usize) -> ParityDsu {
        ParityDsu {
            parent: (0..n).collect(),
            parity: vec![false; n],
            rank: vec![0; n],
        }
    }

    /// Root of `v` and the parity of `v` relative to it.
    fn find(&mut self, v: usize) -> (usize, bool) {
        let mut path = Vec::new();
        let mut cur = v;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // Compress from the top so each node's parity is already relative to root.
        for &node in path.iter().rev() {
            let p = self.parent[node];
            if p != root {
                self.parity[node] ^= self.parity[p];
            }
            self.parent[node] = root;
        }
        (root, self.parity[v] && v != root)
    }

    fn union(&mut self, a: usize, b: usize, parity: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return (pa ^ pb) == parity;
        }
        let (big, small) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.parity[small] = pa ^ pb ^ parity;
        if self.rank[big] == self.rank[small] {
            self.rank[big] += 1;
        }
        true
    }
}
