//! City–city edges induced by users that interacted with both cities.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::hetgraph::Subgraph;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CoClickEdge {
    /// City indices with `a < b`.
    pub a: usize,
    pub b: usize,
    /// Users adjacent to both cities inside the subgraph, ascending.
    pub shared: Vec<usize>,
}

impl CoClickEdge {
    pub fn touches(&self, city: usize) -> bool {
        self.a == city || self.b == city
    }
}

/// Every city pair with at least one common user neighbor in `sub`, sorted by
/// `(a, b)`.
pub fn find_coclick_edges(sub: &Subgraph) -> Vec<CoClickEdge> {
    let mut by_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in &sub.edges {
        by_user.entry(e.user).or_default().push(e.city);
    }
    let mut pairs: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for (&u, cities) in &mut by_user {
        cities.sort_unstable();
        cities.dedup();
        for (i, &a) in cities.iter().enumerate() {
            for &b in &cities[i + 1..] {
                pairs.entry((a, b)).or_default().insert(u);
            }
        }
    }
    pairs
        .into_iter()
        .map(|((a, b), users)| CoClickEdge {
            a,
            b,
            shared: users.into_iter().collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::SubEdge;

    fn sub(edges: &[(usize, usize)]) -> Subgraph {
        Subgraph {
            nodes: vec![],
            edges: edges
                .iter()
                .enumerate()
                .map(|(i, &(user, city))| SubEdge {
                    collapsed: i,
                    user,
                    city,
                })
                .collect(),
            center: 0,
            k: 1,
            n_users: 10,
        }
    }

    #[test]
    fn one_user_two_cities() {
        let got = find_coclick_edges(&sub(&[(1, 1), (1, 2)]));
        assert_eq!(
            got,
            vec![CoClickEdge {
                a: 1,
                b: 2,
                shared: vec![1]
            }]
        );
    }

    #[test]
    fn no_multi_city_user() {
        assert!(find_coclick_edges(&sub(&[(0, 0), (1, 1), (2, 1)])).is_empty());
    }

    #[test]
    fn hand_drawn_three_users_four_cities() {
        // u0: c0 c1 c2, u1: c1 c2, u2: c3
        let got = find_coclick_edges(&sub(&[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 3)]));
        let want = vec![
            CoClickEdge {
                a: 0,
                b: 1,
                shared: vec![0],
            },
            CoClickEdge {
                a: 0,
                b: 2,
                shared: vec![0],
            },
            CoClickEdge {
                a: 1,
                b: 2,
                shared: vec![0, 1],
            },
        ];
        assert_eq!(got, want);
    }
}
