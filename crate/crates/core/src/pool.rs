//! The constraint pool every elicitation run draws from.
//!
//! A pool is an ordered list of [`Constraint`]s. The canonical pool has four
//! elements with five categories each and ten constraints per category
//! (200 items). Desk-scale pools can opt out of that structure with the
//! `canonical: false` flag in the pool file.
//!
//! Element labels are stored here because landscape landmarks need them;
//! prompt construction never shows them to a model.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Constraint identifier, `1..=N` within a pool.
pub type ConstraintId = u32;

pub const CANONICAL_SIZE: usize = 200;
pub const CATEGORIES_PER_ELEMENT: usize = 5;
pub const CONSTRAINTS_PER_CATEGORY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    Event,
    Style,
    Character,
    Setting,
}

impl Element {
    pub const ALL: [Element; 4] = [
        Element::Event,
        Element::Style,
        Element::Character,
        Element::Setting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Element::Event => "Event",
            Element::Style => "Style",
            Element::Character => "Character",
            Element::Setting => "Setting",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: ConstraintId,
    pub element: Element,
    pub category: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("failed to read pool file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse pool: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("pool has no constraints")]
    Empty,
    #[error("duplicate constraint id {0}")]
    DuplicateId(ConstraintId),
    #[error("duplicate constraint text for ids {first} and {second}")]
    DuplicateText {
        first: ConstraintId,
        second: ConstraintId,
    },
    #[error("constraint {0} has empty text")]
    EmptyText(ConstraintId),
    #[error("constraint ids must be exactly 1..={expected_max}; id {id} is out of range")]
    NonContiguousIds {
        id: ConstraintId,
        expected_max: usize,
    },
    #[error("canonical structure violation: {0}")]
    Structure(String),
}

/// On-disk pool document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoolFile {
    name: String,
    version: String,
    #[serde(default = "default_canonical")]
    canonical: bool,
    constraints: Vec<Constraint>,
}

fn default_canonical() -> bool {
    true
}

/// A validated, immutable constraint pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintPool {
    name: String,
    version: String,
    canonical: bool,
    constraints: Vec<Constraint>,
    // position of each id (id - 1) in `constraints`
    position: Vec<usize>,
}

impl ConstraintPool {
    /// Validates `constraints` and builds a pool. The canonical 4×5×10 check
    /// runs only when `canonical` is true.
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        canonical: bool,
        constraints: Vec<Constraint>,
    ) -> Result<Self, PoolError> {
        if constraints.is_empty() {
            return Err(PoolError::Empty);
        }
        let n = constraints.len();
        let mut position = vec![usize::MAX; n];
        let mut texts: HashMap<&str, ConstraintId> = HashMap::with_capacity(n);
        for (pos, c) in constraints.iter().enumerate() {
            if c.id == 0 || c.id as usize > n {
                // A repeated id pushes another id past N; report the repeat.
                let mut seen = HashSet::new();
                if let Some(dup) = constraints.iter().find(|c| !seen.insert(c.id)) {
                    return Err(PoolError::DuplicateId(dup.id));
                }
                return Err(PoolError::NonContiguousIds {
                    id: c.id,
                    expected_max: n,
                });
            }
            let slot = &mut position[c.id as usize - 1];
            if *slot != usize::MAX {
                return Err(PoolError::DuplicateId(c.id));
            }
            *slot = pos;
            if c.text.trim().is_empty() {
                return Err(PoolError::EmptyText(c.id));
            }
            if let Some(&first) = texts.get(c.text.trim()) {
                return Err(PoolError::DuplicateText {
                    first,
                    second: c.id,
                });
            }
            texts.insert(c.text.trim(), c.id);
        }
        let pool = Self {
            name: name.into(),
            version: version.into(),
            canonical,
            constraints,
            position,
        };
        if canonical {
            pool.check_canonical()?;
        }
        Ok(pool)
    }

    fn check_canonical(&self) -> Result<(), PoolError> {
        let mut tally: BTreeMap<Element, BTreeMap<&str, usize>> = BTreeMap::new();
        for c in &self.constraints {
            *tally
                .entry(c.element)
                .or_default()
                .entry(c.category.as_str())
                .or_default() += 1;
        }
        for element in Element::ALL {
            let categories = tally.get(&element).map(BTreeMap::len).unwrap_or(0);
            if categories != CATEGORIES_PER_ELEMENT {
                return Err(PoolError::Structure(format!(
                    "element {element} has {categories} categories, expected {CATEGORIES_PER_ELEMENT}"
                )));
            }
            for (category, &count) in &tally[&element] {
                if count != CONSTRAINTS_PER_CATEGORY {
                    return Err(PoolError::Structure(format!(
                        "category {element}/{category} has {count} constraints, expected {CONSTRAINTS_PER_CATEGORY}"
                    )));
                }
            }
        }
        debug_assert_eq!(self.constraints.len(), CANONICAL_SIZE);
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self, PoolError> {
        let file: PoolFile = serde_json::from_str(json)?;
        Self::new(file.name, file.version, file.canonical, file.constraints)
    }

    pub fn to_json_string(&self) -> String {
        let file = PoolFile {
            name: self.name.clone(),
            version: self.version.clone(),
            canonical: self.canonical,
            constraints: self.constraints.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("pool serializes");
        out.push('\n');
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Constraints in canonical (file) order.
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Ids in canonical order.
    pub fn ids(&self) -> Vec<ConstraintId> {
        self.constraints.iter().map(|c| c.id).collect()
    }

    pub fn contains(&self, id: ConstraintId) -> bool {
        id >= 1 && id as usize <= self.constraints.len()
    }

    pub fn get(&self, id: ConstraintId) -> Option<&Constraint> {
        if !self.contains(id) {
            return None;
        }
        Some(&self.constraints[self.position[id as usize - 1]])
    }

    /// Exact lookup by constraint text, ignoring surrounding whitespace.
    pub fn find_by_text(&self, text: &str) -> Option<&Constraint> {
        let needle = text.trim();
        self.constraints.iter().find(|c| c.text.trim() == needle)
    }

    /// The synthetic placeholder pool shipped with the toolkit: canonical
    /// structure, lorem-style texts.
    pub fn placeholder() -> Self {
        const CATEGORIES: [(Element, [&str; 5]); 4] = [
            (
                Element::Event,
                ["inciting", "conflict", "turning", "climax", "resolution"],
            ),
            (
                Element::Style,
                ["narration", "tone", "pacing", "diction", "structure"],
            ),
            (
                Element::Character,
                [
                    "protagonist",
                    "antagonist",
                    "relationship",
                    "motivation",
                    "change",
                ],
            ),
            (
                Element::Setting,
                ["era", "place", "society", "atmosphere", "rules"],
            ),
        ];
        const LOREM: [&str; 10] = [
            "lorem ipsum dolor",
            "sit amet consectetur",
            "adipiscing elit sed",
            "do eiusmod tempor",
            "incididunt ut labore",
            "et dolore magna",
            "aliqua ut enim",
            "ad minim veniam",
            "quis nostrud exercitation",
            "ullamco laboris nisi",
        ];
        let mut constraints = Vec::with_capacity(CANONICAL_SIZE);
        for (element, categories) in CATEGORIES {
            for category in categories {
                for lorem in LOREM {
                    let id = constraints.len() as ConstraintId + 1;
                    constraints.push(Constraint {
                        id,
                        element,
                        category: category.to_string(),
                        text: format!("Placeholder constraint {id:03}: {lorem}."),
                    });
                }
            }
        }
        Self::new("placeholder", "0.1.0", true, constraints).expect("placeholder pool is canonical")
    }

    /// A non-canonical placeholder pool of `size` items, cycling through the
    /// elements. Used for desk-scale tests and examples.
    pub fn placeholder_sized(size: usize) -> Self {
        let constraints = (0..size)
            .map(|i| {
                let element = Element::ALL[i % 4];
                Constraint {
                    id: i as ConstraintId + 1,
                    element,
                    category: format!("{}-{}", element.as_str().to_lowercase(), (i / 4) % 5),
                    text: format!("Placeholder constraint number {}.", i + 1),
                }
            })
            .collect();
        Self::new(format!("placeholder-{size}"), "0.1.0", false, constraints)
            .expect("sized placeholder pool is valid")
    }
}

/// Reads and validates a pool file.
pub fn load_pool(path: &Path) -> Result<ConstraintPool, PoolError> {
    let text = fs::read_to_string(path).map_err(|source| PoolError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ConstraintPool::from_json_str(&text)
}

pub fn write_pool(pool: &ConstraintPool, path: &Path) -> Result<(), PoolError> {
    fs::write(path, pool.to_json_string()).map_err(|source| PoolError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A seeded ordering of the pool ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    pub seed: u64,
    pub order: Vec<ConstraintId>,
}

impl Permutation {
    /// True when `order` is a bijection on the pool ids.
    pub fn matches(&self, pool: &ConstraintPool) -> bool {
        if self.order.len() != pool.len() {
            return false;
        }
        let mut seen = vec![false; pool.len()];
        self.order
            .iter()
            .all(|&id| pool.contains(id) && !std::mem::replace(&mut seen[id as usize - 1], true))
    }
}

/// Shuffles the pool ids with Fisher–Yates driven by [`seed::stream`].
///
/// Starting from the canonical order, for `i` from `n - 1` down to 1 the
/// element at `i` is swapped with the one at `uniform_below(i + 1)`.
pub fn permute(pool: &ConstraintPool, seed: u64) -> Permutation {
    let mut order = pool.ids();
    let mut rng = seed::stream(seed);
    for i in (1..order.len()).rev() {
        let j = seed::uniform_below(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    Permutation { seed, order }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn placeholder_is_canonical() {
        let pool = ConstraintPool::placeholder();
        assert_eq!(pool.len(), CANONICAL_SIZE);
        assert!(pool.is_canonical());
        let mut categories: BTreeMap<Element, HashSet<&str>> = BTreeMap::new();
        for c in pool.constraints() {
            categories.entry(c.element).or_default().insert(&c.category);
        }
        assert_eq!(categories.len(), 4);
        assert!(categories
            .values()
            .all(|c| c.len() == CATEGORIES_PER_ELEMENT));
    }

    #[test]
    fn duplicate_id_is_named() {
        let mut constraints = ConstraintPool::placeholder_sized(10).constraints().to_vec();
        constraints[3].id = 7;
        let err = ConstraintPool::new("dup", "1", false, constraints).unwrap_err();
        assert!(matches!(err, PoolError::DuplicateId(7)), "{err}");
        assert!(err.to_string().contains('7'));
    }

    #[test]
    fn non_canonical_flag_relaxes_structure() {
        let small = ConstraintPool::placeholder_sized(30);
        let json = small.to_json_string();
        assert_eq!(ConstraintPool::from_json_str(&json).unwrap().len(), 30);

        let strict = json.replace("\"canonical\": false", "\"canonical\": true");
        let err = ConstraintPool::from_json_str(&strict).unwrap_err();
        assert!(matches!(err, PoolError::Structure(_)));
    }

    #[test]
    fn structure_error_names_offending_category() {
        let mut constraints = ConstraintPool::placeholder().constraints().to_vec();
        constraints[0].category = "climax".into();
        let err = ConstraintPool::new("bad", "1", true, constraints).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("Event/climax") || msg.contains("Event/inciting"),
            "{msg}"
        );
    }

    #[test]
    fn gaps_in_ids_are_rejected() {
        let mut constraints = ConstraintPool::placeholder_sized(5).constraints().to_vec();
        constraints[4].id = 9;
        assert!(matches!(
            ConstraintPool::new("gap", "1", false, constraints),
            Err(PoolError::NonContiguousIds { id: 9, .. })
        ));
    }

    #[test]
    fn empty_text_is_rejected() {
        let mut constraints = ConstraintPool::placeholder_sized(5).constraints().to_vec();
        constraints[2].text = "  ".into();
        assert!(matches!(
            ConstraintPool::new("blank", "1", false, constraints),
            Err(PoolError::EmptyText(3))
        ));
    }

    #[test]
    fn permute_is_deterministic() {
        let pool = ConstraintPool::placeholder();
        let a = permute(&pool, 0xDEAD_BEEF);
        let b = permute(&pool, 0xDEAD_BEEF);
        assert_eq!(a, b);
        assert_ne!(a.order, permute(&pool, 0xDEAD_BEF0).order);
        let mut sorted = a.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, pool.ids());
    }

    #[test]
    fn permutation_algorithm_is_frozen() {
        let pool = ConstraintPool::placeholder_sized(10);
        assert_eq!(permute(&pool, 7).order, [3, 8, 1, 7, 4, 5, 9, 2, 10, 6]);
    }

    #[test]
    fn permute_is_uniform_over_s3() {
        // Exact distribution is 1/6 per ordering; 6,000 draws.
        let pool = ConstraintPool::placeholder_sized(3);
        let mut counts: HashMap<Vec<ConstraintId>, usize> = HashMap::new();
        let draws = 6_000;
        for s in 0..draws {
            *counts.entry(permute(&pool, s).order).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let mut chi2 = 0.0;
        for &c in counts.values() {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 6.0).abs() <= 0.02, "frequency {freq}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 99.9th percentile of chi-square with 5 degrees of freedom.
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn permute_is_a_bijection(size in 1usize..120, seed in any::<u64>()) {
            let pool = ConstraintPool::placeholder_sized(size);
            let p = permute(&pool, seed);
            prop_assert!(p.matches(&pool));
        }

        #[test]
        fn pool_json_round_trips(size in 1usize..60) {
            let pool = ConstraintPool::placeholder_sized(size);
            let back = ConstraintPool::from_json_str(&pool.to_json_string()).unwrap();
            prop_assert_eq!(back, pool);
        }
    }
}
