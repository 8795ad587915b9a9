use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

/// Variable families. Declaration order is the column sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Symbol {
    P,
    Pdch,
    Pch,
    PM,
    C,
    LS,
    I,
    U,
    V,
    Z,
    D,
    Seg,
    SUvar,
    SDvar,
}

impl Symbol {
    pub const ALL: [Symbol; 14] = [
        Symbol::P,
        Symbol::Pdch,
        Symbol::Pch,
        Symbol::PM,
        Symbol::C,
        Symbol::LS,
        Symbol::I,
        Symbol::U,
        Symbol::V,
        Symbol::Z,
        Symbol::D,
        Symbol::Seg,
        Symbol::SUvar,
        Symbol::SDvar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Symbol::P => "P",
            Symbol::Pdch => "Pdch",
            Symbol::Pch => "Pch",
            Symbol::PM => "PM",
            Symbol::C => "C",
            Symbol::LS => "LS",
            Symbol::I => "I",
            Symbol::U => "u",
            Symbol::V => "v",
            Symbol::Z => "z",
            Symbol::D => "D",
            Symbol::Seg => "seg",
            Symbol::SUvar => "SU",
            Symbol::SDvar => "SD",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Symbol::I | Symbol::U | Symbol::V | Symbol::Z)
    }

    /// Whether the family carries a scenario index.
    pub fn per_scenario(self) -> bool {
        matches!(
            self,
            Symbol::P | Symbol::Pdch | Symbol::Pch | Symbol::PM | Symbol::C | Symbol::LS
        )
    }

    /// Whether the family carries a sub-period index.
    pub fn per_subperiod(self) -> bool {
        !matches!(
            self,
            Symbol::I | Symbol::U | Symbol::V | Symbol::Z | Symbol::SUvar | Symbol::SDvar
        )
    }

    /// Whether the family belongs to a unit, storage or load.
    pub fn owned(self) -> bool {
        !matches!(self, Symbol::PM | Symbol::LS)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Semantic coordinate of a column. Absent dimensions are 0; `owner` is the
/// position in the instance's unit, storage or load list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarKey {
    pub symbol: Symbol,
    pub owner: usize,
    pub t: usize,
    pub k: usize,
    pub s: usize,
    /// Cost segment, 1-based, for `Seg` only.
    pub m: usize,
}

impl VarKey {
    pub fn new(symbol: Symbol, owner: usize, t: usize, k: usize, s: usize) -> Self {
        Self {
            symbol,
            owner,
            t,
            k,
            s,
            m: 0,
        }
    }

    pub fn global(symbol: Symbol, t: usize, k: usize, s: usize) -> Self {
        Self::new(symbol, 0, t, k, s)
    }

    pub fn hourly(symbol: Symbol, owner: usize, t: usize) -> Self {
        Self::new(symbol, owner, t, 0, 0)
    }

    pub fn segment(owner: usize, t: usize, k: usize, m: usize) -> Self {
        Self {
            m,
            ..Self::new(Symbol::Seg, owner, t, k, 0)
        }
    }

    /// Column name such as `P_g1_t4_k2_s0`.
    pub fn name(&self, owner_id: &str) -> String {
        let mut n = String::from(self.symbol.as_str());
        if self.symbol.owned() {
            n.push('_');
            n.push_str(owner_id);
        }
        n.push_str(&format!("_t{}", self.t));
        if self.symbol.per_subperiod() {
            n.push_str(&format!("_k{}", self.k));
        }
        if self.symbol == Symbol::Seg {
            n.push_str(&format!("_m{}", self.m));
        }
        if self.symbol.per_scenario() {
            n.push_str(&format!("_s{}", self.s));
        }
        n
    }
}

/// Column position of every semantic coordinate and back.
#[derive(Debug, Clone, Default)]
pub struct VariableIndex {
    keys: Vec<VarKey>,
    columns: HashMap<VarKey, usize>,
}

impl VariableIndex {
    /// Builds the index from keys already in column order.
    pub fn from_sorted(keys: Vec<VarKey>) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let columns = keys.iter().enumerate().map(|(j, &k)| (k, j)).collect();
        Self { keys, columns }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &VarKey) -> Option<usize> {
        self.columns.get(key).copied()
    }

    /// Column of `key`; panics if the key was never declared.
    pub fn col(&self, key: VarKey) -> usize {
        match self.columns.get(&key) {
            Some(&j) => j,
            None => panic!("undeclared variable {key:?}"),
        }
    }

    pub fn key(&self, column: usize) -> VarKey {
        self.keys[column]
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }
}
