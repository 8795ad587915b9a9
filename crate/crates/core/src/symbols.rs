//! Mathematical symbols and where each one lives in the code.

use crate::index::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// A field of an instance type: (type name, field name).
    Field(&'static str, &'static str),
    /// A model column family.
    Variable(Symbol),
    /// Computed from other data by the named function.
    Derived(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct SymbolEntry {
    pub symbol: &'static str,
    pub binding: Binding,
    pub unit: &'static str,
}

const fn field(symbol: &'static str, ty: &'static str, name: &'static str, unit: &'static str) -> SymbolEntry {
    SymbolEntry { symbol, binding: Binding::Field(ty, name), unit }
}

const fn var(symbol: &'static str, s: Symbol, unit: &'static str) -> SymbolEntry {
    SymbolEntry { symbol, binding: Binding::Variable(s), unit }
}

const fn derived(symbol: &'static str, by: &'static str, unit: &'static str) -> SymbolEntry {
    SymbolEntry { symbol, binding: Binding::Derived(by), unit }
}

pub const SYMBOLS: &[SymbolEntry] = &[
    field("T", "TimeGrid", "periods", "h"),
    field("K", "TimeGrid", "subperiods", "-"),
    derived("tau", "TimeGrid::tau", "h"),
    derived("Theta", "TimeGrid::horizon", "-"),
    field("P^min", "DispatchableUnit", "p_min", "MW"),
    field("P^max", "DispatchableUnit", "p_max", "MW"),
    field("UR", "DispatchableUnit", "ramp_up", "MW/tau"),
    field("DR", "DispatchableUnit", "ramp_down", "MW/tau"),
    field("UT", "DispatchableUnit", "min_up", "h"),
    field("DT", "DispatchableUnit", "min_down", "h"),
    field("F", "DispatchableUnit", "cost", "$/h"),
    field("P^ch,min", "StorageUnit", "charge_min", "MW"),
    field("P^ch,max", "StorageUnit", "charge_max", "MW"),
    field("P^dch,min", "StorageUnit", "discharge_min", "MW"),
    field("P^dch,max", "StorageUnit", "discharge_max", "MW"),
    field("C^min", "StorageUnit", "energy_min", "MWh"),
    field("C^max", "StorageUnit", "energy_max", "MWh"),
    field("C_0", "StorageUnit", "initial_energy", "MWh"),
    field("eta", "StorageUnit", "efficiency", "-"),
    field("MC", "StorageUnit", "min_charge", "h"),
    field("MD", "StorageUnit", "min_discharge", "h"),
    field("D^min", "AdjustableLoad", "d_min", "MW"),
    field("D^max", "AdjustableLoad", "d_max", "MW"),
    field("alpha", "AdjustableLoad", "start", "h"),
    field("beta", "AdjustableLoad", "end", "h"),
    field("E", "AdjustableLoad", "energy", "MWh"),
    field("MU", "AdjustableLoad", "min_on", "h"),
    field("P^c", "FixedSeries", "values", "MW"),
    field("rho", "MarketPrice", "rho", "$/MWh"),
    field("P^M,max", "MicrogridInstance", "pm_max", "MW"),
    field("lambda", "MicrogridInstance", "voll", "$/MWh"),
    field("Delta_1", "FlexibilitySpec", "delta1", "MW/tau"),
    field("Delta_2", "FlexibilitySpec", "delta2", "MW"),
    derived("w", "ScenarioSet::w", "-"),
    derived("psi", "ScenarioSet::psi", "-"),
    derived("P^u", "validator::utility_power", "MW"),
    var("P", Symbol::P, "MW"),
    var("P^dch", Symbol::Pdch, "MW"),
    var("P^ch", Symbol::Pch, "MW"),
    var("P^M", Symbol::PM, "MW"),
    var("C", Symbol::C, "MWh"),
    var("LS", Symbol::LS, "MW"),
    var("I", Symbol::I, "-"),
    var("u", Symbol::U, "-"),
    var("v", Symbol::V, "-"),
    var("z", Symbol::Z, "-"),
    var("D", Symbol::D, "MW"),
    var("SU", Symbol::SUvar, "-"),
    var("SD", Symbol::SDvar, "-"),
];

pub fn lookup(symbol: &str) -> Option<&'static SymbolEntry> {
    SYMBOLS.iter().find(|e| e.symbol == symbol)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::instance::tests::sample;

    fn object_of<'a>(root: &'a serde_json::Value, ty: &str) -> &'a serde_json::Value {
        match ty {
            "MicrogridInstance" => root,
            "TimeGrid" => &root["grid"],
            "DispatchableUnit" => &root["units"][0],
            "StorageUnit" => &root["storages"][0],
            "AdjustableLoad" => &root["adjustable"][0],
            "FixedSeries" => &root["fixed_series"][0],
            "MarketPrice" => &root["prices"],
            "FlexibilitySpec" => &root["flex"],
            other => panic!("unknown type {other}"),
        }
    }

    #[test]
    fn every_symbol_resolves_once() {
        let root = serde_json::to_value(sample()).unwrap();
        let mut names = BTreeSet::new();
        let mut fields = BTreeSet::new();
        let mut vars = BTreeSet::new();
        for e in SYMBOLS {
            assert!(names.insert(e.symbol), "duplicate symbol {}", e.symbol);
            match e.binding {
                Binding::Field(ty, f) => {
                    let obj = object_of(&root, ty);
                    assert!(obj.get(f).is_some(), "{} -> {ty}.{f} does not exist", e.symbol);
                    assert!(fields.insert((ty, f)), "{ty}.{f} bound twice");
                }
                Binding::Variable(s) => assert!(vars.insert(s.as_str()), "{s:?} bound twice"),
                Binding::Derived(_) => {}
            }
        }
        // Only the linearization segments have no symbol of their own.
        for s in Symbol::ALL.iter().filter(|s| **s != Symbol::Seg) {
            assert!(vars.contains(s.as_str()), "{s:?} has no symbol");
        }
        assert_eq!(lookup("MU").unwrap().binding, Binding::Field("AdjustableLoad", "min_on"));
    }
}
