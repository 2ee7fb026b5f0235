//! Element data, slot-based bonding rules, the composition-keyed molecule
//! table and central-atom selection.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Table shipped with the crate.
pub const BUILTIN_TABLE: &str = include_str!("../data/chemistry.dat");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("table format error on line {line}: {reason}")]
    TableFormat { line: usize, reason: String },
    #[error("cannot read table {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("invalid formula `{0}`")]
    InvalidFormula(String),
    #[error("bond refused between atoms {a} and {b}: {reason}")]
    BondRefused { a: u32, b: u32, reason: String },
    #[error("atoms do not form a single bonded molecule")]
    NotAMolecule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub symbol: String,
    pub atomic_number: u32,
    /// Unified atomic mass units.
    pub atomic_mass: f64,
    /// Pauling scale.
    pub electronegativity: f64,
    /// Bond capacity.
    pub free_slots: u8,
    pub display_color: String,
}

/// Element multiset, keyed by symbol.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Composition(BTreeMap<String, u32>);

impl Composition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, symbol: &str, count: u32) {
        if count > 0 {
            *self.0.entry(symbol.to_owned()).or_default() += count;
        }
    }

    pub fn count(&self, symbol: &str) -> u32 {
        self.0.get(symbol).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(s, &c)| (s.as_str(), c))
    }
}

impl<'a> FromIterator<&'a str> for Composition {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let mut c = Composition::new();
        for s in iter {
            c.add(s, 1);
        }
        c
    }
}

/// Parses formulas such as `H2O` or `CH3OH`; repeated elements accumulate.
impl FromStr for Composition {
    type Err = ChemError;

    fn from_str(formula: &str) -> Result<Self, Self::Err> {
        let bad = || ChemError::InvalidFormula(formula.to_owned());
        let chars: Vec<char> = formula.chars().collect();
        let mut comp = Composition::new();
        let mut i = 0;
        while i < chars.len() {
            if !chars[i].is_ascii_uppercase() {
                return Err(bad());
            }
            let mut symbol = chars[i].to_string();
            i += 1;
            while i < chars.len() && chars[i].is_ascii_lowercase() {
                symbol.push(chars[i]);
                i += 1;
            }
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let count = if start == i {
                1
            } else {
                chars[start..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| bad())?
            };
            if count == 0 {
                return Err(bad());
            }
            comp.add(&symbol, count);
        }
        if comp.is_empty() {
            return Err(bad());
        }
        Ok(comp)
    }
}

/// Hill order: C first, then H, then the rest alphabetically. Without
/// carbon everything is alphabetical.
impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut order: Vec<&str> = Vec::new();
        if self.count("C") > 0 {
            order.push("C");
            if self.count("H") > 0 {
                order.push("H");
            }
        }
        let head = order.len();
        for s in self.0.keys().map(String::as_str) {
            if !order[..head].contains(&s) {
                order.push(s);
            }
        }
        for s in order {
            match self.count(s) {
                1 => write!(f, "{s}")?,
                n => write!(f, "{s}{n}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRecord {
    pub composition: Composition,
    pub geometry: String,
    /// Standard formation free energy, kJ/mol.
    pub gibbs_free_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemTable {
    elements: BTreeMap<String, Element>,
    molecules: BTreeMap<Composition, MoleculeRecord>,
}

impl ChemTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("shipped chemistry table parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ChemError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ChemError> {
        let mut elements = BTreeMap::new();
        let mut molecules = BTreeMap::new();
        let mut pending = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |reason: &str| ChemError::TableFormat {
                line,
                reason: reason.to_owned(),
            };
            match fields[0] {
                "E" => {
                    let [_, symbol, z, mass, en, slots, color] = fields[..] else {
                        return Err(err("element line needs 6 fields"));
                    };
                    let el = Element {
                        symbol: symbol.to_owned(),
                        atomic_number: z.parse().map_err(|_| err("bad atomic number"))?,
                        atomic_mass: mass.parse().map_err(|_| err("bad atomic mass"))?,
                        electronegativity: en.parse().map_err(|_| err("bad electronegativity"))?,
                        free_slots: slots.parse().map_err(|_| err("bad free slot count"))?,
                        display_color: color.to_owned(),
                    };
                    if el.electronegativity <= 0.0 || !el.electronegativity.is_finite() {
                        return Err(err("electronegativity must be positive"));
                    }
                    if el.free_slots == 0 {
                        return Err(err("free slots must be >= 1"));
                    }
                    if el.atomic_number == 0 {
                        return Err(err("atomic number must be positive"));
                    }
                    if elements.contains_key(symbol) {
                        return Err(err(&format!("duplicate element `{symbol}`")));
                    }
                    if elements
                        .values()
                        .any(|e: &Element| e.display_color == el.display_color)
                    {
                        return Err(err(&format!("display color `{color}` already used")));
                    }
                    elements.insert(symbol.to_owned(), el);
                }
                "M" => {
                    let [_, formula, geometry, gibbs] = fields[..] else {
                        return Err(err("molecule line needs 3 fields"));
                    };
                    let composition: Composition = formula
                        .parse()
                        .map_err(|_| err(&format!("bad formula `{formula}`")))?;
                    let gibbs_free_energy: f64 =
                        gibbs.parse().map_err(|_| err("bad Gibbs energy"))?;
                    if molecules.contains_key(&composition) {
                        return Err(err(&format!("duplicate molecule `{formula}`")));
                    }
                    pending.push((line, composition.clone()));
                    molecules.insert(
                        composition.clone(),
                        MoleculeRecord {
                            composition,
                            geometry: geometry.to_owned(),
                            gibbs_free_energy,
                        },
                    );
                }
                other => return Err(err(&format!("unknown record type `{other}`"))),
            }
        }
        for (line, comp) in pending {
            if let Some((sym, _)) = comp.iter().find(|(s, _)| !elements.contains_key(*s)) {
                return Err(ChemError::TableFormat {
                    line,
                    reason: format!("molecule uses unknown element `{sym}`"),
                });
            }
        }
        Ok(ChemTable {
            elements,
            molecules,
        })
    }

    pub fn element(&self, symbol: &str) -> Result<&Element, ChemError> {
        self.elements
            .get(symbol)
            .ok_or_else(|| ChemError::UnknownElement(symbol.to_owned()))
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn molecule_lookup(&self, composition: &Composition) -> Option<&MoleculeRecord> {
        self.molecules.get(composition)
    }

    pub fn molecules(&self) -> impl Iterator<Item = &MoleculeRecord> {
        self.molecules.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub partner: u32,
    pub order: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomInstance {
    pub id: u32,
    pub element: Element,
    pub bonds: Vec<Bond>,
}

impl AtomInstance {
    pub fn new(id: u32, element: Element) -> Self {
        AtomInstance {
            id,
            element,
            bonds: Vec::new(),
        }
    }

    pub fn used_slots(&self) -> u8 {
        self.bonds.iter().map(|b| b.order).sum()
    }

    pub fn remaining_slots(&self) -> u8 {
        self.element.free_slots.saturating_sub(self.used_slots())
    }

    pub fn bond_with(&self, partner: u32) -> Option<Bond> {
        self.bonds.iter().copied().find(|b| b.partner == partner)
    }

    pub fn is_bonded(&self) -> bool {
        !self.bonds.is_empty()
    }

    pub(crate) fn drop_bond(&mut self, partner: u32) {
        self.bonds.retain(|b| b.partner != partner);
    }
}

/// Both atoms still have at least one free slot.
pub fn can_bond(a: &AtomInstance, b: &AtomInstance) -> bool {
    a.id != b.id && a.remaining_slots() >= 1 && b.remaining_slots() >= 1
}

/// Records a symmetric bond of `order`, or raises an existing bond's order.
pub fn form_bond(a: &mut AtomInstance, b: &mut AtomInstance, order: u8) -> Result<(), ChemError> {
    let refuse = |reason: &str| ChemError::BondRefused {
        a: a.id,
        b: b.id,
        reason: reason.to_owned(),
    };
    if a.id == b.id {
        return Err(refuse("an atom cannot bond with itself"));
    }
    if order == 0 {
        return Err(refuse("bond order must be >= 1"));
    }
    if order > a.remaining_slots().min(b.remaining_slots()) {
        return Err(refuse("not enough free slots"));
    }
    let (a_id, b_id) = (a.id, b.id);
    for (atom, partner) in [(&mut *a, b_id), (&mut *b, a_id)] {
        match atom.bonds.iter_mut().find(|x| x.partner == partner) {
            Some(bond) => bond.order += order,
            None => atom.bonds.push(Bond { partner, order }),
        }
    }
    Ok(())
}

/// Highest bond order for a pair: identical elements take the largest order
/// both can support (capped at a triple bond) when multi-bonds are enabled,
/// everything else bonds singly.
pub fn preferred_order(a: &AtomInstance, b: &AtomInstance, multi_bonds: bool) -> u8 {
    if multi_bonds && a.element.symbol == b.element.symbol {
        a.remaining_slots().min(b.remaining_slots()).clamp(1, 3)
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralAtoms {
    pub ids: Vec<u32>,
    pub diatomic: bool,
}

/// Center selection on bare (id, element) pairs: a two-member set with equal
/// electronegativities is a diatomic and both are centers, otherwise every
/// member at the maximum electronegativity is returned.
pub fn most_electronegative<'a, I>(members: I) -> CentralAtoms
where
    I: IntoIterator<Item = (u32, &'a Element)>,
{
    let mut members: Vec<(u32, f64)> = members
        .into_iter()
        .map(|(id, el)| (id, el.electronegativity))
        .collect();
    members.sort_by_key(|m| m.0);
    if let [(a, ea), (b, eb)] = members[..] {
        if ea == eb {
            return CentralAtoms {
                ids: vec![a, b],
                diatomic: true,
            };
        }
    }
    let top = members
        .iter()
        .map(|m| m.1)
        .fold(f64::NEG_INFINITY, f64::max);
    CentralAtoms {
        ids: members.iter().filter(|m| m.1 == top).map(|m| m.0).collect(),
        diatomic: false,
    }
}

/// Central atom(s) of a bonded molecule.
pub fn central_atoms(members: &[AtomInstance]) -> Result<CentralAtoms, ChemError> {
    let ids: BTreeSet<u32> = members.iter().map(|a| a.id).collect();
    let Some(&start) = ids.first() else {
        return Err(ChemError::NotAMolecule);
    };
    let by_id: BTreeMap<u32, &AtomInstance> = members.iter().map(|a| (a.id, a)).collect();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(id) = queue.pop_front() {
        for bond in &by_id[&id].bonds {
            if ids.contains(&bond.partner) && seen.insert(bond.partner) {
                queue.push_back(bond.partner);
            }
        }
    }
    if seen.len() != ids.len() {
        return Err(ChemError::NotAMolecule);
    }
    Ok(most_electronegative(
        members.iter().map(|a| (a.id, &a.element)),
    ))
}

/// Element multiset of a set of atoms.
pub fn composition_of<'a>(atoms: impl IntoIterator<Item = &'a AtomInstance>) -> Composition {
    atoms
        .into_iter()
        .map(|a| a.element.symbol.as_str())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(table: &ChemTable, id: u32, sym: &str) -> AtomInstance {
        AtomInstance::new(id, table.element(sym).unwrap().clone())
    }

    fn bonded(
        table: &ChemTable,
        symbols: &[&str],
        bonds: &[(usize, usize, u8)],
    ) -> Vec<AtomInstance> {
        let mut atoms: Vec<_> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| atom(table, i as u32, s))
            .collect();
        for &(i, j, order) in bonds {
            let (lo, hi) = atoms.split_at_mut(j);
            form_bond(&mut lo[i], &mut hi[0], order).unwrap();
        }
        atoms
    }

    #[test]
    fn builtin_table_reference_values() {
        let t = ChemTable::builtin();
        let h = t.element("H").unwrap();
        assert_eq!(
            (h.atomic_number, h.electronegativity, h.free_slots),
            (1, 2.20, 1)
        );
        let o = t.element("O").unwrap();
        assert_eq!(
            (o.atomic_number, o.electronegativity, o.free_slots),
            (8, 3.44, 2)
        );
        let c = t.element("C").unwrap();
        assert_eq!(
            (c.atomic_number, c.electronegativity, c.free_slots),
            (6, 2.55, 4)
        );
        assert_eq!(h.display_color, "green");
        assert_eq!(o.display_color, "blue");
        assert_eq!(c.display_color, "pink");
    }

    #[test]
    fn table_format_errors() {
        let dup = "E H 1 1.0 2.2 1 green\nE H 1 1.0 2.2 1 red\n";
        assert!(matches!(
            ChemTable::parse(dup),
            Err(ChemError::TableFormat { line: 2, .. })
        ));
        let short = "E H 1 1.0 2.2 1\n";
        assert!(matches!(
            ChemTable::parse(short),
            Err(ChemError::TableFormat { line: 1, .. })
        ));
        let color = "E H 1 1.0 2.2 1 green\nE O 8 16 3.4 2 green\n";
        assert!(ChemTable::parse(color).is_err());
        let unknown = "# c\nE H 1 1.0 2.2 1 green\nM HX bent 1.0\n";
        assert!(matches!(
            ChemTable::parse(unknown),
            Err(ChemError::TableFormat { line: 3, .. })
        ));
        assert!(ChemTable::parse("X foo\n").is_err());
        assert!(ChemTable::parse("E H 1 1.0 -2.2 1 green\n").is_err());
        assert!(ChemTable::parse("E H 1 1.0 2.2 0 green\n").is_err());
    }

    #[test]
    fn formula_parsing_and_display() {
        let c: Composition = "CH3OH".parse().unwrap();
        assert_eq!((c.count("C"), c.count("H"), c.count("O")), (1, 4, 1));
        assert_eq!(c.to_string(), "CH4O");
        assert_eq!("OH2".parse::<Composition>().unwrap().to_string(), "H2O");
        assert_eq!("O2".parse::<Composition>().unwrap().to_string(), "O2");
        for bad in ["", "h2", "H0", "2H"] {
            assert!(bad.parse::<Composition>().is_err(), "{bad}");
        }
    }

    #[test]
    fn lookup_examples() {
        let t = ChemTable::builtin();
        let water = t.molecule_lookup(&"H2O".parse().unwrap()).unwrap();
        assert_eq!(water.geometry, "bent");
        assert_eq!(water.gibbs_free_energy, -237.1);
        let o2 = t.molecule_lookup(&"O2".parse().unwrap()).unwrap();
        assert_eq!(
            (o2.geometry.as_str(), o2.gibbs_free_energy),
            ("linear-diatomic", 0.0)
        );
        let ch4 = t
            .molecule_lookup(&["C", "H", "H", "H", "H"].into_iter().collect())
            .unwrap();
        assert_eq!(
            (ch4.geometry.as_str(), ch4.gibbs_free_energy),
            ("tetrahedral", -50.7)
        );
        assert!(t.molecule_lookup(&"CH2".parse().unwrap()).is_none());
    }

    #[test]
    fn can_bond_examples() {
        let t = ChemTable::builtin();
        assert!(can_bond(&atom(&t, 0, "H"), &atom(&t, 1, "H")));

        let water = bonded(&t, &["O", "H", "H"], &[(0, 1, 1), (0, 2, 1)]);
        assert!(!can_bond(&water[0], &atom(&t, 9, "H")));

        let ch = bonded(&t, &["C", "H"], &[(0, 1, 1)]);
        assert!(can_bond(&ch[0], &atom(&t, 9, "H")));
    }

    #[test]
    fn form_bond_examples() {
        let t = ChemTable::builtin();
        let (mut a, mut b) = (atom(&t, 0, "O"), atom(&t, 1, "O"));
        assert_eq!(preferred_order(&a, &b, true), 2);
        assert_eq!(preferred_order(&a, &b, false), 1);
        form_bond(&mut a, &mut b, 2).unwrap();
        assert_eq!((a.remaining_slots(), b.remaining_slots()), (0, 0));
        assert_eq!(
            a.bond_with(1),
            Some(Bond {
                partner: 1,
                order: 2
            })
        );

        let (mut h1, mut h2) = (atom(&t, 0, "H"), atom(&t, 1, "H"));
        form_bond(&mut h1, &mut h2, 1).unwrap();
        assert_eq!((h1.remaining_slots(), h2.remaining_slots()), (0, 0));

        let mut c = atom(&t, 0, "C");
        for id in 1..=4 {
            let mut h = atom(&t, id, "H");
            form_bond(&mut c, &mut h, 1).unwrap();
        }
        assert_eq!(c.remaining_slots(), 0);
        let mut extra = atom(&t, 5, "H");
        assert!(matches!(
            form_bond(&mut c, &mut extra, 1),
            Err(ChemError::BondRefused { .. })
        ));
        assert!(extra.bonds.is_empty());
    }

    #[test]
    fn central_atom_examples() {
        let t = ChemTable::builtin();
        let water = bonded(&t, &["H", "O", "H"], &[(0, 1, 1), (1, 2, 1)]);
        assert_eq!(
            central_atoms(&water).unwrap(),
            CentralAtoms {
                ids: vec![1],
                diatomic: false
            }
        );

        let o2 = bonded(&t, &["O", "O"], &[(0, 1, 2)]);
        assert_eq!(
            central_atoms(&o2).unwrap(),
            CentralAtoms {
                ids: vec![0, 1],
                diatomic: true
            }
        );

        let ch4 = bonded(
            &t,
            &["H", "H", "C", "H", "H"],
            &[(0, 2, 1), (1, 2, 1), (2, 3, 1), (2, 4, 1)],
        );
        assert_eq!(
            central_atoms(&ch4).unwrap(),
            CentralAtoms {
                ids: vec![2],
                diatomic: false
            }
        );

        let split = bonded(&t, &["H", "H", "O"], &[(0, 1, 1)]);
        assert_eq!(central_atoms(&split), Err(ChemError::NotAMolecule));
        assert_eq!(central_atoms(&[]), Err(ChemError::NotAMolecule));
    }
}
