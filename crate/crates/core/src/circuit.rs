//! Fault propagation through the toric-code syndrome-extraction circuit and
//! reduction of circuit-level depolarizing noise to effective model rates.
//!
//! The circuit runs on an `L × L` torus. Data qubit `h(x,y)` sits on the edge
//! from vertex (x,y) to (x+1,y), `v(x,y)` on the edge from (x,y) to (x,y+1).
//! The X check of vertex (x,y) touches, in west-north-south-east order,
//! `h(x-1,y), v(x,y), v(x,y-1), h(x,y)`; the Z check of face (x,y) touches
//! `v(x,y), h(x,y+1), h(x,y), v(x+1,y)`. X-check ancillas are CNOT controls,
//! Z-check ancillas are CNOT targets and skip the Hadamards.
//!
//! A fault is injected in one round and followed through later rounds. Each
//! syndrome sector then shows zero or two detection events; the effect bits
//! record whether the pair is separated along y (`i`), along x (`j`) or in
//! time (`t`).

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseRates;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckType {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    DataH,
    DataV,
    AncillaX,
    AncillaZ,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::DataH, Role::DataV, Role::AncillaX, Role::AncillaZ];

    pub fn name(self) -> &'static str {
        match self {
            Role::DataH => "data_h",
            Role::DataV => "data_v",
            Role::AncillaX => "ancilla_x",
            Role::AncillaZ => "ancilla_z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    Prep,
    Hadamard,
    Idle,
    /// The `order`-th CNOT (1 to 4) of a check of the given type.
    Cnot { check: CheckType, order: usize },
    Measure,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::Prep => f.write_str("prep"),
            GateKind::Hadamard => f.write_str("hadamard"),
            GateKind::Idle => f.write_str("idle"),
            GateKind::Cnot { check, order } => write!(f, "CNOT{order}^{check:?}"),
            GateKind::Measure => f.write_str("measure"),
        }
    }
}

/// What each qubit role does in one time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub data: GateKind,
    pub ancilla_x: GateKind,
    pub ancilla_z: GateKind,
}

impl Step {
    pub fn gate(&self, role: Role) -> GateKind {
        match role {
            Role::DataH | Role::DataV => self.data,
            Role::AncillaX => self.ancilla_x,
            Role::AncillaZ => self.ancilla_z,
        }
    }
}

/// One round of syndrome extraction on the translation-invariant unit cell
/// (one horizontal and one vertical data qubit, one ancilla per check type).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitCellCircuit {
    steps: Vec<Step>,
    torus: usize,
    rounds: usize,
    fault_round: usize,
}

impl Default for UnitCellCircuit {
    fn default() -> Self {
        UnitCellCircuit::toric()
    }
}

impl UnitCellCircuit {
    /// The eight-step schedule: prep, Hadamard or idle, four CNOT layers,
    /// Hadamard or idle, measure.
    pub fn toric() -> Self {
        use GateKind::*;
        let mut steps = vec![
            Step {
                data: Idle,
                ancilla_x: Prep,
                ancilla_z: Prep,
            },
            Step {
                data: Idle,
                ancilla_x: Hadamard,
                ancilla_z: Idle,
            },
        ];
        for order in 1..=4 {
            steps.push(Step {
                data: Cnot {
                    check: CheckType::X,
                    order,
                },
                ancilla_x: Cnot {
                    check: CheckType::X,
                    order,
                },
                ancilla_z: Cnot {
                    check: CheckType::Z,
                    order,
                },
            });
        }
        steps.push(Step {
            data: Idle,
            ancilla_x: Hadamard,
            ancilla_z: Idle,
        });
        steps.push(Step {
            data: Idle,
            ancilla_x: Measure,
            ancilla_z: Measure,
        });
        UnitCellCircuit {
            steps,
            torus: 6,
            rounds: 4,
            fault_round: 1,
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    fn h(&self, x: isize, y: isize) -> usize {
        let l = self.torus as isize;
        (y.rem_euclid(l) * l + x.rem_euclid(l)) as usize
    }

    fn v(&self, x: isize, y: isize) -> usize {
        self.torus * self.torus + self.h(x, y)
    }

    fn ancilla(&self, check: CheckType, x: isize, y: isize) -> usize {
        let n = self.torus * self.torus;
        match check {
            CheckType::X => 2 * n + self.h(x, y),
            CheckType::Z => 3 * n + self.h(x, y),
        }
    }

    /// Data qubits of a check in CNOT order.
    fn support(&self, check: CheckType, x: isize, y: isize) -> [usize; 4] {
        match check {
            CheckType::X => [self.h(x - 1, y), self.v(x, y), self.v(x, y - 1), self.h(x, y)],
            CheckType::Z => [self.v(x, y), self.h(x, y + 1), self.h(x, y), self.v(x + 1, y)],
        }
    }

    fn centre(&self) -> isize {
        (self.torus / 2) as isize
    }

    /// Every data qubit takes part in exactly one CNOT per CNOT layer.
    pub fn validate(&self) -> Result<()> {
        if self.steps.len() != 8 {
            return Err(Error::Domain(format!("schedule has {} steps, expected 8", self.steps.len())));
        }
        let n = self.torus * self.torus;
        for order in 0..4 {
            let mut uses = vec![0u32; 2 * n];
            for check in [CheckType::X, CheckType::Z] {
                for y in 0..self.torus as isize {
                    for x in 0..self.torus as isize {
                        uses[self.support(check, x, y)[order]] += 1;
                    }
                }
            }
            if uses.iter().any(|&u| u != 1) {
                return Err(Error::Domain(format!("CNOT layer {} reuses a data qubit", order + 1)));
            }
        }
        Ok(())
    }

    /// Qubit of a role in the central unit cell.
    fn qubit(&self, role: Role) -> usize {
        let c = self.centre();
        match role {
            Role::DataH => self.h(c, c),
            Role::DataV => self.v(c, c),
            Role::AncillaX => self.ancilla(CheckType::X, c, c),
            Role::AncillaZ => self.ancilla(CheckType::Z, c, c),
        }
    }

    /// All single-qubit fault locations of the unit cell, in step order.
    pub fn single_qubit_locations(&self) -> Vec<(usize, Role, GateKind)> {
        let mut out = Vec::new();
        for (s, step) in self.steps.iter().enumerate() {
            for role in Role::ALL {
                let g = step.gate(role);
                if !matches!(g, GateKind::Cnot { .. }) {
                    out.push((s + 1, role, g));
                }
            }
        }
        out
    }
}

/// A Pauli fault at one circuit location. Two-qubit faults list the data
/// qubit's Pauli first, then the ancilla's.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FaultLocation {
    Single {
        step: usize,
        role: Role,
        pauli: Pauli,
    },
    Cnot {
        check: CheckType,
        order: usize,
        data: Pauli,
        ancilla: Pauli,
    },
}

/// Triggered edges (i_Z, j_Z, t_Z, i_X, j_X, t_X) of the unit cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyndromeEffect(pub [bool; 6]);

impl SyndromeEffect {
    pub const COLUMNS: [&'static str; 6] = ["i_Z", "j_Z", "t_Z", "i_X", "j_X", "t_X"];

    pub fn i_z(&self) -> bool {
        self.0[0]
    }
    pub fn j_z(&self) -> bool {
        self.0[1]
    }
    pub fn t_z(&self) -> bool {
        self.0[2]
    }
    pub fn i_x(&self) -> bool {
        self.0[3]
    }
    pub fn j_x(&self) -> bool {
        self.0[4]
    }
    pub fn t_x(&self) -> bool {
        self.0[5]
    }

    pub fn is_trivial(&self) -> bool {
        self.0.iter().all(|b| !b)
    }

    pub fn xor(&self, other: &SyndromeEffect) -> SyndromeEffect {
        let mut out = [false; 6];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.0[k] ^ other.0[k];
        }
        SyndromeEffect(out)
    }
}

struct Frame {
    x: Vec<bool>,
    z: Vec<bool>,
}

impl Frame {
    fn apply(&mut self, q: usize, p: Pauli) {
        let (x, z) = p.bits();
        self.x[q] ^= x;
        self.z[q] ^= z;
    }

    fn cnot(&mut self, c: usize, t: usize) {
        self.x[t] ^= self.x[c];
        self.z[c] ^= self.z[t];
    }

    fn hadamard(&mut self, q: usize) {
        std::mem::swap(&mut self.x[q], &mut self.z[q]);
    }

    fn reset(&mut self, q: usize) {
        self.x[q] = false;
        self.z[q] = false;
    }
}

/// Follow one fault through the repeated circuit and read off the unit-cell
/// edges it triggers.
pub fn propagate_pauli(circuit: &UnitCellCircuit, fault: &FaultLocation) -> Result<SyndromeEffect> {
    match *fault {
        FaultLocation::Single { step, pauli, .. } => {
            if pauli == Pauli::I {
                return Err(Error::Domain("single-qubit fault must not be the identity".into()));
            }
            if step == 0 || step > circuit.steps.len() {
                return Err(Error::Domain(format!("no step {step} in the schedule")));
            }
        }
        FaultLocation::Cnot {
            order,
            data,
            ancilla,
            ..
        } => {
            if data == Pauli::I && ancilla == Pauli::I {
                return Err(Error::Domain("two-qubit fault must not be II".into()));
            }
            if !(1..=4).contains(&order) {
                return Err(Error::Domain(format!("no CNOT layer {order}")));
            }
        }
    }
    let l = circuit.torus as isize;
    let n = circuit.torus * circuit.torus;
    let mut frame = Frame {
        x: vec![false; 4 * n],
        z: vec![false; 4 * n],
    };
    let checks = [CheckType::X, CheckType::Z];
    let mut measured: Vec<Vec<bool>> = Vec::with_capacity(circuit.rounds);
    for round in 0..circuit.rounds {
        let mut outcomes = vec![false; 2 * n];
        for (s, step) in circuit.steps.iter().enumerate() {
            let mut layer = None;
            for (check, gate) in [(CheckType::X, step.ancilla_x), (CheckType::Z, step.ancilla_z)] {
                for y in 0..l {
                    for x in 0..l {
                        let a = circuit.ancilla(check, x, y);
                        match gate {
                            GateKind::Prep => frame.reset(a),
                            GateKind::Hadamard => frame.hadamard(a),
                            GateKind::Cnot { order, .. } => {
                                layer = Some(order);
                                let d = circuit.support(check, x, y)[order - 1];
                                match check {
                                    CheckType::X => frame.cnot(a, d),
                                    CheckType::Z => frame.cnot(d, a),
                                }
                            }
                            GateKind::Idle | GateKind::Measure => {}
                        }
                    }
                }
            }
            if round == circuit.fault_round {
                match *fault {
                    FaultLocation::Single { step: fs, role, pauli } if fs == s + 1 => {
                        frame.apply(circuit.qubit(role), pauli);
                    }
                    FaultLocation::Cnot {
                        check,
                        order,
                        data,
                        ancilla,
                    } if layer == Some(order) => {
                        let c = circuit.centre();
                        let a = circuit.ancilla(check, c, c);
                        let d = circuit.support(check, c, c)[order - 1];
                        frame.apply(d, data);
                        frame.apply(a, ancilla);
                    }
                    _ => {}
                }
            }
            for (ci, _) in checks.iter().enumerate() {
                let gate = if ci == 0 { step.ancilla_x } else { step.ancilla_z };
                if gate == GateKind::Measure {
                    for y in 0..l {
                        for x in 0..l {
                            let a = circuit.ancilla(checks[ci], x, y);
                            outcomes[ci * n + circuit.h(x, y)] = frame.x[a];
                        }
                    }
                }
            }
        }
        measured.push(outcomes);
    }

    let mut events: [Vec<(isize, isize, usize)>; 2] = [Vec::new(), Vec::new()];
    for (ci, sector) in events.iter_mut().enumerate() {
        for y in 0..l {
            for x in 0..l {
                let mut prev = false;
                for (r, m) in measured.iter().enumerate() {
                    let now = m[ci * n + circuit.h(x, y)];
                    if now != prev {
                        sector.push((x, y, r));
                    }
                    prev = now;
                }
            }
        }
    }
    let dist = |a: isize, b: isize| (a - b).rem_euclid(l).min((b - a).rem_euclid(l));
    let mut bits = [false; 6];
    for (ci, sector) in events.iter().enumerate() {
        // Z-check events fill the first three columns.
        let offset = if checks[ci] == CheckType::Z { 0 } else { 3 };
        match sector.as_slice() {
            [] => {}
            [(x1, y1, t1), (x2, y2, t2)] => {
                bits[offset] = dist(*y1, *y2) != 0;
                bits[offset + 1] = dist(*x1, *x2) != 0;
                bits[offset + 2] = t1 != t2;
            }
            other => {
                return Err(Error::Domain(format!(
                    "fault {fault:?} produced {} detection events in the {:?} sector",
                    other.len(),
                    checks[ci]
                )))
            }
        }
    }
    Ok(SyndromeEffect(bits))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnotTable {
    pub check: CheckType,
    pub order: usize,
    /// (data Pauli, ancilla Pauli, effect) for the 15 non-identity pairs.
    pub rows: Vec<(Pauli, Pauli, SyndromeEffect)>,
}

impl CnotTable {
    pub fn label(&self) -> String {
        format!("CNOT{}^{:?}", self.order, self.check)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleQubitRow {
    pub step: usize,
    pub role: Role,
    pub gate: GateKind,
    pub pauli: Pauli,
    pub effect: SyndromeEffect,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationTables {
    pub cnot: Vec<CnotTable>,
    pub single: Vec<SingleQubitRow>,
}

fn pauli_pairs() -> impl Iterator<Item = (Pauli, Pauli)> {
    Pauli::ALL
        .into_iter()
        .flat_map(|a| Pauli::ALL.into_iter().map(move |b| (a, b)))
        .filter(|&(a, b)| !(a == Pauli::I && b == Pauli::I))
}

/// Effects of every two-qubit fault after each of the eight CNOTs, ordered
/// CNOT1^X..CNOT4^X, CNOT1^Z..CNOT4^Z, plus every single-qubit location.
pub fn emit_location_tables(circuit: &UnitCellCircuit) -> Result<LocationTables> {
    circuit.validate()?;
    let mut cnot = Vec::with_capacity(8);
    for check in [CheckType::X, CheckType::Z] {
        for order in 1..=4 {
            let mut rows = Vec::with_capacity(15);
            for (data, ancilla) in pauli_pairs() {
                let f = FaultLocation::Cnot {
                    check,
                    order,
                    data,
                    ancilla,
                };
                rows.push((data, ancilla, propagate_pauli(circuit, &f)?));
            }
            cnot.push(CnotTable { check, order, rows });
        }
    }
    let mut single = Vec::new();
    for (step, role, gate) in circuit.single_qubit_locations() {
        for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
            let effect = propagate_pauli(circuit, &FaultLocation::Single { step, role, pauli })?;
            single.push(SingleQubitRow {
                step,
                role,
                gate,
                pauli,
                effect,
            });
        }
    }
    Ok(LocationTables { cnot, single })
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

impl LocationTables {
    pub const CNOT_HEADER: &'static str = "location\tpaulis\ti_Z\tj_Z\tt_Z\ti_X\tj_X\tt_X";
    pub const SINGLE_HEADER: &'static str = "step\trole\tgate\tpauli\ti_Z\tj_Z\tt_Z\ti_X\tj_X\tt_X";

    /// The two-qubit tables as TSV, one row per (location, Pauli pair).
    pub fn cnot_tsv(&self) -> String {
        let mut out = String::from(Self::CNOT_HEADER);
        out.push('\n');
        for t in &self.cnot {
            for (d, a, e) in &t.rows {
                out.push_str(&format!("{}\t{}{}", t.label(), d.as_char(), a.as_char()));
                for b in e.0 {
                    out.push('\t');
                    out.push(bit(b));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn single_tsv(&self) -> String {
        let mut out = String::from(Self::SINGLE_HEADER);
        out.push('\n');
        for r in &self.single {
            out.push_str(&format!("{}\t{}\t{}\t{}", r.step, r.role.name(), r.gate, r.pauli.as_char()));
            for b in r.effect.0 {
                out.push('\t');
                out.push(bit(b));
            }
            out.push('\n');
        }
        out
    }

    /// Parse two-qubit tables written by [`LocationTables::cnot_tsv`].
    pub fn parse_cnot_tsv(text: &str) -> Result<Vec<CnotTable>> {
        let mut tables: BTreeMap<(CheckType, usize), Vec<(Pauli, Pauli, SyndromeEffect)>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: `{line}`", n + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 8 {
                return Err(bad());
            }
            let loc = cols[0].strip_prefix("CNOT").ok_or_else(bad)?;
            let (order, check) = loc.split_once('^').ok_or_else(bad)?;
            let order: usize = order.parse().map_err(|_| bad())?;
            let check = match check {
                "X" => CheckType::X,
                "Z" => CheckType::Z,
                _ => return Err(bad()),
            };
            let mut ps = cols[1].chars().map(Pauli::from_char);
            let (Some(Some(d)), Some(Some(a)), None) = (ps.next(), ps.next(), ps.next()) else {
                return Err(bad());
            };
            let mut e = [false; 6];
            for k in 0..6 {
                e[k] = match cols[2 + k] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                };
            }
            tables.entry((check, order)).or_default().push((d, a, SyndromeEffect(e)));
        }
        Ok(tables
            .into_iter()
            .map(|((check, order), rows)| CnotTable { check, order, rows })
            .collect())
    }

    fn check_complete(&self) -> Result<()> {
        if self.cnot.len() != 8 {
            return Err(Error::IncompleteTables(format!("{} CNOT tables, expected 8", self.cnot.len())));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.cnot {
            if !seen.insert((t.check, t.order)) {
                return Err(Error::IncompleteTables(format!("{} appears twice", t.label())));
            }
            let pairs: std::collections::HashSet<_> = t.rows.iter().map(|r| (r.0, r.1)).collect();
            if t.rows.len() != 15 || pairs.len() != 15 || pairs.contains(&(Pauli::I, Pauli::I)) {
                return Err(Error::IncompleteTables(format!(
                    "{} does not list the 15 non-identity Pauli pairs",
                    t.label()
                )));
            }
        }
        if self.single.is_empty() {
            return Err(Error::IncompleteTables("no single-qubit locations".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionTarget {
    Rpgm,
    Rcpgm,
}

impl std::str::FromStr for ReductionTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rpgm" => Ok(ReductionTarget::Rpgm),
            "rcpgm" => Ok(ReductionTarget::Rcpgm),
            other => Err(Error::Domain(format!("unknown reduction target `{other}`"))),
        }
    }
}

/// First-order rates as exact multiples of the circuit error rate p.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateCoefficients {
    pub px_h: Rational64,
    pub px_v: Rational64,
    pub py_h: Rational64,
    pub py_v: Rational64,
    pub pz_h: Rational64,
    pub pz_v: Rational64,
    pub q: Rational64,
}

impl RateCoefficients {
    fn zero() -> Self {
        let z = Rational64::from_integer(0);
        RateCoefficients {
            px_h: z,
            px_v: z,
            py_h: z,
            py_v: z,
            pz_h: z,
            pz_v: z,
            q: z,
        }
    }

    pub fn at(&self, p: f64) -> NoiseRates {
        let f = |r: Rational64| *r.numer() as f64 * p / *r.denom() as f64;
        NoiseRates {
            px_h: f(self.px_h),
            px_v: f(self.px_v),
            py_h: f(self.py_h),
            py_v: f(self.py_v),
            pz_h: f(self.pz_h),
            pz_v: f(self.pz_v),
            q: f(self.q),
        }
    }

    /// Fold Y into both marginals: X or Y, and Z or Y.
    pub fn marginalize(&self) -> RateCoefficients {
        RateCoefficients {
            px_h: self.px_h + self.py_h,
            px_v: self.px_v + self.py_v,
            py_h: Rational64::from_integer(0),
            py_v: Rational64::from_integer(0),
            pz_h: self.pz_h + self.py_h,
            pz_v: self.pz_v + self.py_v,
            q: self.q,
        }
    }
}

/// Attribute every fault's probability (p/3 per single-qubit Pauli, p/15 per
/// two-qubit pair) to each target mechanism overlapping its edges.
///
/// Edge ownership: an X error on the horizontal qubit trips `i_Z`, on the
/// vertical one `j_Z`; a Z error on the horizontal qubit trips `j_X`, on the
/// vertical one `i_X`. For the coupled target a fault tripping both edges
/// of one qubit (`i_Z` with `j_X`, or `j_Z` with `i_X`) counts once as a Y
/// error on that qubit.
pub fn reduce_coefficients(tables: &LocationTables, target: ReductionTarget) -> Result<RateCoefficients> {
    tables.check_complete()?;
    let one_q = Rational64::new(1, 3);
    let two_q = Rational64::new(1, 15);
    let mut c = RateCoefficients::zero();
    let mut q_x = Rational64::from_integer(0);
    let mut add = |e: &SyndromeEffect, w: Rational64, c: &mut RateCoefficients| {
        let mut b = e.0;
        if target == ReductionTarget::Rcpgm {
            if b[0] && b[4] {
                c.py_h += w;
                b[0] = false;
                b[4] = false;
            }
            if b[1] && b[3] {
                c.py_v += w;
                b[1] = false;
                b[3] = false;
            }
        }
        if b[0] {
            c.px_h += w;
        }
        if b[1] {
            c.px_v += w;
        }
        if b[2] {
            c.q += w;
        }
        if b[3] {
            c.pz_v += w;
        }
        if b[4] {
            c.pz_h += w;
        }
        if b[5] {
            q_x += w;
        }
    };
    for row in &tables.single {
        add(&row.effect, one_q, &mut c);
    }
    for t in &tables.cnot {
        for (_, _, e) in &t.rows {
            add(e, two_q, &mut c);
        }
    }
    if q_x != c.q {
        return Err(Error::Domain(format!(
            "time-like rates differ between sectors ({} vs {})",
            c.q, q_x
        )));
    }
    Ok(c)
}

pub fn reduce_to_rates(tables: &LocationTables, target: ReductionTarget, p: f64) -> Result<NoiseRates> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("circuit error rate must lie in [0, 1), got {p}")));
    }
    let rates = reduce_coefficients(tables, target)?.at(p);
    rates.validate()?;
    Ok(rates)
}

/// Marginal rates: X-or-Y and Z-or-Y per orientation, Y dropped.
pub fn marginalize_rates(rates: &NoiseRates) -> NoiseRates {
    NoiseRates {
        px_h: rates.px_h + rates.py_h,
        px_v: rates.px_v + rates.py_v,
        py_h: 0.0,
        py_v: 0.0,
        pz_h: rates.pz_h + rates.py_h,
        pz_v: rates.pz_v + rates.py_v,
        q: rates.q,
    }
}
