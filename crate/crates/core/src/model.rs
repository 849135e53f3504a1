use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error};

/// The four disordered models. RBIM and R8VM live on a square lattice, the
/// gauge models on a cubic one with the third axis as time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rbim,
    R8vm,
    Rpgm,
    Rcpgm,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Rbim | ModelKind::R8vm => 2,
            ModelKind::Rpgm | ModelKind::Rcpgm => 3,
        }
    }

    pub fn sublattices(self) -> usize {
        match self {
            ModelKind::Rbim | ModelKind::Rpgm => 1,
            ModelKind::R8vm | ModelKind::Rcpgm => 2,
        }
    }

    /// Whether the two sublattices are tied together by Y couplers.
    pub fn is_coupled(self) -> bool {
        self.sublattices() == 2
    }

    pub fn has_syndrome_terms(self) -> bool {
        self.dim() == 3
    }

    pub fn terms(self) -> &'static [TermKind] {
        use TermKind::*;
        match self {
            ModelKind::Rbim => &[XH, XV],
            ModelKind::R8vm => &[XH, XV, YH, YV, ZH, ZV],
            ModelKind::Rpgm => &[XH, XV, QSigma],
            ModelKind::Rcpgm => &[XH, XV, YH, YV, ZH, ZV, QSigma, QTau],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rbim => "rbim",
            ModelKind::R8vm => "r8vm",
            ModelKind::Rpgm => "rpgm",
            ModelKind::Rcpgm => "rcpgm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "rbim" => Ok(ModelKind::Rbim),
            "r8vm" => Ok(ModelKind::R8vm),
            "rpgm" => Ok(ModelKind::Rpgm),
            "rcpgm" => Ok(ModelKind::Rcpgm),
            other => Err(domain(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    H,
    V,
}

/// One family of Hamiltonian terms. `X*`, `Y*`, `Z*` are owned by the
/// horizontal (`H`) or vertical (`V`) data qubit of a unit cell and carry the
/// coupling J(X), J(Y), J(Z) of that qubit; `Q*` are the space-like syndrome
/// plaquettes of each sublattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermKind {
    XH,
    XV,
    YH,
    YV,
    ZH,
    ZV,
    QSigma,
    QTau,
}

impl TermKind {
    pub const ALL: [TermKind; 8] = [
        TermKind::XH,
        TermKind::XV,
        TermKind::YH,
        TermKind::YV,
        TermKind::ZH,
        TermKind::ZV,
        TermKind::QSigma,
        TermKind::QTau,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn orientation(self) -> Option<Orientation> {
        use TermKind::*;
        match self {
            XH | YH | ZH => Some(Orientation::H),
            XV | YV | ZV => Some(Orientation::V),
            QSigma | QTau => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TermKind::XH => "x_h",
            TermKind::XV => "x_v",
            TermKind::YH => "y_h",
            TermKind::YV => "y_v",
            TermKind::ZH => "z_h",
            TermKind::ZV => "z_v",
            TermKind::QSigma => "q_sigma",
            TermKind::QTau => "q_tau",
        }
    }
}
