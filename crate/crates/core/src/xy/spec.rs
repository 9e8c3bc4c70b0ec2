use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fermionic boundary condition of the quadratic Hamiltonian.
///
/// `Periodic` and `Antiperiodic` are the two Jordan-Wigner parity sectors of a
/// closed spin ring; `Open` is a chain without the wrap-around bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    #[default]
    Antiperiodic,
    Open,
}

impl Boundary {
    pub fn is_closed(self) -> bool {
        !matches!(self, Boundary::Open)
    }
}

/// Transverse field: one value for every site or an explicit profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Field {
    Uniform(f64),
    PerSite(Vec<f64>),
}

/// Parameters a quantum Fisher information can be taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Uniform shift of the transverse field.
    Field,
    /// Coupling on bonds that cross a cell boundary.
    InterCoupling,
    /// Coupling on bonds inside a cell.
    IntraCoupling,
    Anisotropy,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Field => "h",
            Parameter::InterCoupling => "J",
            Parameter::IntraCoupling => "J0",
            Parameter::Anisotropy => "gamma",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "h" | "field" => Some(Parameter::Field),
            "J" | "inter_coupling" => Some(Parameter::InterCoupling),
            "J0" | "intra_coupling" => Some(Parameter::IntraCoupling),
            "gamma" | "anisotropy" => Some(Parameter::Anisotropy),
            _ => None,
        }
    }
}

/// Modular anisotropic XY chain in a transverse field.
///
/// `n_cells` cells of `cell_size` sites; bonds inside a cell carry
/// `intra_coupling`, the bond leaving the last site of each cell carries
/// `inter_coupling`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XYChainSpec {
    pub n_sites: usize,
    pub cell_size: usize,
    pub n_cells: usize,
    pub intra_coupling: f64,
    pub inter_coupling: f64,
    pub anisotropy: f64,
    pub field: Field,
    pub boundary: Boundary,
}

impl XYChainSpec {
    /// Chain of `n_sites` split into cells of `cell_size`; the remaining
    /// parameters default to a uniform isotropic chain at zero field.
    pub fn new(n_sites: usize, cell_size: usize) -> Result<Self> {
        if cell_size == 0 || n_sites == 0 {
            return Err(Error::validation("n_sites and cell_size must be positive"));
        }
        if !n_sites.is_multiple_of(cell_size) {
            return Err(Error::validation(format!(
                "n_sites = {n_sites} is not a multiple of cell_size = {cell_size}"
            )));
        }
        let spec = XYChainSpec {
            n_sites,
            cell_size,
            n_cells: n_sites / cell_size,
            intra_coupling: 1.0,
            inter_coupling: 1.0,
            anisotropy: 1.0,
            field: Field::Uniform(0.0),
            boundary: Boundary::default(),
        };
        Ok(spec)
    }

    /// Uniform chain (`J = J₀ = 1`, one-site cells).
    pub fn uniform(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, 1)
    }

    pub fn with_inter_coupling(mut self, j: f64) -> Self {
        self.inter_coupling = j;
        self
    }

    pub fn with_intra_coupling(mut self, j0: f64) -> Self {
        self.intra_coupling = j0;
        self
    }

    pub fn with_anisotropy(mut self, gamma: f64) -> Self {
        self.anisotropy = gamma;
        self
    }

    pub fn with_field(mut self, h: f64) -> Self {
        self.field = Field::Uniform(h);
        self
    }

    pub fn with_field_profile(mut self, h: Vec<f64>) -> Self {
        self.field = Field::PerSite(h);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Same couplings with a different number of cells.
    pub fn resized(&self, n_cells: usize) -> Result<Self> {
        let mut out = Self::new(n_cells * self.cell_size, self.cell_size)?;
        out.intra_coupling = self.intra_coupling;
        out.inter_coupling = self.inter_coupling;
        out.anisotropy = self.anisotropy;
        out.boundary = self.boundary;
        out.field = match &self.field {
            Field::Uniform(h) => Field::Uniform(*h),
            Field::PerSite(_) => {
                return Err(Error::validation("cannot resize a chain with a per-site field"))
            }
        };
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 || self.n_cells == 0 {
            return Err(Error::validation("cell_size and n_cells must be positive"));
        }
        if self.n_sites != self.n_cells * self.cell_size {
            return Err(Error::validation(format!(
                "n_sites = {} but n_cells * cell_size = {}",
                self.n_sites,
                self.n_cells * self.cell_size
            )));
        }
        if self.boundary.is_closed() && self.n_sites < 3 {
            return Err(Error::validation("closed chains need at least 3 sites"));
        }
        if let Field::PerSite(h) = &self.field {
            if h.len() != self.n_sites {
                return Err(Error::validation(format!(
                    "field profile has {} entries for {} sites",
                    h.len(),
                    self.n_sites
                )));
            }
        }
        let finite = [self.intra_coupling, self.inter_coupling, self.anisotropy]
            .iter()
            .chain(self.fields().iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::validation("non-finite coupling or field"));
        }
        Ok(())
    }

    /// Field on every site.
    pub fn fields(&self) -> Vec<f64> {
        match &self.field {
            Field::Uniform(h) => vec![*h; self.n_sites],
            Field::PerSite(h) => h.clone(),
        }
    }

    /// Uniform field value, or the mean of a profile.
    pub fn mean_field(&self) -> f64 {
        match &self.field {
            Field::Uniform(h) => *h,
            Field::PerSite(h) => h.iter().sum::<f64>() / h.len().max(1) as f64,
        }
    }

    /// True when the field repeats with the cell period.
    pub fn field_is_cell_periodic(&self) -> bool {
        match &self.field {
            Field::Uniform(_) => true,
            Field::PerSite(h) => h
                .iter()
                .enumerate()
                .all(|(i, x)| *x == h[i % self.cell_size]),
        }
    }

    pub fn parameter(&self, p: Parameter) -> f64 {
        match p {
            Parameter::Field => self.mean_field(),
            Parameter::InterCoupling => self.inter_coupling,
            Parameter::IntraCoupling => self.intra_coupling,
            Parameter::Anisotropy => self.anisotropy,
        }
    }

    /// Copy with one parameter set to `value`. For a field profile the whole
    /// profile is shifted so that its mean becomes `value`.
    pub fn with_parameter(&self, p: Parameter, value: f64) -> Self {
        let mut out = self.clone();
        match p {
            Parameter::Field => {
                out.field = match &self.field {
                    Field::Uniform(_) => Field::Uniform(value),
                    Field::PerSite(h) => {
                        let shift = value - self.mean_field();
                        Field::PerSite(h.iter().map(|x| x + shift).collect())
                    }
                }
            }
            Parameter::InterCoupling => out.inter_coupling = value,
            Parameter::IntraCoupling => out.intra_coupling = value,
            Parameter::Anisotropy => out.anisotropy = value,
        }
        out
    }

    /// Coupling on the bond from site `j` to site `j + 1` (mod N).
    pub fn bond(&self, j: usize) -> f64 {
        if (j + 1).is_multiple_of(self.cell_size) {
            self.inter_coupling
        } else {
            self.intra_coupling
        }
    }

    /// All bond couplings `J_{j,j+1}`; `N` entries for closed chains, `N − 1`
    /// for open ones.
    pub fn build_couplings(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n_bonds = if self.boundary.is_closed() {
            self.n_sites
        } else {
            self.n_sites - 1
        };
        Ok((0..n_bonds).map(|j| self.bond(j)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_periodic_bonds() {
        let spec = XYChainSpec::new(4, 2)
            .unwrap()
            .with_inter_coupling(0.4)
            .with_boundary(Boundary::Periodic);
        assert_eq!(spec.build_couplings().unwrap(), vec![1.0, 0.4, 1.0, 0.4]);
    }

    #[test]
    fn open_chain_drops_wrap_bond() {
        let spec = XYChainSpec::new(6, 3)
            .unwrap()
            .with_inter_coupling(0.4)
            .with_boundary(Boundary::Open);
        assert_eq!(spec.build_couplings().unwrap(), vec![1.0, 1.0, 0.4, 1.0, 1.0]);
    }

    #[test]
    fn unit_inter_coupling_is_uniform() {
        for r in 1..6 {
            let spec = XYChainSpec::new(6 * r, r).unwrap().with_inter_coupling(1.0);
            assert!(spec.build_couplings().unwrap().iter().all(|&b| b == 1.0));
        }
    }

    #[test]
    fn exactly_l_inter_bonds_on_a_ring() {
        let spec = XYChainSpec::new(12, 3)
            .unwrap()
            .with_inter_coupling(0.25)
            .with_boundary(Boundary::Periodic);
        let bonds = spec.build_couplings().unwrap();
        assert_eq!(bonds.len(), 12);
        assert_eq!(bonds.iter().filter(|&&b| b == 0.25).count(), spec.n_cells);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(matches!(XYChainSpec::new(7, 2), Err(Error::Validation(_))));
        let mut spec = XYChainSpec::new(8, 2).unwrap();
        spec.n_cells = 3;
        assert!(matches!(spec.build_couplings(), Err(Error::Validation(_))));
    }

    #[test]
    fn field_shift_preserves_profile_shape() {
        let spec = XYChainSpec::new(4, 2)
            .unwrap()
            .with_field_profile(vec![0.1, 0.3, 0.1, 0.3]);
        let moved = spec.with_parameter(Parameter::Field, 1.0);
        let h = moved.fields();
        assert!((h[1] - h[0] - 0.2).abs() < 1e-15);
        assert!((moved.mean_field() - 1.0).abs() < 1e-15);
    }
}
