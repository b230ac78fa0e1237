use sha2::{Digest, Sha256};

use crate::wcs::ElementClass;

/// Van der Waals radii (Å) per element class. The `X` slot is the fallback
/// for every element outside the eleven named classes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiiTable {
    radii: [f64; ElementClass::COUNT],
}

impl RadiiTable {
    /// Bondi (1964) radii, X fallback 2.0 Å.
    pub fn bondi() -> Self {
        let mut radii = [0.0; ElementClass::COUNT];
        for (class, r) in [
            (ElementClass::C, 1.70),
            (ElementClass::H, 1.20),
            (ElementClass::O, 1.52),
            (ElementClass::N, 1.55),
            (ElementClass::P, 1.80),
            (ElementClass::Cl, 1.75),
            (ElementClass::F, 1.47),
            (ElementClass::Br, 1.85),
            (ElementClass::S, 1.80),
            (ElementClass::Si, 2.10),
            (ElementClass::I, 1.98),
            (ElementClass::X, 2.00),
        ] {
            radii[class as usize] = r;
        }
        RadiiTable { radii }
    }

    pub fn radius(&self, class: ElementClass) -> f64 {
        self.radii[class as usize]
    }

    pub fn fallback(&self) -> f64 {
        self.radius(ElementClass::X)
    }

    /// Replaces one radius. Non-positive or non-finite values are refused.
    pub fn set(&mut self, class: ElementClass, radius: f64) -> Result<(), String> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(format!("radius for {class} must be positive, got {radius}"));
        }
        self.radii[class as usize] = radius;
        Ok(())
    }

    /// Short stable digest of the table contents.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for r in self.radii {
            h.update(r.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

impl Default for RadiiTable {
    fn default() -> Self {
        Self::bondi()
    }
}

pub fn vdw_radius(element: &str, table: &RadiiTable) -> f64 {
    table.radius(ElementClass::from_element(element))
}
