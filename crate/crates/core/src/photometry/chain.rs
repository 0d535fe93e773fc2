use serde::{Deserialize, Serialize};

use super::PhotometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossKind {
    /// `loss` at each of `surfaces` surfaces.
    PerSurface {
        loss: f64,
        surfaces: u32,
    },
    Bulk {
        loss: f64,
    },
    Reflectivity {
        reflectivity: f64,
    },
    Filter {
        transmission: f64,
    },
}

impl LossKind {
    pub fn transmission(&self) -> f64 {
        match *self {
            LossKind::PerSurface { loss, surfaces } => (1.0 - loss).powi(surfaces as i32),
            LossKind::Bulk { loss } => 1.0 - loss,
            LossKind::Reflectivity { reflectivity } => reflectivity,
            LossKind::Filter { transmission } => transmission,
        }
    }

    fn fraction(&self) -> f64 {
        match *self {
            LossKind::PerSurface { loss, .. } | LossKind::Bulk { loss } => loss,
            LossKind::Reflectivity { reflectivity } => reflectivity,
            LossKind::Filter { transmission } => transmission,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainElement {
    pub label: String,
    pub kind: LossKind,
}

impl ChainElement {
    pub fn new(label: impl Into<String>, kind: LossKind) -> Self {
        Self {
            label: label.into(),
            kind,
        }
    }
}

/// Ordered optical elements between source and detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputChain {
    elements: Vec<ChainElement>,
}

impl ThroughputChain {
    pub fn new(elements: Vec<ChainElement>) -> Result<Self, PhotometryError> {
        for e in &elements {
            let f = e.kind.fraction();
            if !(0.0..=1.0).contains(&f) {
                return Err(PhotometryError::InvalidModel(format!(
                    "element '{}': fraction {f} outside [0, 1]",
                    e.label
                )));
            }
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[ChainElement] {
        &self.elements
    }

    /// `η_t`, the product of all element transmissions.
    pub fn throughput(&self) -> f64 {
        self.elements.iter().map(|e| e.kind.transmission()).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    #[test]
    fn empty_chain_transmits_everything() {
        assert_eq!(ThroughputChain::new(vec![]).unwrap().throughput(), 1.0);
    }

    #[test]
    fn detection_chain_values() {
        // 0.994¹⁰ · 0.99² · 0.469
        let oracle = 0.994f64.powi(10) * 0.99f64.powi(2) * 0.469;
        let eta = presets::detection_chain().throughput();
        assert!((eta - oracle).abs() < 1e-12);
        assert!((eta - 0.4328).abs() < 5e-5);
        let with = presets::mirror_path_chain(true).throughput();
        assert!((with - oracle * 0.91 * 0.911).abs() < 1e-12);
        assert!((with - 0.359).abs() < 5e-4);
    }

    #[test]
    fn out_of_range_fraction_rejected() {
        let bad = ChainElement::new("x", LossKind::Bulk { loss: 1.2 });
        assert!(ThroughputChain::new(vec![bad]).is_err());
    }

    fn element() -> impl Strategy<Value = ChainElement> {
        prop_oneof![
            (0.0..1.0f64, 0u32..12).prop_map(|(loss, surfaces)| LossKind::PerSurface { loss, surfaces }),
            (0.0..1.0f64).prop_map(|loss| LossKind::Bulk { loss }),
            (0.0..1.0f64).prop_map(|reflectivity| LossKind::Reflectivity { reflectivity }),
            (0.0..1.0f64).prop_map(|transmission| LossKind::Filter { transmission }),
        ]
        .prop_map(|k| ChainElement::new("e", k))
    }

    proptest! {
        #[test]
        fn order_does_not_matter(mut elements in prop::collection::vec(element(), 0..8)) {
            let a = ThroughputChain::new(elements.clone()).unwrap().throughput();
            elements.reverse();
            let b = ThroughputChain::new(elements).unwrap().throughput();
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }
}
