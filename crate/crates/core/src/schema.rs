//! Attribute schema of an action: which sensed quantities describe an
//! execution, at what resolution they are compared, how far one learning
//! step moves, and which knowledge-base fluents bound them.

use std::fmt;

use crate::pddl::{DomainModel, GroundFluent};

/// 1-based position of an attribute in the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrIndex(usize);

impl AttrIndex {
    pub const fn new(index: usize) -> Option<Self> {
        if index >= 1 {
            Some(AttrIndex(index))
        } else {
            None
        }
    }

    pub const fn get(self) -> usize {
        self.0
    }

    pub(crate) fn slot(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for AttrIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Which side of the permitted range a fluent bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub index: AttrIndex,
    pub name: String,
    pub unit: String,
    /// Resolution used for equality: values are compared by grid bucket.
    pub quantization: f64,
    /// Learning rate: the size of one refinement step.
    pub eta: f64,
    pub upper_fluent: Option<GroundFluent>,
    pub lower_fluent: Option<GroundFluent>,
}

// Tolerance for grid snapping so that e.g. 23.000000000001 is treated as 23.
const GRID_EPS: f64 = 1e-9;

impl Attribute {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        Attribute {
            index: AttrIndex(1),
            name: name.into(),
            unit: unit.into(),
            quantization: 1.0,
            eta: 1.0,
            upper_fluent: None,
            lower_fluent: None,
        }
    }

    pub fn with_quantization(mut self, q: f64) -> Self {
        self.quantization = q;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_bounds(mut self, lower: Option<GroundFluent>, upper: Option<GroundFluent>) -> Self {
        self.lower_fluent = lower;
        self.upper_fluent = upper;
        self
    }

    /// Grid bucket of `v`: nearest multiple of the quantization, halves away from zero.
    pub fn bucket(&self, v: f64) -> i64 {
        (v / self.quantization).round() as i64
    }

    pub fn bucket_value(&self, bucket: i64) -> f64 {
        bucket as f64 * self.quantization
    }

    pub fn snap(&self, v: f64) -> f64 {
        self.bucket_value(self.bucket(v))
    }

    /// Smallest grid value not below `v`.
    pub fn snap_up(&self, v: f64) -> f64 {
        self.bucket_value((v / self.quantization - GRID_EPS).ceil() as i64)
    }

    /// Largest grid value not above `v`.
    pub fn snap_down(&self, v: f64) -> f64 {
        self.bucket_value((v / self.quantization + GRID_EPS).floor() as i64)
    }

    pub fn fluent(&self, side: BoundSide) -> Option<&GroundFluent> {
        match side {
            BoundSide::Upper => self.upper_fluent.as_ref(),
            BoundSide::Lower => self.lower_fluent.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("attribute '{0}': quantization must be positive")]
    Quantization(String),
    #[error("attribute '{0}': learning rate must be positive")]
    Eta(String),
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("duplicate attribute '{0}'")]
    Duplicate(String),
    #[error("attribute '{attribute}': fluent {fluent} is not declared in domain '{domain}'")]
    UnknownFluent { attribute: String, fluent: String, domain: String },
}

/// Ordered attribute list; indices are contiguous from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

impl AttributeSchema {
    /// Builds a schema, renumbering attributes 1..n in the given order.
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, SchemaError> {
        let mut out: Vec<Attribute> = Vec::with_capacity(attributes.len());
        for (i, mut a) in attributes.into_iter().enumerate() {
            if !(a.quantization > 0.0 && a.quantization.is_finite()) {
                return Err(SchemaError::Quantization(a.name));
            }
            if !(a.eta > 0.0 && a.eta.is_finite()) {
                return Err(SchemaError::Eta(a.name));
            }
            if out.iter().any(|o| o.name == a.name) {
                return Err(SchemaError::Duplicate(a.name));
            }
            a.index = AttrIndex(i + 1);
            out.push(a);
        }
        Ok(AttributeSchema { attributes: out })
    }

    /// Checks that every bound fluent names a declared function of matching arity.
    pub fn validate_against(&self, domain: &DomainModel) -> Result<(), SchemaError> {
        for a in &self.attributes {
            for f in a.upper_fluent.iter().chain(&a.lower_fluent) {
                let ok = domain.function(f.name()).is_some_and(|sig| sig.params.len() == f.args().len());
                if !ok {
                    return Err(SchemaError::UnknownFluent {
                        attribute: a.name.clone(),
                        fluent: f.to_string(),
                        domain: domain.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn get(&self, index: AttrIndex) -> Option<&Attribute> {
        self.attributes.get(index.slot())
    }

    pub fn by_name(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter()
    }

    pub fn indices(&self) -> impl Iterator<Item = AttrIndex> + '_ {
        self.attributes.iter().map(|a| a.index)
    }

    /// The attribute and side a KB fluent bounds, if any.
    pub fn bound_by(&self, fluent: &GroundFluent) -> Option<(&Attribute, BoundSide)> {
        self.attributes.iter().find_map(|a| {
            if a.upper_fluent.as_ref() == Some(fluent) {
                Some((a, BoundSide::Upper))
            } else if a.lower_fluent.as_ref() == Some(fluent) {
                Some((a, BoundSide::Lower))
            } else {
                None
            }
        })
    }

    /// Replaces the learning rate of the named attribute.
    pub fn set_eta(&mut self, name: &str, eta: f64) -> Result<(), SchemaError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SchemaError::Eta(name.to_string()));
        }
        let a = self
            .attributes
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| SchemaError::UnknownAttribute(name.to_string()))?;
        a.eta = eta;
        Ok(())
    }
}
