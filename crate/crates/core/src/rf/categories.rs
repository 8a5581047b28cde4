//! The fourteen categorical startup features and their ordinal encoding.
//!
//! Codes follow the printed order of each enumeration; `Mismatch` takes the
//! code one past the last member.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::llm::structured::{FieldSpec, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    IndustryGrowth,
    MarketSize,
    DevelopmentPace,
    MarketAdaptability,
    ExecutionCapabilities,
    FundingAmount,
    ValuationChange,
    InvestorBacking,
    ReviewsTestimonials,
    ProductMarketFit,
    SentimentAnalysis,
    InnovationMentions,
    CuttingEdgeTechnology,
    Timing,
}

pub const N_CATEGORIES: usize = 14;
pub const MISMATCH: &str = "Mismatch";

impl Category {
    pub const ALL: [Category; N_CATEGORIES] = [
        Category::IndustryGrowth,
        Category::MarketSize,
        Category::DevelopmentPace,
        Category::MarketAdaptability,
        Category::ExecutionCapabilities,
        Category::FundingAmount,
        Category::ValuationChange,
        Category::InvestorBacking,
        Category::ReviewsTestimonials,
        Category::ProductMarketFit,
        Category::SentimentAnalysis,
        Category::InnovationMentions,
        Category::CuttingEdgeTechnology,
        Category::Timing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::IndustryGrowth => "industry_growth",
            Category::MarketSize => "market_size",
            Category::DevelopmentPace => "development_pace",
            Category::MarketAdaptability => "market_adaptability",
            Category::ExecutionCapabilities => "execution_capabilities",
            Category::FundingAmount => "funding_amount",
            Category::ValuationChange => "valuation_change",
            Category::InvestorBacking => "investor_backing",
            Category::ReviewsTestimonials => "reviews_testimonials",
            Category::ProductMarketFit => "product_market_fit",
            Category::SentimentAnalysis => "sentiment_analysis",
            Category::InnovationMentions => "innovation_mentions",
            Category::CuttingEdgeTechnology => "cutting_edge_technology",
            Category::Timing => "timing",
        }
    }

    /// Members in encoding order (without `Mismatch`).
    pub fn values(self) -> &'static [&'static str] {
        match self {
            Category::IndustryGrowth => &["No", "N/A", "Yes"],
            Category::MarketSize => &["Small", "Medium", "Large", "N/A"],
            Category::DevelopmentPace => &["Slower", "Same", "Faster", "N/A"],
            Category::MarketAdaptability => &[
                "Not Adaptable",
                "Somewhat Adaptable",
                "Very Adaptable",
                "N/A",
            ],
            Category::ExecutionCapabilities => &["Poor", "Average", "Excellent", "N/A"],
            Category::FundingAmount => &["Below Average", "Average", "Above Average", "N/A"],
            Category::ValuationChange => &["Decreased", "Remained Stable", "Increased", "N/A"],
            Category::InvestorBacking => &["Unknown", "Recognized", "Highly Regarded", "N/A"],
            Category::ReviewsTestimonials => &["Negative", "Mixed", "Positive", "N/A"],
            Category::ProductMarketFit => &["Weak", "Moderate", "Strong", "N/A"],
            Category::SentimentAnalysis => &["Negative", "Neutral", "Positive", "N/A"],
            Category::InnovationMentions => &["Rarely", "Sometimes", "Often", "N/A"],
            Category::CuttingEdgeTechnology => &["No", "Mentioned", "Emphasized", "N/A"],
            Category::Timing => &["Too Early", "Just Right", "Too Late", "N/A"],
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Code assigned to `Mismatch`.
    pub fn mismatch_code(self) -> u8 {
        self.values().len() as u8
    }

    /// Parse a raw answer; anything outside the enumeration becomes `Mismatch`.
    pub fn parse_lenient(self, raw: &str) -> CategoryValue {
        let t = raw.trim();
        self.values()
            .iter()
            .position(|v| *v == t)
            .map(|i| CategoryValue::Known(i as u8))
            .unwrap_or(CategoryValue::Mismatch)
    }

    pub fn label(self, value: CategoryValue) -> &'static str {
        match value {
            CategoryValue::Known(i) => self.values()[usize::from(i)],
            CategoryValue::Mismatch => MISMATCH,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CategoryValue {
    /// Index into [`Category::values`].
    Known(u8),
    Mismatch,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("code {code} out of range for {category}")]
    CodeOutOfRange { category: Category, code: u8 },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("`{value}` is not a member of {category}")]
    NotAMember { category: Category, value: String },
}

/// One value per category, indexed in [`Category::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CategoricalFeatures([CategoryValue; N_CATEGORIES]);

impl Default for CategoricalFeatures {
    fn default() -> Self {
        Self::all_mismatch()
    }
}

impl CategoricalFeatures {
    pub fn all_mismatch() -> Self {
        Self([CategoryValue::Mismatch; N_CATEGORIES])
    }

    pub fn get(&self, c: Category) -> CategoryValue {
        self.0[c as usize]
    }

    pub fn label(&self, c: Category) -> &'static str {
        c.label(self.get(c))
    }

    pub fn set(&mut self, c: Category, v: CategoryValue) {
        self.0[c as usize] = v;
    }

    /// Set by label; non-members become `Mismatch`.
    pub fn set_label(&mut self, c: Category, raw: &str) {
        self.set(c, c.parse_lenient(raw));
    }

    pub fn mismatch_count(&self) -> usize {
        self.0
            .iter()
            .filter(|v| **v == CategoryValue::Mismatch)
            .count()
    }

    /// Strict construction from label map; unknown keys and non-members error.
    /// `Mismatch` is accepted as a label. Missing keys become `Mismatch`.
    pub fn from_labels<'a>(
        labels: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, EncodingError> {
        let mut f = Self::all_mismatch();
        for (k, v) in labels {
            let c = Category::from_name(k)
                .ok_or_else(|| EncodingError::UnknownCategory(k.to_string()))?;
            let value = match c.parse_lenient(v) {
                CategoryValue::Mismatch if v.trim() != MISMATCH => {
                    return Err(EncodingError::NotAMember {
                        category: c,
                        value: v.to_string(),
                    })
                }
                val => val,
            };
            f.set(c, value);
        }
        Ok(f)
    }

    pub fn to_labels(&self) -> BTreeMap<&'static str, &'static str> {
        Category::ALL
            .iter()
            .map(|c| (c.name(), self.label(*c)))
            .collect()
    }

    pub fn render_lines(&self) -> String {
        Category::ALL
            .iter()
            .map(|c| format!("{}: {}", c.name(), self.label(*c)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Serialize for CategoricalFeatures {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(N_CATEGORIES))?;
        for c in Category::ALL {
            m.serialize_entry(c.name(), self.label(c))?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for CategoricalFeatures {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        Self::from_labels(raw.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .map_err(serde::de::Error::custom)
    }
}

/// Ordinal codes, one per category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedVector(pub [u8; N_CATEGORIES]);

impl EncodedVector {
    pub fn as_reals<T: crate::scalar::Real>(&self) -> Vec<T> {
        self.0
            .iter()
            .map(|&c| T::from_usize_lossy(usize::from(c)))
            .collect()
    }
}

pub fn encode(features: &CategoricalFeatures) -> EncodedVector {
    let mut out = [0u8; N_CATEGORIES];
    for (slot, c) in out.iter_mut().zip(Category::ALL) {
        *slot = match features.get(c) {
            CategoryValue::Known(i) => i,
            CategoryValue::Mismatch => c.mismatch_code(),
        };
    }
    EncodedVector(out)
}

pub fn decode(codes: &EncodedVector) -> Result<CategoricalFeatures, EncodingError> {
    let mut f = CategoricalFeatures::all_mismatch();
    for (&code, c) in codes.0.iter().zip(Category::ALL) {
        let v = match code.cmp(&c.mismatch_code()) {
            std::cmp::Ordering::Less => CategoryValue::Known(code),
            std::cmp::Ordering::Equal => CategoryValue::Mismatch,
            std::cmp::Ordering::Greater => {
                return Err(EncodingError::CodeOutOfRange { category: c, code })
            }
        };
        f.set(c, v);
    }
    Ok(f)
}

/// Structured-output schema for the fourteen categories.
pub fn category_schema() -> Schema {
    Category::ALL
        .iter()
        .map(|c| FieldSpec::enumeration(c.name(), c.values()))
        .collect()
}
