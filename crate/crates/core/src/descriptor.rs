//! Flat key-value text documents: the serialization format for family and
//! instance descriptors, plans and configs. Line-oriented, diff-able, no
//! binary payloads. Floats are written in Rust's shortest round-trip form,
//! so a parse of a render restores bit-identical values.

use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::classes::ClassSpec;
use crate::construction::{
    Baseline, BumpProfile, ClassTag, GridPartition, PerturbedFamily, ProfileKind, ThetaVector,
};
use crate::error::{Error, Result};

/// An ordered key-value document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        KvDoc::default()
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse(format!("missing key {key:?}")))
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .parse()
            .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.get(key)?
            .parse()
            .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines are
    /// skipped, duplicate keys keep the first occurrence visible via `get`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse(format!("line {}: expected `key = value`", i + 1)));
            };
            doc.set(k.trim(), v.trim());
        }
        Ok(doc)
    }

    /// Group repeated keys (used by multi-valued fields).
    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries.iter().filter(|(k, _)| k == key).map(|(_, v)| v.as_str()).collect()
    }
}

// ---------------------------------------------------------------------------
// Class spec
// ---------------------------------------------------------------------------

pub fn class_to_kv(spec: &ClassSpec, doc: &mut KvDoc) {
    match spec {
        ClassSpec::Hoelder { alpha, gamma } => {
            doc.set("class", "holder");
            doc.set("alpha", alpha);
            doc.set("gamma", gamma);
        }
        ClassSpec::Barron { capital_c, gamma } => {
            doc.set("class", "barron");
            doc.set("barron_c", capital_c);
            doc.set("gamma", gamma);
        }
        ClassSpec::ConvexLipschitz { gamma } => {
            doc.set("class", "convex");
            doc.set("gamma", gamma);
        }
    }
}

pub fn class_from_kv(doc: &KvDoc) -> Result<ClassSpec> {
    let gamma = doc.get_f64("gamma")?;
    match doc.get("class")? {
        "holder" => Ok(ClassSpec::Hoelder { alpha: doc.get_f64("alpha")?, gamma }),
        "barron" => Ok(ClassSpec::Barron { capital_c: doc.get_f64("barron_c")?, gamma }),
        "convex" => Ok(ClassSpec::ConvexLipschitz { gamma }),
        other => Err(Error::Parse(format!("unknown class {other:?}"))),
    }
}

// ---------------------------------------------------------------------------
// Family and instance descriptors
// ---------------------------------------------------------------------------

/// Serialize a family, optionally with a hypercube vertex attached (which
/// turns the document into an instance descriptor).
pub fn family_to_kv(family: &PerturbedFamily, theta: Option<&ThetaVector>) -> KvDoc {
    let mut doc = KvDoc::new();
    doc.set("kind", if theta.is_some() { "instance" } else { "family" });
    doc.set("class", family.class().tag());
    doc.set("d", family.dimension());
    doc.set("subdivisions", family.partition().subdivisions());
    doc.set("gamma", family.gamma());
    doc.set("gamma_tilde", family.gamma_tilde());
    doc.set("alpha", family.alpha());
    doc.set("amplitude", family.amplitude());
    if let Some(exact) = family.amplitude_exact() {
        doc.set("amplitude_exact", format!("{}/{}", exact.numer(), exact.denom()));
    }
    doc.set("baseline", family.baseline().tag());
    doc.set("profile", family.profile().kind().tag());
    if let Some(t) = theta {
        doc.set("theta", t.to_string_bits());
    }
    doc
}

pub fn family_from_kv(doc: &KvDoc) -> Result<(PerturbedFamily, Option<ThetaVector>)> {
    let class = ClassTag::from_tag(doc.get("class")?)?;
    let d = doc.get_usize("d")?;
    let subdivisions = doc.get_usize("subdivisions")?;
    let alpha = doc.get_f64("alpha")?;
    let gamma = doc.get_f64("gamma")?;
    let amplitude = doc.get_f64("amplitude")?;
    let amplitude_exact = match doc.get_opt("amplitude_exact") {
        Some(s) => {
            let (n, de) = s
                .split_once('/')
                .ok_or_else(|| Error::Parse("amplitude_exact: expected num/den".into()))?;
            let n: i128 = n.parse().map_err(|e| Error::Parse(format!("amplitude_exact: {e}")))?;
            let de: i128 = de.parse().map_err(|e| Error::Parse(format!("amplitude_exact: {e}")))?;
            Some(Ratio::new(n, de))
        }
        None => None,
    };
    let baseline = Baseline::from_tag(doc.get("baseline")?)?;
    let profile = match ProfileKind::from_tag(doc.get("profile")?)? {
        ProfileKind::SupNormBump => BumpProfile::sup_norm_bump(d - 1, alpha)?,
        ProfileKind::PlateauProduct => BumpProfile::plateau_product(d - 1)?,
        ProfileKind::QuadraticCap => BumpProfile::quadratic_cap(d - 1)?,
    };
    let partition = GridPartition::build(d, subdivisions)?;
    let family = PerturbedFamily::new(
        partition,
        profile,
        baseline,
        amplitude,
        amplitude_exact,
        alpha,
        gamma,
        class,
    )?;
    let theta = match doc.get_opt("theta") {
        Some(bits) => {
            let t = ThetaVector::parse(bits)?;
            if t.len() != family.partition().cell_count() {
                return Err(Error::Parse(format!(
                    "theta has {} bits, family has {} cells",
                    t.len(),
                    family.partition().cell_count()
                )));
            }
            Some(t)
        }
        None => None,
    };
    Ok((family, theta))
}

/// Render a plan: the derived scalars followed by the family block.
pub fn plan_to_kv(plan: &crate::classes::Plan) -> KvDoc {
    let mut doc = KvDoc::new();
    doc.set("kind", "plan");
    class_to_kv(&plan.params.class, &mut doc);
    doc.set("d", plan.params.d);
    doc.set("n", plan.params.n);
    doc.set("subdivisions", plan.params.subdivisions);
    doc.set("subdivisions_target", plan.params.subdivisions_target);
    doc.set("cell_count", plan.params.cell_count);
    doc.set("amplitude", plan.params.amplitude);
    if let Some(exact) = plan.params.amplitude_exact {
        doc.set("amplitude_exact", format!("{}/{}", exact.numer(), exact.denom()));
    }
    doc.set("half_level_radius", plan.params.half_level_radius);
    doc.set("c_phi", plan.params.c_phi);
    doc.set("k_phi", plan.params.k_phi);
    doc.set("gamma_tilde", plan.params.gamma_tilde);
    doc.set("hellinger_budget", plan.params.hellinger_budget);
    if let Some(exact) = plan.params.hellinger_budget_exact {
        doc.set("hellinger_budget_exact", format!("{}/{}", exact.numer(), exact.denom()));
    }
    doc.set("theoretical_lower_bound", plan.params.theoretical_lower_bound);
    doc.set("rate_exponent", plan.params.rate_exponent);
    if let Some(c_d) = plan.params.schwartz_constant {
        doc.set("schwartz_constant", c_d);
    }
    if let Some(ct) = plan.params.c_tilde {
        doc.set("c_tilde", ct);
    }
    for (k, v) in family_to_kv(&plan.family, None).entries() {
        if doc.get_opt(k).is_none() {
            doc.set(k, v);
        }
    }
    doc
}

/// Stable map view for provenance embedding.
pub fn to_sorted_map(doc: &KvDoc) -> BTreeMap<String, String> {
    doc.entries().iter().cloned().collect()
}
