//! Legal gate: three sequential inclusion tests over declared metadata.
//!
//! Nothing enters the corpus without passing one of three tests, evaluated
//! strictly in order:
//!
//! 1. **Origin** — works of the U.S. federal government, or official legal
//!    edicts, carry no copyright.
//! 2. **Public-domain status** — the copyright term has expired, the
//!    rightsholder dedicated the work to the public domain, or the work is
//!    a depository-program publication.
//! 3. **License** — the declared license admits training use under the
//!    decision table in the registry: CC0 always includes; CC-BY includes
//!    only when attribution can be satisfied (an operator judgment, never
//!    inferred); any ShareAlike/NonCommercial/NoDerivatives restriction
//!    excludes; a small set of permissive government licenses includes.
//!
//! Every include carries the legal basis it rests on — kind, citation, and
//! notes — so an audit can show *why* each document is in the corpus.
//! Unknown licenses fail closed: excluded, and surfaced as an error so a
//! human extends the registry rather than the engine guessing.
//!
//! The registry itself is a versioned data file (`id | rule | citation`),
//! editable without code changes; [`LicenseRegistry::builtin`] ships a
//! default seeded with the bases and licenses above.

mod registry;

pub use registry::{LicenseRegistry, LicenseRule, Restriction};

use serde::Serialize;
use thiserror::Error;

use crate::key::{KeyPrefix, Stage};
use crate::store::{self, ObjectStore, StoreError};

#[derive(Debug, Error)]
pub enum GateError {
    #[error("unknown license {0:?}: extend the registry before including this source")]
    UnknownLicense(String),
    #[error("registry line {line}: {detail}")]
    RegistryInvalid { line: usize, detail: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// The eight recognized legal grounds for inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Usc17_105,
    GovernmentEdict,
    TermExpired,
    StatutoryPublicDomain,
    FdlpProgram,
    Cc0Dedication,
    PermissiveLicense,
    SecuritiesDisclosure,
}

impl BasisKind {
    pub fn id(self) -> &'static str {
        match self {
            BasisKind::Usc17_105 => "usc17_105",
            BasisKind::GovernmentEdict => "government_edict",
            BasisKind::TermExpired => "term_expired",
            BasisKind::StatutoryPublicDomain => "statutory_public_domain",
            BasisKind::FdlpProgram => "fdlp_program",
            BasisKind::Cc0Dedication => "cc0_dedication",
            BasisKind::PermissiveLicense => "permissive_license",
            BasisKind::SecuritiesDisclosure => "securities_disclosure",
        }
    }

    pub fn from_id(id: &str) -> Option<BasisKind> {
        [
            BasisKind::Usc17_105,
            BasisKind::GovernmentEdict,
            BasisKind::TermExpired,
            BasisKind::StatutoryPublicDomain,
            BasisKind::FdlpProgram,
            BasisKind::Cc0Dedication,
            BasisKind::PermissiveLicense,
            BasisKind::SecuritiesDisclosure,
        ]
        .into_iter()
        .find(|k| k.id() == id)
    }
}

/// A legal basis with its citation, as recorded in the registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LegalBasis {
    pub kind: BasisKind,
    pub citation: String,
    pub notes: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionTest {
    Test1,
    Test2,
    Test3,
}

impl std::fmt::Display for InclusionTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InclusionTest::Test1 => "test1",
            InclusionTest::Test2 => "test2",
            InclusionTest::Test3 => "test3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Include,
    Exclude,
}

/// The outcome of gating one source: verdict, which test passed (if any),
/// the legal basis an include rests on, and a human-readable reason.
///
/// Constructed only through [`GateDecision::include`] and
/// [`GateDecision::exclude`], so `verdict=include ⇔ passed_test present ∧
/// basis present` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateDecision {
    pub verdict: Verdict,
    pub passed_test: Option<InclusionTest>,
    pub basis: Option<LegalBasis>,
    pub reason: String,
}

impl GateDecision {
    fn include(test: InclusionTest, basis: LegalBasis, reason: String) -> Self {
        GateDecision {
            verdict: Verdict::Include,
            passed_test: Some(test),
            basis: Some(basis),
            reason,
        }
    }

    fn exclude(reason: String) -> Self {
        GateDecision {
            verdict: Verdict::Exclude,
            passed_test: None,
            basis: None,
            reason,
        }
    }

    pub fn is_include(&self) -> bool {
        self.verdict == Verdict::Include
    }
}

/// A declared license tag plus the operator's attribution judgment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicenseTag {
    /// SPDX-like identifier, e.g. `CC0-1.0`, `CC-BY-NC-4.0`, `OGL-UK-3.0`.
    pub id: String,
    /// Whether attribution requirements can reasonably be satisfied for
    /// this source. Supplied by a human, applied (never inferred) here.
    pub attribution_satisfiable: bool,
}

impl LicenseTag {
    pub fn new(id: impl Into<String>, attribution_satisfiable: bool) -> Self {
        LicenseTag {
            id: id.into(),
            attribution_satisfiable,
        }
    }
}

/// Where a work comes from, as far as test 1 is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    UsFederalWork,
    GovernmentEdict,
    #[default]
    Private,
}

/// Declared metadata about a source. Unknown values must be stated as
/// `Private`/false/None — the gate never guesses in the permissive
/// direction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceMeta {
    pub origin: Origin,
    pub copyright_expired: bool,
    pub public_domain_dedication: bool,
    pub fdlp_member: bool,
    pub license: Option<LicenseTag>,
}

impl LicenseRegistry {
    /// Runs the three tests in order and returns the first passing one.
    pub fn evaluate(&self, meta: &SourceMeta) -> Result<GateDecision, GateError> {
        // Test 1: origin.
        let test1_basis = match meta.origin {
            Origin::UsFederalWork => Some((BasisKind::Usc17_105, "work of the United States Government")),
            Origin::GovernmentEdict => Some((BasisKind::GovernmentEdict, "official government edict")),
            Origin::Private => None,
        };
        if let Some((kind, label)) = test1_basis {
            return Ok(GateDecision::include(
                InclusionTest::Test1,
                self.basis(kind),
                format!("passes test 1: {label}"),
            ));
        }

        // Test 2: public-domain status.
        let test2_basis = if meta.copyright_expired {
            Some((BasisKind::TermExpired, "copyright term has expired"))
        } else if meta.public_domain_dedication {
            Some((BasisKind::Cc0Dedication, "public-domain dedication by the rightsholder"))
        } else if meta.fdlp_member {
            Some((BasisKind::FdlpProgram, "depository-program publication"))
        } else {
            None
        };
        if let Some((kind, label)) = test2_basis {
            return Ok(GateDecision::include(
                InclusionTest::Test2,
                self.basis(kind),
                format!("passes test 2: {label}"),
            ));
        }

        // Test 3: declared license.
        match &meta.license {
            Some(tag) => self.evaluate_license(tag),
            None => Ok(GateDecision::exclude(
                "fails all three tests: no qualifying origin, no public-domain status, \
                 and no license declared"
                    .into(),
            )),
        }
    }

    /// Applies the license decision table (test 3 in isolation).
    pub fn evaluate_license(&self, tag: &LicenseTag) -> Result<GateDecision, GateError> {
        if let Some(rule) = self.rule(&tag.id) {
            return Ok(self.apply_rule(&tag.id, rule.clone(), tag.attribution_satisfiable));
        }
        // Not an exact registry row; combined CC suffixes still parse.
        match parse_cc(&tag.id) {
            Some(CcShape::Zero) => Ok(self.apply_rule(
                &tag.id,
                LicenseRule::Include(BasisKind::Cc0Dedication),
                tag.attribution_satisfiable,
            )),
            Some(CcShape::By(restrictions)) if restrictions.is_empty() => Ok(self.apply_rule(
                &tag.id,
                LicenseRule::IncludeIfAttribution,
                tag.attribution_satisfiable,
            )),
            Some(CcShape::By(restrictions)) => {
                Ok(GateDecision::exclude(exclusion_reason(&tag.id, &restrictions)))
            }
            None => Err(GateError::UnknownLicense(tag.id.clone())),
        }
    }

    /// Evaluates a stored license tag string: basis ids pass the test they
    /// anchor, anything else goes through the license table.
    pub fn evaluate_tag(
        &self,
        tag: &str,
        attribution_satisfiable: bool,
    ) -> Result<GateDecision, GateError> {
        if let Some(kind) = BasisKind::from_id(tag) {
            if let Some(test) = self.basis_test(kind) {
                return Ok(GateDecision::include(
                    test,
                    self.basis(kind),
                    format!("{tag}: recorded legal basis anchors {test}"),
                ));
            }
        }
        self.evaluate_license(&LicenseTag::new(tag, attribution_satisfiable))
    }

    fn apply_rule(&self, id: &str, rule: LicenseRule, attribution_satisfiable: bool) -> GateDecision {
        match rule {
            LicenseRule::Include(kind) => GateDecision::include(
                InclusionTest::Test3,
                self.basis(kind),
                format!("passes test 3: license {id} admits training use"),
            ),
            LicenseRule::IncludeIfAttribution => {
                if attribution_satisfiable {
                    GateDecision::include(
                        InclusionTest::Test3,
                        self.basis(BasisKind::PermissiveLicense),
                        format!(
                            "passes test 3: license {id} with attribution requirement \
                             attested satisfiable"
                        ),
                    )
                } else {
                    GateDecision::exclude(format!(
                        "fails test 3: license {id} requires attribution that has not \
                         been attested satisfiable"
                    ))
                }
            }
            LicenseRule::Exclude(restriction) => {
                // Name every restriction the tag carries, not just the one
                // the registry row happens to record.
                let restrictions = match parse_cc(id) {
                    Some(CcShape::By(r)) if !r.is_empty() => r,
                    _ => vec![restriction],
                };
                GateDecision::exclude(exclusion_reason(id, &restrictions))
            }
        }
    }
}

fn exclusion_reason(id: &str, restrictions: &[Restriction]) -> String {
    let clauses: Vec<&str> = restrictions.iter().map(|r| r.why_excluded()).collect();
    format!("fails test 3: license {id}: {}", clauses.join("; "))
}

/// Structural shape of a Creative Commons identifier.
#[derive(Debug, PartialEq, Eq)]
enum CcShape {
    Zero,
    By(Vec<Restriction>),
}

/// Parses `CC0-<ver>` and `CC-BY[-NC][-ND][-SA]-<ver>` (suffixes in any
/// order, each at most once, version required). Returns None for anything
/// that is not CC-shaped — including malformed CC-like strings, which then
/// fail closed as unknown licenses.
fn parse_cc(id: &str) -> Option<CcShape> {
    let upper = id.to_ascii_uppercase();
    if let Some(rest) = upper.strip_prefix("CC0-") {
        return is_version(rest).then_some(CcShape::Zero);
    }
    let rest = upper.strip_prefix("CC-BY")?;
    let mut parts = rest.split('-').peekable();
    match parts.peek() {
        Some(&"") => {
            parts.next();
        }
        _ => return None, // "CC-BYX..." or bare "CC-BY"
    }
    let mut restrictions: Vec<Restriction> = Vec::new();
    let mut version_seen = false;
    for part in parts {
        if version_seen {
            return None;
        }
        let restriction = match part {
            "SA" => Some(Restriction::ShareAlike),
            "NC" => Some(Restriction::NonCommercial),
            "ND" => Some(Restriction::NoDerivatives),
            v if is_version(v) => {
                version_seen = true;
                None
            }
            _ => return None,
        };
        if let Some(r) = restriction {
            if restrictions.contains(&r) {
                return None; // duplicate suffix
            }
            restrictions.push(r);
        }
    }
    if !version_seen {
        return None;
    }
    restrictions.sort();
    Some(CcShape::By(restrictions))
}

fn is_version(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|part| {
            !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit())
        })
}

/// One audited document.
#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub key: String,
    pub license: String,
    pub decision: GateDecision,
}

/// Per-document decisions plus aggregate counts for one dataset.
#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub dataset_id: String,
    pub include_count: u64,
    pub exclude_count: u64,
    /// License ids the registry does not know; these count as exclusions.
    pub unknown_licenses: Vec<String>,
    pub decisions: Vec<AuditEntry>,
}

impl AuditReport {
    /// Exclusions only, each with its reason.
    pub fn exclusions(&self) -> impl Iterator<Item = &AuditEntry> {
        self.decisions
            .iter()
            .filter(|e| !e.decision.is_include())
    }
}

impl LicenseRegistry {
    /// Evaluates the stored license tag of every stage-1 document in a
    /// dataset. Unknown licenses are reported as exclusions and listed
    /// separately; they never abort the audit.
    pub fn audit_corpus(
        &self,
        store: &dyn ObjectStore,
        dataset_id: &str,
        attribution_satisfiable: bool,
    ) -> Result<AuditReport, GateError> {
        let prefix = KeyPrefix::dataset(Stage::Documents, dataset_id)
            .map_err(StoreError::from)?;
        let mut report = AuditReport {
            dataset_id: dataset_id.to_string(),
            include_count: 0,
            exclude_count: 0,
            unknown_licenses: Vec::new(),
            decisions: Vec::new(),
        };
        for key in store.list(&prefix)? {
            let key = key?;
            let env = store::read_envelope(store, &key)?;
            let decision = match self.evaluate_tag(env.license(), attribution_satisfiable) {
                Ok(d) => d,
                Err(GateError::UnknownLicense(id)) => {
                    if !report.unknown_licenses.contains(&id) {
                        report.unknown_licenses.push(id.clone());
                    }
                    GateDecision::exclude(format!(
                        "fails test 3: license {id} is not in the registry (failing closed)"
                    ))
                }
                Err(e) => return Err(e),
            };
            if decision.is_include() {
                report.include_count += 1;
            } else {
                report.exclude_count += 1;
            }
            report.decisions.push(AuditEntry {
                key: key.render(),
                license: env.license().to_string(),
                decision,
            });
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::envelope::DocumentEnvelope;
    use crate::store::MemoryStore;

    fn registry() -> &'static LicenseRegistry {
        LicenseRegistry::builtin()
    }

    fn private_with(license: Option<LicenseTag>) -> SourceMeta {
        SourceMeta {
            license,
            ..SourceMeta::default()
        }
    }

    #[test]
    fn test1_federal_work_includes_without_license() {
        let meta = SourceMeta {
            origin: Origin::UsFederalWork,
            ..SourceMeta::default()
        };
        let d = registry().evaluate(&meta).unwrap();
        assert!(d.is_include());
        assert_eq!(d.passed_test, Some(InclusionTest::Test1));
        assert_eq!(d.basis.as_ref().unwrap().kind, BasisKind::Usc17_105);
        assert!(d.basis.unwrap().citation.contains("17 U.S.C."));
    }

    #[test]
    fn test1_is_independent_of_license_fields() {
        // Metamorphic: whatever the license says, test 1 already decided.
        let tags = [
            None,
            Some(LicenseTag::new("CC-BY-NC-ND-4.0", false)),
            Some(LicenseTag::new("utterly-unknown-1.0", true)),
        ];
        let mut decisions = Vec::new();
        for origin in [Origin::UsFederalWork, Origin::GovernmentEdict] {
            for tag in &tags {
                let meta = SourceMeta {
                    origin,
                    copyright_expired: true,
                    public_domain_dedication: true,
                    fdlp_member: true,
                    license: tag.clone(),
                };
                decisions.push(registry().evaluate(&meta).unwrap());
            }
        }
        for window in decisions.chunks(tags.len()) {
            assert!(window.iter().all(|d| d == &window[0]));
        }
    }

    #[test]
    fn test2_prefers_expiry_then_dedication_then_fdlp() {
        let mut meta = SourceMeta {
            public_domain_dedication: true,
            ..SourceMeta::default()
        };
        let d = registry().evaluate(&meta).unwrap();
        assert_eq!(d.passed_test, Some(InclusionTest::Test2));
        assert_eq!(d.basis.unwrap().kind, BasisKind::Cc0Dedication);

        meta.copyright_expired = true;
        let d = registry().evaluate(&meta).unwrap();
        assert_eq!(d.basis.unwrap().kind, BasisKind::TermExpired);

        let fdlp = SourceMeta {
            fdlp_member: true,
            ..SourceMeta::default()
        };
        let d = registry().evaluate(&fdlp).unwrap();
        assert_eq!(d.basis.unwrap().kind, BasisKind::FdlpProgram);
    }

    #[test]
    fn cc_decision_table_row_for_row() {
        // (id, attribution_satisfiable) → expected include?
        let rows = [
            ("CC0-1.0", false, true),
            ("CC-BY-4.0", true, true),
            ("CC-BY-4.0", false, false),
            ("CC-BY-SA-4.0", true, false),
            ("CC-BY-NC-4.0", true, false),
            ("CC-BY-ND-4.0", true, false),
            ("CC-BY-NC-SA-4.0", true, false),
            ("CC-BY-NC-ND-4.0", true, false),
        ];
        for (id, attribution, expect_include) in rows {
            let d = registry()
                .evaluate_license(&LicenseTag::new(id, attribution))
                .unwrap();
            assert_eq!(
                d.is_include(),
                expect_include,
                "{id} attribution={attribution}: {}",
                d.reason
            );
            assert_eq!(d.is_include(), d.passed_test.is_some());
            assert_eq!(d.is_include(), d.basis.is_some());
        }
    }

    #[test]
    fn share_alike_exclusion_cites_share_alike() {
        let d = registry()
            .evaluate(&private_with(Some(LicenseTag::new("CC-BY-SA-4.0", true))))
            .unwrap();
        assert!(!d.is_include());
        assert!(d.reason.contains("share-alike"), "reason: {}", d.reason);
    }

    #[test]
    fn compound_exclusions_name_every_restriction() {
        let d = registry()
            .evaluate_license(&LicenseTag::new("CC-BY-NC-ND-4.0", true))
            .unwrap();
        assert!(d.reason.contains("non-commercial"), "reason: {}", d.reason);
        assert!(d.reason.contains("derivative"), "reason: {}", d.reason);
    }

    #[test]
    fn government_licenses_include() {
        for id in ["EU-2011-833", "OGL-UK-3.0", "US-SEC-EDGAR"] {
            let d = registry()
                .evaluate_license(&LicenseTag::new(id, false))
                .unwrap();
            assert!(d.is_include(), "{id} should include: {}", d.reason);
            assert_eq!(d.passed_test, Some(InclusionTest::Test3));
        }
    }

    #[test]
    fn unknown_license_fails_closed() {
        let err = registry()
            .evaluate(&private_with(Some(LicenseTag::new("MIT", true))))
            .unwrap_err();
        assert!(matches!(err, GateError::UnknownLicense(ref id) if id == "MIT"));
    }

    #[test]
    fn nothing_declared_excludes_with_reason() {
        let d = registry().evaluate(&SourceMeta::default()).unwrap();
        assert!(!d.is_include());
        assert!(d.passed_test.is_none());
        assert!(d.reason.contains("fails all three tests"));
    }

    #[test]
    fn combined_cc_suffixes_parse_in_any_order() {
        // Not registry rows, but structurally valid CC combinations.
        for id in ["CC-BY-ND-NC-4.0", "CC-BY-SA-NC-2.5", "cc-by-nc-3.0"] {
            let d = registry()
                .evaluate_license(&LicenseTag::new(id, true))
                .unwrap();
            assert!(!d.is_include(), "{id}");
        }
        let d = registry()
            .evaluate_license(&LicenseTag::new("CC-BY-3.0", true))
            .unwrap();
        assert!(d.is_include());
        let d = registry()
            .evaluate_license(&LicenseTag::new("CC0-1.0+", false));
        assert!(d.is_err(), "malformed version must fail closed");
    }

    #[test]
    fn malformed_cc_shapes_are_unknown() {
        for id in ["CC-BY", "CC-BY-4.0-NC", "CC-BY-NC-NC-4.0", "CC-BYND-4.0", "CC-BY--4.0"] {
            let r = registry().evaluate_license(&LicenseTag::new(id, true));
            assert!(
                matches!(r, Err(GateError::UnknownLicense(_))),
                "{id} should be unknown, got {r:?}"
            );
        }
    }

    #[test]
    fn restriction_suffixes_never_rescue_a_verdict() {
        // Monotonicity: adding restrictions to an included CC tag always
        // flips it to exclude.
        let base = registry()
            .evaluate_license(&LicenseTag::new("CC-BY-4.0", true))
            .unwrap();
        assert!(base.is_include());
        for suffix in ["SA", "NC", "ND", "NC-SA", "NC-ND", "SA-ND", "NC-ND-SA"] {
            let id = format!("CC-BY-{suffix}-4.0");
            let d = registry()
                .evaluate_license(&LicenseTag::new(&id, true))
                .unwrap();
            assert!(!d.is_include(), "{id} must exclude");
        }
    }

    #[test]
    fn basis_tags_evaluate_through_their_test() {
        let d = registry().evaluate_tag("usc17_105", false).unwrap();
        assert_eq!(d.passed_test, Some(InclusionTest::Test1));
        let d = registry().evaluate_tag("fdlp_program", false).unwrap();
        assert_eq!(d.passed_test, Some(InclusionTest::Test2));
        let d = registry().evaluate_tag("securities_disclosure", false).unwrap();
        assert_eq!(d.passed_test, Some(InclusionTest::Test3));
    }

    fn put_doc(store: &MemoryStore, id: &str, license: &str) {
        let env = DocumentEnvelope::seal(
            b"body",
            "text/plain",
            "local",
            license,
            "audit",
            id,
            BTreeMap::new(),
        )
        .unwrap();
        crate::store::write_envelope(store, &env, false).unwrap();
    }

    #[test]
    fn audit_counts_uniform_corpus() {
        let store = MemoryStore::new();
        for i in 0..10 {
            put_doc(&store, &format!("doc-{i}"), "usc17_105");
        }
        let report = registry().audit_corpus(&store, "audit", false).unwrap();
        assert_eq!(report.include_count, 10);
        assert_eq!(report.exclude_count, 0);
        assert_eq!(report.decisions.len(), 10);
        assert!(report.unknown_licenses.is_empty());
    }

    #[test]
    fn audit_lists_each_exclusion_with_reason() {
        let store = MemoryStore::new();
        for i in 0..4 {
            put_doc(&store, &format!("ok-{i}"), "CC0-1.0");
        }
        for i in 0..3 {
            put_doc(&store, &format!("sa-{i}"), "CC-BY-SA-4.0");
        }
        put_doc(&store, "mystery", "homegrown-license-2.0");
        let report = registry().audit_corpus(&store, "audit", false).unwrap();
        assert_eq!(report.include_count, 4);
        assert_eq!(report.exclude_count, 4);
        let sa_exclusions: Vec<_> = report
            .exclusions()
            .filter(|e| e.license == "CC-BY-SA-4.0")
            .collect();
        assert_eq!(sa_exclusions.len(), 3);
        for e in sa_exclusions {
            assert!(e.decision.reason.contains("share-alike"));
        }
        assert_eq!(report.unknown_licenses, vec!["homegrown-license-2.0"]);
    }

    #[test]
    fn audit_of_empty_dataset_is_empty() {
        let store = MemoryStore::new();
        let report = registry().audit_corpus(&store, "nothing", false).unwrap();
        assert_eq!(report.include_count + report.exclude_count, 0);
    }
}
