//! Registry data file: the editable table of bases and license rules.
//!
//! Format (one record per line, full-line `#` comments, blank lines
//! ignored):
//!
//! ```text
//! version 1
//! id | rule | citation [-- notes]
//! ```
//!
//! Rules: `basis:test1|test2|test3` defines a legal basis anchored to an
//! inclusion test; `include(<basis-id>)` admits a license citing that
//! basis; `include-if-attribution` admits a license only when attribution
//! is attested satisfiable; `exclude(<restriction>)` always excludes.
//!
//! A registry is valid only if every basis kind is defined and every
//! `include` rule references a defined basis, so decisions can always
//! carry a full citation.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::{BasisKind, GateError, InclusionTest, LegalBasis};

/// A downstream-use restriction that excludes a license.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Restriction {
    ShareAlike,
    NonCommercial,
    NoDerivatives,
}

impl Restriction {
    pub(super) fn parse(s: &str) -> Option<Restriction> {
        Some(match s {
            "share_alike" => Restriction::ShareAlike,
            "non_commercial" => Restriction::NonCommercial,
            "no_derivatives" => Restriction::NoDerivatives,
            _ => return None,
        })
    }

    /// The clause quoted in exclusion reasons.
    pub fn why_excluded(self) -> &'static str {
        match self {
            Restriction::ShareAlike => {
                "share-alike (copyleft) obligations would propagate to anything trained on it"
            }
            Restriction::NonCommercial => {
                "non-commercial restriction conflicts with downstream use"
            }
            Restriction::NoDerivatives => {
                "no-derivatives restriction forbids derivative training artifacts"
            }
        }
    }
}

/// How a license row decides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LicenseRule {
    Include(BasisKind),
    IncludeIfAttribution,
    Exclude(Restriction),
}

#[derive(Debug)]
struct BasisRow {
    citation: String,
    notes: String,
    test: InclusionTest,
}

/// Parsed registry: legal bases plus license rules, versioned.
#[derive(Debug)]
pub struct LicenseRegistry {
    version: u32,
    bases: BTreeMap<BasisKind, BasisRow>,
    licenses: BTreeMap<String, LicenseRule>,
}

const BUILTIN_TEXT: &str = include_str!("../../data/license_registry.txt");

impl LicenseRegistry {
    /// The registry shipped with the crate.
    pub fn builtin() -> &'static LicenseRegistry {
        static BUILTIN: OnceLock<LicenseRegistry> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            LicenseRegistry::parse(BUILTIN_TEXT).expect("built-in registry must parse")
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Registered license ids, sorted.
    pub fn license_ids(&self) -> impl Iterator<Item = &str> {
        self.licenses.keys().map(String::as_str)
    }

    pub(super) fn rule(&self, id: &str) -> Option<&LicenseRule> {
        self.licenses.get(id)
    }

    pub(super) fn basis(&self, kind: BasisKind) -> LegalBasis {
        let row = self
            .bases
            .get(&kind)
            .expect("parse() guarantees every basis kind is defined");
        LegalBasis {
            kind,
            citation: row.citation.clone(),
            notes: row.notes.clone(),
        }
    }

    pub(super) fn basis_test(&self, kind: BasisKind) -> Option<InclusionTest> {
        self.bases.get(&kind).map(|row| row.test)
    }

    /// Parses registry text, reporting the first offending line.
    pub fn parse(text: &str) -> Result<LicenseRegistry, GateError> {
        let invalid = |line: usize, detail: String| GateError::RegistryInvalid { line, detail };

        let mut version: Option<u32> = None;
        let mut bases: BTreeMap<BasisKind, BasisRow> = BTreeMap::new();
        let mut licenses: BTreeMap<String, LicenseRule> = BTreeMap::new();
        let mut pending_basis_refs: Vec<(usize, String, BasisKind)> = Vec::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if version.is_none() {
                let v = line
                    .strip_prefix("version")
                    .map(str::trim)
                    .and_then(|v| v.parse::<u32>().ok())
                    .ok_or_else(|| {
                        invalid(line_no, format!("expected `version <n>`, got {line:?}"))
                    })?;
                version = Some(v);
                continue;
            }

            let columns: Vec<&str> = line.split('|').map(str::trim).collect();
            let [id, rule, citation] = columns[..] else {
                return Err(invalid(
                    line_no,
                    format!("expected `id | rule | citation`, got {} column(s)", columns.len()),
                ));
            };
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(invalid(line_no, format!("bad id {id:?}")));
            }
            let (citation, notes) = match citation.split_once(" -- ") {
                Some((c, n)) => (c.trim().to_string(), n.trim().to_string()),
                None => (citation.to_string(), String::new()),
            };
            if citation.is_empty() {
                return Err(invalid(line_no, "citation must not be empty".into()));
            }

            if let Some(test) = rule.strip_prefix("basis:") {
                let test = match test {
                    "test1" => InclusionTest::Test1,
                    "test2" => InclusionTest::Test2,
                    "test3" => InclusionTest::Test3,
                    other => {
                        return Err(invalid(line_no, format!("unknown test {other:?}")))
                    }
                };
                let kind = BasisKind::from_id(id).ok_or_else(|| {
                    invalid(line_no, format!("{id:?} is not a recognized basis id"))
                })?;
                if bases
                    .insert(
                        kind,
                        BasisRow {
                            citation,
                            notes,
                            test,
                        },
                    )
                    .is_some()
                {
                    return Err(invalid(line_no, format!("duplicate basis {id:?}")));
                }
                continue;
            }

            let parsed_rule = if rule == "include-if-attribution" {
                LicenseRule::IncludeIfAttribution
            } else if let Some(arg) = parenthesized(rule, "include") {
                let kind = BasisKind::from_id(arg).ok_or_else(|| {
                    invalid(line_no, format!("include() references unknown basis {arg:?}"))
                })?;
                pending_basis_refs.push((line_no, id.to_string(), kind));
                LicenseRule::Include(kind)
            } else if let Some(arg) = parenthesized(rule, "exclude") {
                let restriction = Restriction::parse(arg).ok_or_else(|| {
                    invalid(line_no, format!("unknown restriction {arg:?}"))
                })?;
                LicenseRule::Exclude(restriction)
            } else {
                return Err(invalid(line_no, format!("unknown rule {rule:?}")));
            };

            if licenses.insert(id.to_string(), parsed_rule).is_some() {
                return Err(invalid(line_no, format!("duplicate license {id:?}")));
            }
        }

        let version =
            version.ok_or_else(|| invalid(0, "registry must start with `version <n>`".into()))?;
        for kind in [
            BasisKind::Usc17_105,
            BasisKind::GovernmentEdict,
            BasisKind::TermExpired,
            BasisKind::StatutoryPublicDomain,
            BasisKind::FdlpProgram,
            BasisKind::Cc0Dedication,
            BasisKind::PermissiveLicense,
            BasisKind::SecuritiesDisclosure,
        ] {
            if !bases.contains_key(&kind) {
                return Err(invalid(0, format!("basis {:?} is not defined", kind.id())));
            }
        }
        for (line_no, id, kind) in pending_basis_refs {
            if !bases.contains_key(&kind) {
                return Err(invalid(
                    line_no,
                    format!("license {id:?} references undefined basis {:?}", kind.id()),
                ));
            }
        }

        Ok(LicenseRegistry {
            version,
            bases,
            licenses,
        })
    }
}

fn parenthesized<'a>(rule: &'a str, name: &str) -> Option<&'a str> {
    rule.strip_prefix(name)?
        .strip_prefix('(')?
        .strip_suffix(')')
}

#[cfg(test)]
mod tests {
    use super::super::LicenseTag;
    use super::*;

    #[test]
    fn builtin_registry_parses_with_full_basis_coverage() {
        let reg = LicenseRegistry::builtin();
        assert_eq!(reg.version(), 1);
        assert_eq!(reg.license_ids().count(), 10);
        let basis = reg.basis(BasisKind::GovernmentEdict);
        assert!(basis.citation.contains("Public.Resource.Org"));
        assert!(!basis.notes.is_empty());
    }

    const MINIMAL_BASES: &str = "
usc17_105 | basis:test1 | c1
government_edict | basis:test1 | c2
term_expired | basis:test2 | c3
statutory_public_domain | basis:test2 | c4
fdlp_program | basis:test2 | c5
cc0_dedication | basis:test2 | c6
permissive_license | basis:test3 | c7
securities_disclosure | basis:test3 | c8
";

    #[test]
    fn custom_rows_extend_coverage_without_code_changes() {
        let text = format!(
            "version 7\n{MINIMAL_BASES}\nMy-Gov-License-1.0 | include(permissive_license) | Example Gazette Licence"
        );
        let reg = LicenseRegistry::parse(&text).unwrap();
        assert_eq!(reg.version(), 7);
        let d = reg
            .evaluate_license(&LicenseTag::new("My-Gov-License-1.0", false))
            .unwrap();
        assert!(d.is_include());
        assert_eq!(
            d.basis.unwrap().citation,
            "c7",
            "decision cites the registry's basis row"
        );
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = LicenseRegistry::parse("not-a-version").unwrap_err();
        assert!(matches!(err, GateError::RegistryInvalid { line: 1, .. }));

        let text = format!("version 1\n{MINIMAL_BASES}\nX-1.0 | frobnicate | c");
        match LicenseRegistry::parse(&text).unwrap_err() {
            GateError::RegistryInvalid { line, detail } => {
                assert_eq!(line, 12);
                assert!(detail.contains("frobnicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_structural_problems() {
        // Missing a basis definition.
        let err = LicenseRegistry::parse("version 1\nusc17_105 | basis:test1 | c").unwrap_err();
        assert!(matches!(err, GateError::RegistryInvalid { .. }));

        // Duplicate license id.
        let text = format!(
            "version 1\n{MINIMAL_BASES}\nA-1.0 | include(permissive_license) | c\nA-1.0 | exclude(share_alike) | c"
        );
        assert!(LicenseRegistry::parse(&text).is_err());

        // Wrong column count.
        let text = format!("version 1\n{MINIMAL_BASES}\nA-1.0 | include(permissive_license)");
        assert!(LicenseRegistry::parse(&text).is_err());

        // Unknown restriction.
        let text = format!("version 1\n{MINIMAL_BASES}\nA-1.0 | exclude(no_fun) | c");
        assert!(LicenseRegistry::parse(&text).is_err());

        // include() of an unknown basis id.
        let text = format!("version 1\n{MINIMAL_BASES}\nA-1.0 | include(not_a_basis) | c");
        assert!(LicenseRegistry::parse(&text).is_err());
    }
}
