//! Versioned on-disk formats for systems and certificates.
//!
//! Both file kinds are JSON objects with an explicit `schema_version`
//! field; readers reject any version they do not know rather than guess.
//! Unknown fields are errors everywhere: a typo in a fixture must fail
//! loudly, not silently drop a constraint. Loaded systems additionally
//! have to be validate-clean before they are handed to callers.

use crate::iteration::GeodesicSystem;
use crate::jump::JumpCertificate;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { path: String, found: u32 },
    #[error("{path}: system is invalid: {}", problems.join("; "))]
    Invalid { path: String, problems: Vec<String> },
}

/// A geodesic system under a version gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub system: GeodesicSystem,
}

/// A jump certificate under the same version gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub schema_version: u32,
    pub certificate: JumpCertificate,
}

/// Reads, version-checks, and validates a system file.
pub fn load_system(path: impl AsRef<Path>) -> Result<GeodesicSystem, ModelError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Read {
        path: name.clone(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|source| ModelError::Parse {
        path: name.clone(),
        source,
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(ModelError::Version { path: name, found: file.schema_version });
    }
    let problems = file.system.validate();
    if !problems.is_empty() {
        return Err(ModelError::Invalid { path: name, problems });
    }
    Ok(file.system)
}

pub fn save_system(path: impl AsRef<Path>, system: &GeodesicSystem) -> Result<(), ModelError> {
    let path = path.as_ref();
    let file = ModelFile { schema_version: SCHEMA_VERSION, system: system.clone() };
    let text = serde_json::to_string_pretty(&file).expect("system serialization is total");
    fs::write(path, text + "\n").map_err(|source| ModelError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Reads and version-checks a certificate file. The embedded verification
/// record is data, not proof: callers re-verify against their models.
pub fn load_certificate(path: impl AsRef<Path>) -> Result<JumpCertificate, ModelError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Read {
        path: name.clone(),
        source,
    })?;
    let file: CertificateFile =
        serde_json::from_str(&text).map_err(|source| ModelError::Parse {
            path: name.clone(),
            source,
        })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(ModelError::Version { path: name, found: file.schema_version });
    }
    Ok(file.certificate)
}

pub fn save_certificate(
    path: impl AsRef<Path>,
    certificate: &JumpCertificate,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let file = CertificateFile {
        schema_version: SCHEMA_VERSION,
        certificate: certificate.clone(),
    };
    let text = serde_json::to_string_pretty(&file).expect("certificate serialization is total");
    fs::write(path, text + "\n").map_err(|source| ModelError::Write {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_scalar::ExactScalar;
    use crate::iteration::GeodesicModel;
    use crate::jump::{find_certificates, SearchParams};
    use crate::normal_form::{NormalFormBlock, NormalFormDecomposition};
    use num_rational::BigRational;

    fn sample_system() -> GeodesicSystem {
        let rho: ExactScalar = "-1 + sqrt(2)".parse().unwrap();
        let tau: ExactScalar = "2 - sqrt(2)".parse().unwrap();
        let blocks =
            vec![NormalFormBlock::Rotation { rho }, NormalFormBlock::Rotation { rho: tau }];
        let d = NormalFormDecomposition::from_blocks(2, &blocks).unwrap();
        GeodesicSystem {
            n: 1,
            group_label: "trivial".into(),
            bumpy: true,
            curvature_pinched: false,
            geodesics: vec![GeodesicModel::new("c1", 2, d)],
        }
    }

    #[test]
    fn system_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("system.json");
        let system = sample_system();
        save_system(&path, &system).unwrap();
        let loaded = load_system(&path).unwrap();
        assert_eq!(loaded, system);
    }

    #[test]
    fn wrong_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("system.json");
        let text = serde_json::to_string(&ModelFile {
            schema_version: 999,
            system: sample_system(),
        })
        .unwrap();
        std::fs::write(&path, text).unwrap();
        match load_system(&path).unwrap_err() {
            ModelError::Version { found, .. } => assert_eq!(found, 999),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn unknown_field_names_itself() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("system.json");
        let mut value =
            serde_json::to_value(&ModelFile { schema_version: 1, system: sample_system() })
                .unwrap();
        value["system"]["geodesics"][0]["typo_field"] = 1.into();
        std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        let err = load_system(&path).unwrap_err().to_string();
        assert!(err.contains("typo_field"), "{err}");
    }

    #[test]
    fn invalid_system_lists_problems() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("system.json");
        let mut system = sample_system();
        system.geodesics.push(system.geodesics[0].clone());
        let text = serde_json::to_string(&ModelFile { schema_version: 1, system }).unwrap();
        std::fs::write(&path, text).unwrap();
        let err = load_system(&path).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn certificate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cert.json");
        let system = sample_system();
        let params =
            SearchParams::new(1, 1, BigRational::new(1.into(), 100.into()), 1);
        let cert = find_certificates(&system.geodesics, &params).unwrap().remove(0);
        save_certificate(&path, &cert).unwrap();
        let loaded = load_certificate(&path).unwrap();
        assert_eq!(loaded, cert);
    }

    #[test]
    fn missing_file_is_a_read_error() {
        assert!(matches!(
            load_system("/nonexistent/geodex.json"),
            Err(ModelError::Read { .. })
        ));
    }
}
