//! Hard-negative verification.
//!
//! A verifier decides whether the chosen answer has become a hallucination
//! for the fully masked image. Verdicts are opaque here; the neural check
//! itself runs out of process and reaches us through verdict files.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::formats::{read_verdicts_file, AdapterHeader, VerdictLine};
use super::ListgenError;
use crate::types::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The chosen answer no longer fits the image: the negative is usable.
    Hallucinating,
    /// The answer still fits; mask another object.
    StillValid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationVerdict {
    pub verdict: Verdict,
    pub rationale: Option<String>,
}

impl VerificationVerdict {
    pub fn new(verdict: Verdict) -> Self {
        Self {
            verdict,
            rationale: None,
        }
    }
}

/// What a verifier is asked about.
#[derive(Debug, Clone, Copy)]
pub struct VerifyRequest<'a> {
    pub sample_id: &'a str,
    /// 0 for the first masking, incremented on every retry.
    pub retry: u32,
    pub hard_negative: &'a Image,
    pub question: &'a str,
    pub chosen: &'a str,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("verifier unavailable for `{sample_id}` retry {retry}: {reason}")]
pub struct VerifierUnavailable {
    pub sample_id: String,
    pub retry: u32,
    pub reason: String,
}

pub trait Verifier: Send + Sync {
    fn verify(&self, request: &VerifyRequest<'_>) -> Result<VerificationVerdict, VerifierUnavailable>;

    /// `false` forces the pipeline to call this verifier from one thread.
    fn concurrent(&self) -> bool {
        true
    }

    fn name(&self) -> &str;
}

/// Asks `verifier` about the fully masked list entry.
pub fn verify_negative(
    verifier: &dyn Verifier,
    request: &VerifyRequest<'_>,
) -> Result<VerificationVerdict, VerifierUnavailable> {
    verifier.verify(request)
}

/// Declares every negative hallucinating.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysHallucinating;

impl Verifier for AlwaysHallucinating {
    fn verify(&self, _: &VerifyRequest<'_>) -> Result<VerificationVerdict, VerifierUnavailable> {
        Ok(VerificationVerdict::new(Verdict::Hallucinating))
    }

    fn name(&self) -> &str {
        "stub"
    }
}

/// Precomputed verdicts keyed by `(sample id, retry)`.
#[derive(Debug, Clone, Default)]
pub struct FixtureVerifier {
    verdicts: HashMap<(String, u32), VerificationVerdict>,
}

impl FixtureVerifier {
    pub fn from_lines(lines: impl IntoIterator<Item = VerdictLine>) -> Self {
        let mut verdicts = HashMap::new();
        for l in lines {
            verdicts.entry((l.id, l.retry)).or_insert(VerificationVerdict {
                verdict: l.verdict,
                rationale: l.rationale,
            });
        }
        Self { verdicts }
    }

    pub fn from_path(path: &Path) -> Result<Self, ListgenError> {
        Ok(Self::from_lines(read_verdicts_file(path)?.entries))
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }
}

impl Verifier for FixtureVerifier {
    fn verify(&self, request: &VerifyRequest<'_>) -> Result<VerificationVerdict, VerifierUnavailable> {
        self.verdicts
            .get(&(request.sample_id.to_string(), request.retry))
            .cloned()
            .ok_or_else(|| VerifierUnavailable {
                sample_id: request.sample_id.to_string(),
                retry: request.retry,
                reason: "no precomputed verdict".into(),
            })
    }

    fn name(&self) -> &str {
        "fixture"
    }
}

/// Verdicts emitted by the model adapter, which stamps its model id in a header line.
#[derive(Debug, Clone)]
pub struct AdapterVerifier {
    header: AdapterHeader,
    inner: FixtureVerifier,
}

impl AdapterVerifier {
    pub fn from_path(path: &Path) -> Result<Self, ListgenError> {
        let parsed = read_verdicts_file(path)?;
        let header = parsed
            .header
            .ok_or_else(|| ListgenError::format(path, 1, "missing `#lpoi-adapter` header line"))?;
        Ok(Self {
            header,
            inner: FixtureVerifier::from_lines(parsed.entries),
        })
    }

    pub fn header(&self) -> &AdapterHeader {
        &self.header
    }
}

impl Verifier for AdapterVerifier {
    fn verify(&self, request: &VerifyRequest<'_>) -> Result<VerificationVerdict, VerifierUnavailable> {
        self.inner.verify(request)
    }

    fn name(&self) -> &str {
        &self.header.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn req<'a>(id: &'a str, retry: u32, img: &'a Image) -> VerifyRequest<'a> {
        VerifyRequest {
            sample_id: id,
            retry,
            hard_negative: img,
            question: "q",
            chosen: "w",
        }
    }

    fn line(id: &str, retry: u32, verdict: Verdict) -> VerdictLine {
        VerdictLine {
            id: id.into(),
            retry,
            verdict,
            rationale: None,
            warning: None,
        }
    }

    #[test]
    fn fixture_passthrough() {
        let img = Image::filled(2, 2, [0, 0, 0]);
        let f = FixtureVerifier::from_lines([line("a", 0, Verdict::Hallucinating), line("b", 0, Verdict::StillValid)]);
        assert_eq!(
            verify_negative(&f, &req("a", 0, &img)).unwrap().verdict,
            Verdict::Hallucinating
        );
        assert_eq!(
            verify_negative(&f, &req("b", 0, &img)).unwrap().verdict,
            Verdict::StillValid
        );
        let miss = verify_negative(&f, &req("a", 1, &img)).unwrap_err();
        assert_eq!(miss.retry, 1);
    }

    #[test]
    fn stub_always_hallucinates() {
        let img = Image::filled(2, 2, [9, 9, 9]);
        for retry in 0..4 {
            assert_eq!(
                AlwaysHallucinating.verify(&req("x", retry, &img)).unwrap().verdict,
                Verdict::Hallucinating
            );
        }
    }

    #[test]
    fn adapter_requires_header() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("with.jsonl");
        let mut f = std::fs::File::create(&with).unwrap();
        writeln!(f, "#lpoi-adapter model=idefics2-8b threshold=0.3").unwrap();
        writeln!(f, r#"{{"id":"a","retry":0,"verdict":"still-valid"}}"#).unwrap();
        drop(f);
        let v = AdapterVerifier::from_path(&with).unwrap();
        assert_eq!(v.name(), "idefics2-8b");
        let img = Image::filled(2, 2, [0, 0, 0]);
        assert_eq!(v.verify(&req("a", 0, &img)).unwrap().verdict, Verdict::StillValid);

        let without = dir.path().join("without.jsonl");
        std::fs::write(&without, "{\"id\":\"a\",\"retry\":0,\"verdict\":\"still-valid\"}\n").unwrap();
        assert!(AdapterVerifier::from_path(&without).is_err());
    }
}
