use std::fmt;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{AnalysisState, StateDoc, StateError};
use crate::table::Schema;

/// URL-safe base64 (no padding) of the key-sorted minified JSON form of a
/// state. Equal states always encode to identical tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateToken(String);

impl StateToken {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Wraps raw text without checking it; decoding does the checking.
    pub fn from_raw(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn from_doc(doc: &StateDoc) -> Self {
        // serde_json's Value map is a BTreeMap, so keys come out sorted.
        let value = serde_json::to_value(doc).expect("state doc serializes");
        let text = serde_json::to_string(&value).expect("json value serializes");
        Self(URL_SAFE_NO_PAD.encode(text.as_bytes()))
    }

    /// Decodes the document without binding it to a schema.
    pub fn to_doc(&self) -> Result<StateDoc, StateError> {
        let bytes = URL_SAFE_NO_PAD
            .decode(self.0.as_bytes())
            .map_err(|e| StateError::MalformedToken(format!("base64: {e}")))?;
        serde_json::from_slice(&bytes).map_err(|e| StateError::MalformedToken(format!("json: {e}")))
    }
}

impl fmt::Display for StateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn encode_state(state: &AnalysisState) -> StateToken {
    StateToken::from_doc(&state.to_doc())
}

pub fn decode_state(token: &StateToken, schema: &Schema) -> Result<AnalysisState, StateError> {
    AnalysisState::from_doc(&token.to_doc()?, schema)
}
