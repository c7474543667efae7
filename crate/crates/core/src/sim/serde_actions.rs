//! Serde adapters that store action sequences as compact code strings
//! (`"RRJN.."`) instead of arrays of names.

use serde::{Deserialize, Deserializer, Serializer};

use super::world::{decode_actions, encode_actions, Action};

pub fn serialize<S: Serializer>(actions: &[Action], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&encode_actions(actions))
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Action>, D::Error> {
    let text = String::deserialize(deserializer)?;
    decode_actions(&text).map_err(serde::de::Error::custom)
}

pub mod many {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::super::world::{decode_actions, encode_actions, Action};

    pub fn serialize<S: Serializer>(seqs: &[Vec<Action>], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(seqs.len()))?;
        for actions in seqs {
            seq.serialize_element(&encode_actions(actions))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Vec<Action>>, D::Error> {
        let texts = Vec::<String>::deserialize(deserializer)?;
        texts.iter().map(|t| decode_actions(t).map_err(serde::de::Error::custom)).collect()
    }
}
