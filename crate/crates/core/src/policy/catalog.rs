//! Data-entity taxonomy, sensitive-API catalog and the lexicon file that
//! configures both.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityCategory {
    UserLocation,
    #[serde(rename = "ChooseMedia/File")]
    ChooseMedia,
    Address,
    Invoice,
    UserInfo,
    WeRun,
    PhoneContact,
    PhoneCalendar,
    Camera,
    Record,
    Bluetooth,
    Clipboard,
    PhotoAlbum,
}

/// Coarse API grouping used when reporting per-API results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ApiGroup {
    Location,
    Media,
    OpenAPI,
    Device,
    Album,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 13] = [
        Self::UserLocation,
        Self::ChooseMedia,
        Self::Address,
        Self::Invoice,
        Self::UserInfo,
        Self::WeRun,
        Self::PhoneContact,
        Self::PhoneCalendar,
        Self::Camera,
        Self::Record,
        Self::Bluetooth,
        Self::Clipboard,
        Self::PhotoAlbum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::UserLocation => "UserLocation",
            Self::ChooseMedia => "ChooseMedia/File",
            Self::Address => "Address",
            Self::Invoice => "Invoice",
            Self::UserInfo => "UserInfo",
            Self::WeRun => "WeRun",
            Self::PhoneContact => "PhoneContact",
            Self::PhoneCalendar => "PhoneCalendar",
            Self::Camera => "Camera",
            Self::Record => "Record",
            Self::Bluetooth => "Bluetooth",
            Self::Clipboard => "Clipboard",
            Self::PhotoAlbum => "PhotoAlbum",
        }
    }

    pub fn group(self) -> ApiGroup {
        match self {
            Self::UserLocation => ApiGroup::Location,
            Self::ChooseMedia => ApiGroup::Media,
            Self::Address | Self::Invoice | Self::UserInfo | Self::WeRun => ApiGroup::OpenAPI,
            Self::PhoneContact | Self::PhoneCalendar | Self::Camera | Self::Record | Self::Bluetooth | Self::Clipboard => {
                ApiGroup::Device
            }
            Self::PhotoAlbum => ApiGroup::Album,
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown entity category {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read lexicon {path}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid lexicon: {0}")]
    Invalid(#[from] serde_json::Error),
    #[error("unknown API {0}")]
    UnknownApi(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub entity_category: EntityCategory,
    pub group: ApiGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ApiCatalog {
    pub entries: BTreeMap<String, CatalogEntry>,
}

impl ApiCatalog {
    pub fn from_map(map: &BTreeMap<String, EntityCategory>) -> Self {
        let entries = map
            .iter()
            .map(|(api, &c)| (api.clone(), CatalogEntry { entity_category: c, group: c.group() }))
            .collect();
        Self { entries }
    }

    pub fn contains(&self, api: &str) -> bool {
        self.entries.contains_key(api)
    }

    pub fn category(&self, api: &str) -> Option<EntityCategory> {
        self.entries.get(api).map(|e| e.entity_category)
    }
}

pub fn map_api_to_entity(api: &str, catalog: &ApiCatalog) -> Result<EntityCategory, CatalogError> {
    catalog.category(api).ok_or_else(|| CatalogError::UnknownApi(api.to_string()))
}

/// Verb, controller-cue and entity-phrase tables plus the API catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    #[serde(default)]
    pub version: String,
    pub ssoc_verbs: Vec<String>,
    #[serde(default)]
    pub first_party_cues: Vec<String>,
    pub third_party_cues: Vec<String>,
    pub entities: BTreeMap<String, EntityCategory>,
    pub api_catalog: BTreeMap<String, EntityCategory>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_LEXICON).expect("built-in lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn catalog(&self) -> ApiCatalog {
        ApiCatalog::from_map(&self.api_catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_all_categories() {
        let lex = Lexicon::builtin();
        let cat = lex.catalog();
        for c in EntityCategory::ALL {
            assert!(cat.entries.values().any(|e| e.entity_category == c), "{c} has no API");
            assert!(lex.entities.values().any(|&e| e == c), "{c} has no phrase");
            assert_eq!(c.name().parse::<EntityCategory>().unwrap(), c);
        }
    }

    #[test]
    fn lookups() {
        let cat = Lexicon::builtin().catalog();
        assert_eq!(map_api_to_entity("wx.getLocation", &cat).unwrap(), EntityCategory::UserLocation);
        assert_eq!(map_api_to_entity("wx.saveImageToPhotosAlbum", &cat).unwrap(), EntityCategory::PhotoAlbum);
        assert!(matches!(map_api_to_entity("wx.fooBar", &cat), Err(CatalogError::UnknownApi(_))));
    }

    #[test]
    fn table_apis_present() {
        let cat = Lexicon::builtin().catalog();
        let table = [
            ("wx.chooseLocation", ApiGroup::Location),
            ("wx.getLocation", ApiGroup::Location),
            ("wx.onLocationChange", ApiGroup::Location),
            ("wx.startLocationUpdateBackground", ApiGroup::Location),
            ("wx.chooseImage", ApiGroup::Media),
            ("wx.chooseMedia", ApiGroup::Media),
            ("wx.chooseMessageFile", ApiGroup::Media),
            ("wx.chooseVideo", ApiGroup::Media),
            ("wx.chooseAddress", ApiGroup::OpenAPI),
            ("wx.chooseInvoiceTitle", ApiGroup::OpenAPI),
            ("wx.getUserInfo", ApiGroup::OpenAPI),
            ("wx.getUserProfile", ApiGroup::OpenAPI),
            ("wx.getWeRunData", ApiGroup::OpenAPI),
            ("wx.addPhoneContact", ApiGroup::Device),
            ("wx.createCameraContext", ApiGroup::Device),
            ("wx.createLivePusherContext", ApiGroup::Device),
            ("wx.getRecordManager", ApiGroup::Device),
            ("wx.openBluetoothAdapter", ApiGroup::Device),
            ("wx.saveImageToPhotosAlbum", ApiGroup::Album),
            ("wx.saveVideoToPhotoAlbum", ApiGroup::Album),
        ];
        for (api, group) in table {
            assert_eq!(cat.entries[api].group, group, "{api}");
        }
    }

    #[test]
    fn serde_name_matches_display() {
        let s = serde_json::to_string(&EntityCategory::ChooseMedia).unwrap();
        assert_eq!(s, "\"ChooseMedia/File\"");
    }
}
