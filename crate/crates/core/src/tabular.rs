//! Immutable tabular datasets, their declarative schemas, and deterministic
//! synthetic fixtures.
//!
//! A [`Dataset`] is a header-validated, type-coerced table loaded from a
//! comma-delimited file. Column descriptions travel with the schema because
//! every prompt the agents build is rendered from them.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("header mismatch at position {position}: expected `{expected}`, found `{found}`")]
    MissingColumn {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("row {row}: cannot read `{value}` as {kind} in column `{column}`")]
    TypeError {
        row: usize,
        column: String,
        value: String,
        kind: ValueKind,
    },
    #[error("file has no header row")]
    EmptyFile,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not textual")]
    NotTextual(String),
    #[error("invalid dataset number {0} (expected 1, 2 or 3)")]
    InvalidDatasetNumber(i64),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("schema config: {0}")]
    Config(String),
}

pub type Result<T, E = TabularError> = std::result::Result<T, E>;

/// Index of a dataset as the agents refer to it: 1 and 2 are the two
/// cadastres (earlier and later survey), 3 is the landmark table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct DatasetNumber(u8);

impl DatasetNumber {
    pub const FIRST: DatasetNumber = DatasetNumber(1);
    pub const SECOND: DatasetNumber = DatasetNumber(2);
    pub const LANDMARKS: DatasetNumber = DatasetNumber(3);

    pub fn new(n: i64) -> Result<Self> {
        match n {
            1..=3 => Ok(DatasetNumber(n as u8)),
            _ => Err(TabularError::InvalidDatasetNumber(n)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for DatasetNumber {
    type Error = TabularError;
    fn try_from(n: i64) -> Result<Self> {
        DatasetNumber::new(n)
    }
}

impl From<DatasetNumber> for u8 {
    fn from(n: DatasetNumber) -> u8 {
        n.0
    }
}

impl fmt::Display for DatasetNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Integer,
    Real,
    Text,
    Latitude,
    Longitude,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Integer => "integer",
            ValueKind::Real => "real",
            ValueKind::Text => "text",
            ValueKind::Latitude => "latitude",
            ValueKind::Longitude => "longitude",
        }
    }

    /// Storage class used when the table is materialized in SQL.
    pub fn sql_type(self) -> &'static str {
        match self {
            ValueKind::Integer => "integer",
            ValueKind::Text => "text",
            ValueKind::Real | ValueKind::Latitude | ValueKind::Longitude => "real",
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ValueKind::Text)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ValueKind,
    pub description: String,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, kind: ValueKind, description: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            kind,
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub table_name: String,
    pub columns: Vec<ColumnMeta>,
    pub primary_key: String,
}

impl TableSchema {
    pub fn new(
        table_name: impl Into<String>,
        columns: Vec<ColumnMeta>,
        primary_key: impl Into<String>,
    ) -> Result<Self> {
        let schema = TableSchema {
            table_name: table_name.into(),
            columns,
            primary_key: primary_key.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.table_name.trim().is_empty() {
            return Err(TabularError::Schema("empty table name".into()));
        }
        for (i, col) in self.columns.iter().enumerate() {
            if col.name.trim().is_empty() {
                return Err(TabularError::Schema(format!("column {i} has an empty name")));
            }
            if col.description.trim().is_empty() {
                return Err(TabularError::Schema(format!(
                    "column `{}` has an empty description",
                    col.name
                )));
            }
            if self.columns[..i].iter().any(|c| c.name == col.name) {
                return Err(TabularError::Schema(format!("duplicate column `{}`", col.name)));
            }
        }
        if self.column_index(&self.primary_key).is_none() {
            return Err(TabularError::Schema(format!(
                "primary key `{}` is not a column",
                self.primary_key
            )));
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    fn coerce(raw: &str, kind: ValueKind) -> Option<Value> {
        if kind == ValueKind::Text {
            return Some(if raw.is_empty() {
                Value::Null
            } else {
                Value::Text(raw.to_string())
            });
        }
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Some(Value::Null);
        }
        match kind {
            ValueKind::Integer => trimmed.parse().ok().map(Value::Int),
            _ => trimmed
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Real),
        }
    }

    fn to_cell(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(i) => i.to_string(),
            Value::Real(r) => r.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

/// A loaded table. Rows are stored positionally in schema column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    number: DatasetNumber,
    display_name: String,
    schema: TableSchema,
    rows: Vec<Vec<Value>>,
    source_path: Option<PathBuf>,
}

impl Dataset {
    pub fn from_rows(
        number: DatasetNumber,
        display_name: impl Into<String>,
        schema: TableSchema,
        rows: Vec<Vec<Value>>,
    ) -> Result<Self> {
        schema.validate()?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.columns.len() {
                return Err(TabularError::Schema(format!(
                    "row {} has {} cells, schema has {} columns",
                    i + 1,
                    row.len(),
                    schema.columns.len()
                )));
            }
            for (value, col) in row.iter().zip(&schema.columns) {
                let ok = match (value, col.kind) {
                    (Value::Null, _) => true,
                    (Value::Text(_), ValueKind::Text) => true,
                    (Value::Int(_), ValueKind::Integer) => true,
                    (Value::Real(_), k) => k.is_numeric() && k != ValueKind::Integer,
                    _ => false,
                };
                if !ok {
                    return Err(TabularError::TypeError {
                        row: i + 1,
                        column: col.name.clone(),
                        value: value.to_cell(),
                        kind: col.kind,
                    });
                }
            }
        }
        Ok(Dataset {
            number,
            display_name: display_name.into(),
            schema,
            rows,
            source_path: None,
        })
    }

    pub fn number(&self) -> DatasetNumber {
        self.number
    }

    pub fn display_name(&self) -> &str {
        &self.display_name
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    /// Same data under a different dataset number and name.
    pub fn relabel(mut self, number: DatasetNumber, display_name: impl Into<String>) -> Self {
        self.number = number;
        self.display_name = display_name.into();
        self
    }

    pub fn with_source_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn column_values(&self, column: &str) -> Result<impl Iterator<Item = &Value>> {
        let idx = self
            .schema
            .column_index(column)
            .ok_or_else(|| TabularError::UnknownColumn(column.to_string()))?;
        Ok(self.rows.iter().map(move |r| &r[idx]))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_to(&mut w)?;
        let bytes = w
            .into_inner()
            .map_err(|e| TabularError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::to_cell))?;
        }
        Ok(())
    }
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &TableSchema,
    number: DatasetNumber,
    display_name: &str,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let ds = parse_dataset(&text, schema, number, display_name)?;
    Ok(ds.with_source_path(path))
}

pub fn parse_dataset(
    text: &str,
    schema: &TableSchema,
    number: DatasetNumber,
    display_name: &str,
) -> Result<Dataset> {
    schema.validate()?;
    if text.trim().is_empty() {
        return Err(TabularError::EmptyFile);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let n = schema.columns.len().max(header.len());
    for position in 0..n {
        let expected = schema.columns.get(position).map(|c| c.name.as_str());
        let found = header.get(position);
        if expected != found {
            return Err(TabularError::MissingColumn {
                position,
                expected: expected.unwrap_or("<none>").to_string(),
                found: found.unwrap_or("<none>").to_string(),
            });
        }
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = schema
            .columns
            .iter()
            .zip(record.iter())
            .map(|(col, raw)| {
                Value::coerce(raw, col.kind).ok_or_else(|| TabularError::TypeError {
                    row: i + 1,
                    column: col.name.clone(),
                    value: raw.to_string(),
                    kind: col.kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Dataset::from_rows(number, display_name, schema.clone(), rows)
}

/// Lowercase, fold diacritics (canonical decomposition then mark removal),
/// trim, and collapse internal whitespace.
pub fn normalize_text(raw: &str) -> String {
    let folded: String = raw
        .to_lowercase()
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Schema config document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub datasets: Vec<DatasetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub number: DatasetNumber,
    pub name: String,
    pub table: String,
    pub primary_key: String,
    /// Data file, resolved against the dataset directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub columns: Vec<ColumnMeta>,
}

impl DatasetConfig {
    pub fn schema(&self) -> Result<TableSchema> {
        TableSchema::new(&self.table, self.columns.clone(), &self.primary_key)
    }

    pub fn from_schema(
        number: DatasetNumber,
        name: &str,
        schema: &TableSchema,
        file: Option<String>,
    ) -> Self {
        DatasetConfig {
            number,
            name: name.to_string(),
            table: schema.table_name.clone(),
            primary_key: schema.primary_key.clone(),
            file,
            columns: schema.columns.clone(),
        }
    }
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SchemaConfig =
            toml::from_str(text).map_err(|e| TabularError::Config(e.to_string()))?;
        for (i, d) in cfg.datasets.iter().enumerate() {
            d.schema()?;
            if cfg.datasets[..i].iter().any(|o| o.number == d.number) {
                return Err(TabularError::Config(format!(
                    "dataset number {} listed twice",
                    d.number
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("schema config serializes")
    }

    pub fn dataset(&self, number: DatasetNumber) -> Option<&DatasetConfig> {
        self.datasets.iter().find(|d| d.number == number)
    }

    /// Load every dataset that names a file, resolving paths against `dir`.
    pub fn load_all(&self, dir: impl AsRef<Path>) -> Result<Vec<Dataset>> {
        let dir = dir.as_ref();
        self.datasets
            .iter()
            .filter_map(|d| d.file.as_ref().map(|f| (d, dir.join(f))))
            .map(|(d, path)| load_dataset(&path, &d.schema()?, d.number, &d.name))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureProfile {
    /// The seven-column table used by the SQL browsing agent.
    Catastici,
    /// Building records with owners, professions and functions.
    Sommarioni,
    Landmarks,
}

impl std::str::FromStr for FixtureProfile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "catastici" => Ok(FixtureProfile::Catastici),
            "sommarioni" => Ok(FixtureProfile::Sommarioni),
            "landmarks" => Ok(FixtureProfile::Landmarks),
            other => Err(format!("unknown fixture profile `{other}`")),
        }
    }
}

/// Latitude/longitude box every generated coordinate falls into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

pub const FIXTURE_BBOX: BoundingBox = BoundingBox {
    min_lat: 45.425,
    max_lat: 45.450,
    min_lon: 12.300,
    max_lon: 12.370,
};

const FIRST_NAMES: &[&str] = &[
    "zuane", "francesco", "marin", "antonio", "iseppo", "domenico", "carlo", "piero", "anzolo",
    "nicolo", "lorenzo", "perina", "elena", "maria", "giacomo",
];
const FAMILY_NAMES: &[&str] = &[
    "gritti", "bernardo", "patarol", "mosto", "panizza", "michiel", "capello", "giustinian",
    "rissardi", "gallo", "contarini", "morosini", "venier", "loredan", "zen",
];
const PROPERTY_TYPES: &[&str] = &[
    "casa", "casa", "casa", "bottega", "bottega da casarol", "casa in soler", "altro appartamento",
    "magazen", "bottega da fabro", "casetta", "appartamento",
];
const LOCATIONS: &[&str] = &[
    "calle della torre",
    "calle delle carozze",
    "fondamenta san domenico",
    "corte de cà celsi",
    "rio terrà",
    "calle de franchi",
    "campiello della fraterna",
    "calle della malvasia",
    "sotto le collonelle",
    "corte carli",
];
const PROFESSIONS: &[&str] = &[
    "medico", "avocato", "avvocato", "procuratore", "fabro", "nodaro", "casarol", "mercante",
    "pistor",
];
const FUNCTIONS: &[&str] = &[
    "casa", "casa", "bottega", "appartamento", "magazzeno", "orto", "casa, bottega",
    "bottega, magazzeno", "casa, corte",
];
const PARISHES: &[&str] = &[
    "san polo", "san cassiano", "san moisè", "santa maria formosa", "san geremia", "san trovaso",
];
const DISTRICTS: &[&str] = &[
    "san polo", "san marco", "cannaregio", "castello", "dorsoduro", "santa croce",
];
const SAINTS: &[&str] = &[
    "san marco", "san polo", "santo stefano", "san zaccaria", "san giacomo", "santa margherita",
    "san bartolomeo", "santa maria della salute", "san trovaso", "sant'angelo",
];

impl FixtureProfile {
    pub fn default_number(self) -> DatasetNumber {
        match self {
            FixtureProfile::Catastici => DatasetNumber::FIRST,
            FixtureProfile::Sommarioni => DatasetNumber::SECOND,
            FixtureProfile::Landmarks => DatasetNumber::LANDMARKS,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FixtureProfile::Catastici => "Catastici 1740",
            FixtureProfile::Sommarioni => "Sommarioni 1808",
            FixtureProfile::Landmarks => "Landmarks",
        }
    }

    pub fn schema(self) -> TableSchema {
        use ValueKind::*;
        let (table, pk, cols): (&str, &str, Vec<ColumnMeta>) = match self {
            FixtureProfile::Catastici => (
                "catastici",
                "ID",
                vec![
                    ColumnMeta::new("ID", Integer, "Primary key"),
                    ColumnMeta::new("Owner_ID", Integer, "Unique ID of each owner of the property"),
                    ColumnMeta::new("Owner_First_Name", Text, "First name of the owner of the property"),
                    ColumnMeta::new("Owner_Family_Name", Text, "Family name of the owner of the property"),
                    ColumnMeta::new("Property_Type", Text, "Specific type of the property given in Italian"),
                    ColumnMeta::new(
                        "Rent_Income",
                        Integer,
                        "Rent price of the property that the owner receives as income, given in Venice ancient gold coin ducato",
                    ),
                    ColumnMeta::new(
                        "Property_Location",
                        Text,
                        "Ancient approximate toponym of the property given in Italian",
                    ),
                ],
            ),
            FixtureProfile::Sommarioni => (
                "buildings",
                "building_id",
                vec![
                    ColumnMeta::new("building_id", Integer, "Unique identifier of the building"),
                    ColumnMeta::new("owner_first_name", Text, "First name of the building owner"),
                    ColumnMeta::new("owner_family_name", Text, "Family name of the building owner"),
                    ColumnMeta::new("profession", Text, "Profession of the building owner, in Italian, often missing"),
                    ColumnMeta::new(
                        "building_functions",
                        Text,
                        "Comma-separated list of the functions the building is used for, in Italian",
                    ),
                    ColumnMeta::new("rent_price", Integer, "Rent price of the building in ducati"),
                    ColumnMeta::new("parish", Text, "Parish the building belongs to"),
                    ColumnMeta::new("district", Text, "District (sestiere) the building is located in"),
                    ColumnMeta::new("latitude", Latitude, "Latitude of the building"),
                    ColumnMeta::new("longitude", Longitude, "Longitude of the building"),
                ],
            ),
            FixtureProfile::Landmarks => (
                "landmarks",
                "landmark_id",
                vec![
                    ColumnMeta::new("landmark_id", Integer, "Unique identifier of the landmark"),
                    ColumnMeta::new("landmark_name", Text, "Name of the church or square"),
                    ColumnMeta::new("landmark_type", Text, "Type of the landmark, either \"church\" or \"square\""),
                    ColumnMeta::new("latitude", Latitude, "Latitude of the landmark"),
                    ColumnMeta::new("longitude", Longitude, "Longitude of the landmark"),
                ],
            ),
        };
        TableSchema::new(table, cols, pk).expect("built-in schema is valid")
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty list")
}

fn coordinate(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    // six decimals, like surveyed coordinates
    (rng.gen_range(lo..hi) * 1e6).round() / 1e6
}

/// Deterministic synthetic table for the given profile. Pure in its arguments.
pub fn generate_fixture(seed: u64, n_rows: usize, profile: FixtureProfile) -> Dataset {
    assert!(n_rows >= 1, "fixture needs at least one row");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = profile.schema();
    let b = FIXTURE_BBOX;

    let rows: Vec<Vec<Value>> = match profile {
        FixtureProfile::Catastici => {
            let n_owners = (n_rows / 3).max(1);
            let owners: Vec<(Option<&str>, &str)> = (0..n_owners)
                .map(|_| {
                    let first = if rng.gen_bool(0.05) {
                        None
                    } else {
                        Some(pick(&mut rng, FIRST_NAMES))
                    };
                    (first, pick(&mut rng, FAMILY_NAMES))
                })
                .collect();
            (0..n_rows)
                .map(|i| {
                    let owner = rng.gen_range(0..n_owners);
                    let (first, family) = owners[owner];
                    vec![
                        Value::Int(i as i64 + 1),
                        Value::Int(owner as i64 + 1),
                        first.map_or(Value::Null, |f| Value::Text(f.into())),
                        Value::Text(family.into()),
                        Value::Text(pick(&mut rng, PROPERTY_TYPES).into()),
                        Value::Int(rng.gen_range(2..=150)),
                        Value::Text(pick(&mut rng, LOCATIONS).into()),
                    ]
                })
                .collect()
        }
        FixtureProfile::Sommarioni => (0..n_rows)
            .map(|i| {
                let profession = if rng.gen_bool(0.6) {
                    Value::Null
                } else {
                    Value::Text(pick(&mut rng, PROFESSIONS).into())
                };
                let rent = if rng.gen_bool(0.05) {
                    Value::Null
                } else {
                    Value::Int(rng.gen_range(5..=400))
                };
                vec![
                    Value::Int(i as i64 + 1),
                    Value::Text(pick(&mut rng, FIRST_NAMES).into()),
                    Value::Text(pick(&mut rng, FAMILY_NAMES).into()),
                    profession,
                    Value::Text(pick(&mut rng, FUNCTIONS).into()),
                    rent,
                    Value::Text(pick(&mut rng, PARISHES).into()),
                    Value::Text(pick(&mut rng, DISTRICTS).into()),
                    Value::Real(coordinate(&mut rng, b.min_lat, b.max_lat)),
                    Value::Real(coordinate(&mut rng, b.min_lon, b.max_lon)),
                ]
            })
            .collect(),
        FixtureProfile::Landmarks => (0..n_rows)
            .map(|i| {
                let church = rng.gen_bool(0.5);
                let saint = pick(&mut rng, SAINTS);
                let name = if church {
                    format!("chiesa di {saint}")
                } else {
                    format!("campo {saint}")
                };
                vec![
                    Value::Int(i as i64 + 1),
                    Value::Text(name),
                    Value::Text(if church { "church" } else { "square" }.into()),
                    Value::Real(coordinate(&mut rng, b.min_lat, b.max_lat)),
                    Value::Real(coordinate(&mut rng, b.min_lon, b.max_lon)),
                ]
            })
            .collect(),
    };

    Dataset::from_rows(profile.default_number(), profile.display_name(), schema, rows)
        .expect("generated rows follow the schema")
}
