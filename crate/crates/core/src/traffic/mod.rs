//! Device profiles, request streams, dataset ingestion and feature encoding.

mod dataset;
mod encoding;
mod generator;
mod profiles;
mod record;

pub use dataset::{
    load_dataset, read_dataset, write_dataset, Dataset, DatasetError, RowError, COLUMNS,
};
pub use encoding::{encode_features, EncodingBounds, EncodingError, Range, FEATURE_DIM};
pub use generator::{
    generate_stream, ArrivalProcess, MixFractions, TrafficError, TrafficMixConfig,
};
pub use profiles::{profile_table, DeviceProfile};
pub use record::{DeviceClass, LossRate, ParseFieldError, RequestRecord, Weather};
