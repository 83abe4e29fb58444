//! Benchmark series: generation, loading, preprocessing and forecast splits.

mod mackey;
mod pianoroll;
mod series;

pub use mackey::{mackey_glass, MackeyGlass};
pub use pianoroll::{load_pianoroll, PianoRollDataset, NOTE_COLUMNS, PITCH_HIGH, PITCH_LOW};
pub use series::{
    fit_split_sizes, load_csv_series, make_forecast_dataset, moving_average, split_series,
    write_series_csv, ForecastPairs, MinMaxScaler, SeriesDataset, Split,
};
