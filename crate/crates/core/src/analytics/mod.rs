//! Pure analytics over validated readings.

pub mod aggregate;
pub mod geo;
pub mod outliers;
pub mod similarity;
pub mod stats;

pub use aggregate::{
    aggregate_counts, binned_response, circadian_matrix, extremes, hourly_profile, moving_average, region_weekly_stats,
    temperature_distribution, top_n_daily_mean, BinVariable, BinnedResponse, ExtremeReport, Granularity, HourlyProfile,
};
pub use geo::{
    adjacency, adjacent_pairs, device_positions, haversine_km, heat_points, nearest_traps, unique_locations,
};
pub use outliers::{hourly_outliers, night_hours};
pub use similarity::{correlation_matrix, similarity_report, CorrelationMatrix, SimilarityReport};
pub use stats::{anova, five_number_summary, pearson, pearson_test, t_test, FiveNumberSummary, MeanStd};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no input rows")]
    EmptyInput,
    #[error("at least two groups are required")]
    TooFewGroups,
    #[error("group {group} has fewer than two observations")]
    TooFewObservations { group: usize },
    #[error("every group has zero within-group variance")]
    DegenerateGroups,
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("series is too short")]
    TooShort,
    #[error("no device-week exceeds the threshold")]
    NoQualifyingWeeks,
    #[error("hour {hour} has fewer than three readings")]
    InsufficientData { hour: u32 },
    #[error("the two devices share no reporting days")]
    NoCommonDays,
    #[error("{0}")]
    InvalidParameter(String),
}

impl AnalyticsError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalyticsError::EmptyInput => "empty_input",
            AnalyticsError::TooFewGroups => "too_few_groups",
            AnalyticsError::TooFewObservations { .. } => "too_few_observations",
            AnalyticsError::DegenerateGroups => "degenerate_groups",
            AnalyticsError::ZeroVariance => "zero_variance",
            AnalyticsError::TooShort => "too_short",
            AnalyticsError::NoQualifyingWeeks => "no_qualifying_weeks",
            AnalyticsError::InsufficientData { .. } => "insufficient_data",
            AnalyticsError::NoCommonDays => "no_common_days",
            AnalyticsError::InvalidParameter(_) => "invalid_parameter",
        }
    }
}
