#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hts/evaluation.hpp"
#include "hts/grouping.hpp"

namespace hts {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws BadDate.
[[nodiscard]] Date parse_iso_date(const std::string& text);
[[nodiscard]] std::string format_iso_date(Date d);

struct SalesRecord {
    Date date;
    std::vector<std::string> attributes;  ///< schema order
    double quantity = 0.0;
};

struct CalendarConfig {
    Date start;
    std::chrono::weekday week_start = std::chrono::Sunday;
    std::optional<int> weeks;  ///< inferred from the data when absent

    /// First day of the week containing `start`.
    [[nodiscard]] Date origin() const;
    /// 0-based week bucket of `d`; negative when before the origin.
    [[nodiscard]] int week_of(Date d) const;
    [[nodiscard]] Date week_date(int week) const { return origin() + std::chrono::days(7 * week); }
};

struct JobConfig {
    AttributeSchema schema;
    std::vector<std::vector<std::string>> levels;
    CalendarConfig calendar;
    int period = 52;
    std::optional<std::size_t> train_weeks;
    std::optional<Date> train_end;
    int horizon = 4;
    TransformPolicy transform;
    SearchConfig search;
    std::vector<Method> methods{Method::Baseline, Method::BottomUp, Method::OLS, Method::WLS, Method::MinTShrink};
    std::uint64_t seed = 42;
    unsigned jobs = 1;

    /// Training length for a calendar of `weeks` periods.
    [[nodiscard]] std::size_t training_length(int weeks) const;
};

/// Validates and converts a JSON job document. Throws config errors.
[[nodiscard]] JobConfig parse_config(const nlohmann::json& doc);
[[nodiscard]] JobConfig load_config(const std::filesystem::path& path);
[[nodiscard]] nlohmann::json to_json(const JobConfig& config);

/// Reads `date, <schema attributes...>, quantity` rows (any column order,
/// extra columns ignored with a warning). Throws EmptyFile, MissingColumn,
/// BadDate, BadQuantity, KeyOutsideSchema.
[[nodiscard]] std::vector<SalesRecord> parse_sales_csv(const std::filesystem::path& path,
                                                       const AttributeSchema& schema);
[[nodiscard]] std::vector<SalesRecord> parse_sales_csv(std::istream& in, const AttributeSchema& schema);

/// Week-bucketed records plus the calendar length they imply.
struct Ingested {
    std::vector<Record> records;
    std::vector<SeriesKey> bottom_keys;  ///< distinct fully bound keys seen
    int weeks = 0;
};

[[nodiscard]] Ingested bucket_records(const std::vector<SalesRecord>& sales, const JobConfig& config);

/// Everything derived from ingesting one dataset under one config.
struct Dataset {
    GroupStructure structure;
    SummingMatrix S;
    std::vector<TimeSeries> series;  ///< structure order
    std::size_t records = 0;
    int weeks = 0;
};

[[nodiscard]] Dataset load_dataset(const JobConfig& config, const std::filesystem::path& data_path);
[[nodiscard]] Dataset build_dataset(const JobConfig& config, const std::vector<SalesRecord>& sales);

/// Bottom-level weekly sales sharing one seasonal signal. Deviations from the
/// shared signal carry a +/- sign pattern across attribute values so that they
/// cancel in every aggregate: aggregates are smooth, bottoms noisy.
/// Returns bottom x weeks, non-negative.
[[nodiscard]] Eigen::MatrixXd synthetic_bottom_sales(const AttributeSchema& schema,
                                                     const std::vector<SeriesKey>& bottom, int weeks, int period,
                                                     std::uint64_t seed);

/// Daily sales records realising synthetic_bottom_sales over the config calendar.
[[nodiscard]] std::vector<SalesRecord> synthetic_sales(const JobConfig& config, int weeks, std::uint64_t seed);

void write_sales_csv(const std::filesystem::path& path, const AttributeSchema& schema,
                     const std::vector<SalesRecord>& sales);

// Output bundle ------------------------------------------------------------

/// method, node, <attribute columns>, h1..hH, negative
void write_forecasts_csv(const std::filesystem::path& path, const GroupStructure& structure,
                         const std::vector<MethodOutput>& outputs);
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);
void write_residuals_csv(const std::filesystem::path& path, const GroupStructure& structure, const BaseRun& run);
/// qq.csv and acf.csv of the modelling-scale residuals of every node.
void write_residual_plots(const std::filesystem::path& dir, const GroupStructure& structure, const BaseRun& run,
                          int period);
[[nodiscard]] nlohmann::json diagnostics_json(const JobConfig& config, const Dataset& data, const BaseRun& run,
                                              const std::vector<MethodOutput>& outputs);

/// Reads forecasts.csv-shaped rows for one method into BaseForecasts ordered
/// like `structure`. Throws MissingColumn / KeyOutsideSchema / DimensionMismatch.
[[nodiscard]] BaseForecasts read_forecasts_csv(const std::filesystem::path& path, const GroupStructure& structure,
                                               const std::string& method = "Baseline");
[[nodiscard]] ResidualMatrix read_residuals_csv(const std::filesystem::path& path, const GroupStructure& structure);
/// Node keys listed in a forecasts.csv (first occurrence order).
[[nodiscard]] std::vector<SeriesKey> read_forecast_keys(const std::filesystem::path& path,
                                                        const AttributeSchema& schema);

/// Full holdout evaluation: writes forecasts.csv, report.csv,
/// diagnostics.json, qq.csv and acf.csv into `out_dir`.
JobResult run_evaluate(const JobConfig& config, const std::filesystem::path& data_path,
                       const std::filesystem::path& out_dir);

/// Forecasts beyond the last observed week: writes base_forecasts.csv,
/// residuals.csv, forecasts.csv (every configured method), diagnostics.json.
BaseRun run_forecast(const JobConfig& config, const std::filesystem::path& data_path,
                     const std::filesystem::path& out_dir);

/// Formats a double for CSV/JSON output deterministically; NaN becomes "NA".
[[nodiscard]] std::string format_number(double v);

}  // namespace hts
