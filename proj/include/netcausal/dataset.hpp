#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace netcausal {

struct VariableMeta {
  std::string name;
  std::string unit;
  std::string description;
};

/// Column-oriented table of n finite samples over uniquely named variables.
///
/// Immutable once constructed; the constructor enforces equal column
/// lengths, n >= 1, unique non-empty names and finite entries.
class Dataset {
 public:
  Dataset(std::vector<VariableMeta> schema, std::vector<std::vector<double>> columns);

  std::size_t n() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t num_variables() const noexcept { return schema_.size(); }
  const std::vector<VariableMeta>& schema() const noexcept { return schema_; }
  std::vector<std::string> names() const;

  std::span<const double> column(std::size_t index) const;
  std::span<const double> column(std::string_view name) const;

  bool contains(std::string_view name) const noexcept;
  /// Throws InvalidInput naming the variable when absent.
  std::size_t index_of(std::string_view name) const;

  /// New dataset holding only `names`, in that order.
  Dataset select(std::span<const std::string> names) const;

 private:
  std::vector<VariableMeta> schema_;
  std::vector<std::vector<double>> columns_;
};

struct CsvLoad {
  Dataset data;
  std::size_t dropped_rows = 0;
};

/// Reads a comma-separated file with one header row. Rows with missing,
/// non-numeric or non-finite cells (or the wrong number of fields) are
/// dropped and counted. When `schema` is given, the header must list exactly
/// its names in order; otherwise headers matching the FTP roster pick up its
/// units and descriptions.
CsvLoad load_csv(const std::filesystem::path& path,
                 const std::optional<std::vector<VariableMeta>>& schema = std::nullopt);
CsvLoad parse_csv(std::istream& in,
                  const std::optional<std::vector<VariableMeta>>& schema = std::nullopt);

void write_csv(std::ostream& out, const Dataset& data);

/// Shortest decimal text that round-trips to the same double.
std::string format_real(double value);

/// The twelve FTP-transfer variables, in canonical column order.
const std::vector<VariableMeta>& ftp_schema();

struct SummaryRow {
  std::string variable;
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;
  double coeff_var = 0.0;  // sample sd / mean
};

/// One row per variable. Requires n >= 2.
std::vector<SummaryRow> summarize(const Dataset& data);

/// Centres every column and scales it to unit sample variance.
Dataset standardize(const Dataset& data);

}  // namespace netcausal
