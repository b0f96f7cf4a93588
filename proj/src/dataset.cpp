#include "netcausal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "netcausal/error.hpp"

namespace netcausal {

Dataset::Dataset(std::vector<VariableMeta> schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.empty()) throw InvalidInput("dataset has no variables");
  if (schema_.size() != columns_.size())
    throw InvalidInput("dataset has " + std::to_string(schema_.size()) + " names but " +
                       std::to_string(columns_.size()) + " columns");
  std::unordered_set<std::string> seen;
  for (const auto& meta : schema_) {
    if (meta.name.empty()) throw InvalidInput("variable name must be non-empty");
    if (!seen.insert(meta.name).second)
      throw InvalidInput("duplicate variable name '" + meta.name + "'");
  }
  const std::size_t n = columns_.front().size();
  if (n == 0) throw InvalidInput("dataset has zero rows");
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].size() != n)
      throw InvalidInput("column '" + schema_[j].name + "' has length " +
                         std::to_string(columns_[j].size()) + ", expected " + std::to_string(n));
    for (double v : columns_[j])
      if (!std::isfinite(v)) throw InvalidInput("column '" + schema_[j].name + "' holds a non-finite value");
  }
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  out.reserve(schema_.size());
  for (const auto& m : schema_) out.push_back(m.name);
  return out;
}

std::span<const double> Dataset::column(std::size_t index) const { return columns_.at(index); }

std::span<const double> Dataset::column(std::string_view name) const {
  return columns_[index_of(name)];
}

bool Dataset::contains(std::string_view name) const noexcept {
  return std::any_of(schema_.begin(), schema_.end(),
                     [&](const VariableMeta& m) { return m.name == name; });
}

std::size_t Dataset::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i)
    if (schema_[i].name == name) return i;
  throw InvalidInput("unknown variable '" + std::string(name) + "'");
}

Dataset Dataset::select(std::span<const std::string> names) const {
  std::vector<VariableMeta> schema;
  std::vector<std::vector<double>> columns;
  for (const auto& name : names) {
    const std::size_t i = index_of(name);
    schema.push_back(schema_[i]);
    columns.push_back(columns_[i]);
  }
  return Dataset(std::move(schema), std::move(columns));
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_real(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

}  // namespace

CsvLoad parse_csv(std::istream& in, const std::optional<std::vector<VariableMeta>>& schema) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto f : split_fields(line)) {
    if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
    header.emplace_back(f);
  }

  std::vector<VariableMeta> meta;
  if (schema) {
    bool match = schema->size() == header.size();
    for (std::size_t i = 0; match && i < header.size(); ++i) match = (*schema)[i].name == header[i];
    if (!match) throw InvalidInput("header does not match the expected schema");
    meta = *schema;
  } else {
    const auto& ftp = ftp_schema();
    for (const auto& name : header) {
      auto it = std::find_if(ftp.begin(), ftp.end(), [&](const VariableMeta& m) { return m.name == name; });
      meta.push_back(it != ftp.end() ? *it : VariableMeta{name, "", ""});
    }
  }

  std::vector<std::vector<double>> columns(header.size());
  std::size_t dropped = 0;
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    bool ok = fields.size() == header.size();
    for (std::size_t j = 0; ok && j < fields.size(); ++j) {
      const auto v = parse_real(fields[j]);
      if (!v) ok = false;
      else row[j] = *v;
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    for (std::size_t j = 0; j < row.size(); ++j) columns[j].push_back(row[j]);
  }
  if (columns.empty() || columns.front().empty()) throw InvalidInput("zero usable rows");
  return CsvLoad{Dataset(std::move(meta), std::move(columns)), dropped};
}

CsvLoad load_csv(const std::filesystem::path& path,
                 const std::optional<std::vector<VariableMeta>>& schema) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  return parse_csv(in, schema);
}

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& schema = data.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) out << (j ? "," : "") << schema[j].name;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j)
      out << (j ? "," : "") << format_real(data.column(j)[i]);
    out << '\n';
  }
}

const std::vector<VariableMeta>& ftp_schema() {
  static const std::vector<VariableMeta> schema{
      {"Dist", "km", "Distance between server and client"},
      {"T.O.D.", "s", "Time of day when the connection started"},
      {"Nbbytes", "MB", "Number of bytes sent by the server"},
      {"N.L.A.C.", "kbps", "Narrow link available capacity"},
      {"Nbhops", "units", "Number of hops between client and server"},
      {"RTT", "ms", "Round trip time"},
      {"BufferingDelay", "ms", "Part of the RTT due to queuing delay"},
      {"RetrScore", "dimensionless", "Fraction of retransmitted packets"},
      {"p", "dimensionless", "Fraction of retransmitted windows of packets"},
      {"T.O.R.", "dimensionless", "Fraction of retransmitted packets due to time-outs"},
      {"RWin", "kbytes", "Receiver window"},
      {"Tput", "kbps", "Throughput"},
  };
  return schema;
}

namespace {

struct Moments {
  double mean;
  double sd;
};

Moments sample_moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

std::vector<SummaryRow> summarize(const Dataset& data) {
  if (data.n() < 2) throw InvalidInput("summary needs at least 2 rows (variance undefined for n=1)");
  std::vector<SummaryRow> rows;
  for (std::size_t j = 0; j < data.num_variables(); ++j) {
    const auto col = data.column(j);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const auto m = sample_moments(col);
    SummaryRow row;
    row.variable = data.schema()[j].name;
    row.min = *lo;
    row.max = *hi;
    // Rounding in the sum can push the mean a hair past the extremes.
    row.avg = std::clamp(m.mean, row.min, row.max);
    if (m.sd == 0.0) row.coeff_var = 0.0;
    else row.coeff_var = m.sd / row.avg;
    rows.push_back(row);
  }
  return rows;
}

Dataset standardize(const Dataset& data) {
  if (data.n() < 2) throw InvalidInput("standardize needs at least 2 rows");
  std::vector<std::vector<double>> columns;
  for (std::size_t j = 0; j < data.num_variables(); ++j) {
    const auto col = data.column(j);
    const auto m = sample_moments(col);
    if (!(m.sd > 0.0))
      throw InvalidInput("column '" + data.schema()[j].name + "' has zero variance");
    std::vector<double> out(col.size());
    std::transform(col.begin(), col.end(), out.begin(),
                   [&](double v) { return (v - m.mean) / m.sd; });
    columns.push_back(std::move(out));
  }
  return Dataset(data.schema(), std::move(columns));
}

}  // namespace netcausal
