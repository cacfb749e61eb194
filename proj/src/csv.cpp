#include "scorelab/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scorelab/error.hpp"

namespace scorelab {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

CsvSchema make_schema(std::string name, std::vector<std::pair<std::string, ColumnType>> cols) {
  CsvSchema s;
  s.name = std::move(name);
  for (auto& [col, type] : cols) {
    s.columns.push_back(col);
    s.types.push_back(type);
  }
  return s;
}

constexpr auto R = ColumnType::real;
constexpr auto I = ColumnType::integer;
constexpr auto T = ColumnType::text;

}  // namespace

const std::map<std::string, CsvSchema>& csv_schemas() {
  static const std::map<std::string, CsvSchema> schemas = [] {
    std::map<std::string, CsvSchema> m;
    auto put = [&](CsvSchema s) { m.emplace(s.name, std::move(s)); };
    put(make_schema("sweep", {{"d", I}, {"rho", R}, {"trials", I}, {"seed", I}, {"ln_tau", R}, {"median_signal", R}}));
    put(make_schema("scaling", {{"row_type", T}, {"d", I}, {"fwhm", R}, {"inv_sqrt_d", R}, {"slope", R},
                                {"intercept", R}, {"r_squared", R}}));
    put(make_schema("windows", {{"tau", R}, {"kappa_minus", R}, {"kappa_plus", R}, {"width", R}, {"I_hat", R},
                                {"log_lambda", R}, {"delta", R}, {"regime", T}, {"p", R}, {"eps_err", R},
                                {"rho", R}, {"Q", I}, {"zeta", R}, {"theta", R}, {"H", R}, {"C", R},
                                {"method", T}}));
    put(make_schema("audit", {{"tau", R}, {"regime", T}, {"decision", T}, {"J_estimate", R}, {"J_std_err", R},
                              {"theta", R}, {"statistic", T}, {"z", R}, {"value", R}, {"std_err", R},
                              {"bound", R}, {"samples", I}, {"seed", I}}));
    put(make_schema("coupling", {{"seed", I}, {"rate", R}, {"Q", I}, {"T_or_inf", T}, {"outputs_equal", I},
                                 {"a_set_hit_null", I}, {"a_set_hit_planted", I}}));
    put(make_schema("separation", {{"n", I}, {"rate", R}, {"zeta_gamma", R}, {"log_lambda", R},
                                   {"mass_coverage", R}, {"coverage_std_err", R}, {"overlap", R},
                                   {"overlap_std_err", R}, {"overlap_bound", R}, {"samples", I}, {"seed", I}}));
    put(make_schema("infochecks", {{"spec_hash", T}, {"codebook_hash", T}, {"tau", R}, {"quantity", T},
                                   {"value", R}, {"std_err", R}, {"samples", I}, {"seed", I}}));
    put(make_schema("probe", {{"x_hash", T}, {"tau", R}, {"logdensity", R}, {"score_norm", R}}));
    return m;
  }();
  return schemas;
}

const CsvSchema& csv_schema(const std::string& name) {
  const auto& all = csv_schemas();
  const auto it = all.find(name);
  if (it == all.end()) throw ConfigError("unknown CSV schema '" + name + "'");
  return it->second;
}

CsvWriter::CsvWriter(const CsvSchema& schema) : schema_(schema) {
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += schema.columns[i];
  }
  buffer_ += '\n';
}

void CsvWriter::separator() {
  if (fields_ >= schema_.columns.size()) throw std::logic_error("too many fields for schema " + schema_.name);
  if (fields_) buffer_ += ',';
  ++fields_;
}

CsvWriter& CsvWriter::add(double value) {
  separator();
  buffer_ += format_double(value);
  return *this;
}

CsvWriter& CsvWriter::add(std::int64_t value) {
  separator();
  buffer_ += std::to_string(value);
  return *this;
}

CsvWriter& CsvWriter::add(std::uint64_t value) {
  separator();
  buffer_ += std::to_string(value);
  return *this;
}

CsvWriter& CsvWriter::add(std::string_view text) {
  separator();
  buffer_ += text;
  return *this;
}

void CsvWriter::end_row() {
  if (fields_ != schema_.columns.size()) {
    throw std::logic_error("row has " + std::to_string(fields_) + " fields, schema " + schema_.name + " has " +
                           std::to_string(schema_.columns.size()));
  }
  buffer_ += '\n';
  fields_ = 0;
  ++rows_;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parses_as(const std::string& field, ColumnType type) {
  if (type == ColumnType::text) return !field.empty();
  if (type == ColumnType::integer) {
    long long v = 0;
    unsigned long long u = 0;
    const char* end = field.data() + field.size();
    auto r = std::from_chars(field.data(), end, v);
    if (r.ec == std::errc() && r.ptr == end) return true;
    auto ru = std::from_chars(field.data(), end, u);
    return ru.ec == std::errc() && ru.ptr == end;
  }
  if (field == "inf" || field == "-inf" || field == "nan") return true;
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto r = std::from_chars(field.data(), end, v);
  return r.ec == std::errc() && r.ptr == end;
}

}  // namespace

SchemaCheckResult check_csv_text(std::string_view text) {
  SchemaCheckResult result;
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) {
    result.message = "empty file";
    return result;
  }
  const auto columns = split_line(header);
  const CsvSchema* schema = nullptr;
  for (const auto& [name, s] : csv_schemas()) {
    if (s.columns == columns) schema = &s;
  }
  if (!schema) {
    result.message = "header matches no known schema: " + header;
    return result;
  }
  result.schema = schema->name;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_line(line);
    if (fields.size() != schema->columns.size()) {
      result.message = "line " + std::to_string(line_no) + ": expected " + std::to_string(schema->columns.size()) +
                       " fields, got " + std::to_string(fields.size());
      return result;
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      // Scaling rows leave the columns of the other row type empty.
      if (schema->name == "scaling" && i > 0 && fields[i].empty()) continue;
      if (!parses_as(fields[i], schema->types[i])) {
        result.message = "line " + std::to_string(line_no) + ": column '" + schema->columns[i] +
                         "' has invalid value '" + fields[i] + "'";
        return result;
      }
    }
    ++result.rows;
  }
  if (result.rows == 0) {
    result.message = "no data rows";
    return result;
  }
  result.ok = true;
  result.message = "ok";
  return result;
}

SchemaCheckResult check_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    SchemaCheckResult r;
    r.message = "cannot open " + path.string();
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return check_csv_text(buf.str());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace scorelab
