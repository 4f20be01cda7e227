#include "ecgdnn/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ecgdnn::csv {

namespace {

[[noreturn]] void row_error(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ": row " + std::to_string(line) + ": " + what);
}

// Splits one logical record; quoted fields may span physical lines.
bool next_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line,
                 const std::string& source) {
  fields.clear();
  std::string physical;
  if (!std::getline(in, physical)) return false;
  ++line;
  const std::size_t start_line = line;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == physical.size()) {
      if (quoted) {
        if (!std::getline(in, physical)) row_error(source, start_line, "unterminated quoted field");
        ++line;
        field += '\n';
        i = 0;
        continue;
      }
      break;
    }
    const char ch = physical[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < physical.size() && physical[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"' && field.empty() && !field_was_quoted) {
      quoted = true;
      field_was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (ch == '\r' && i + 1 == physical.size()) {
      // tolerate CRLF
    } else {
      field += ch;
    }
    ++i;
  }
  fields.push_back(std::move(field));
  return true;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw InputError("missing column '" + std::string(name) + "'");
}

Table parse(std::istream& in, const std::string& source) {
  Table table;
  std::size_t line = 0;
  std::vector<std::string> fields;
  if (!next_record(in, fields, line, source)) return table;
  for (auto& f : fields) table.header.push_back(trim(f));
  if (!table.header.empty() && table.header[0].rfind("\xEF\xBB\xBF", 0) == 0)
    table.header[0].erase(0, 3);
  while (next_record(in, fields, line, source)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() != table.header.size())
      row_error(source, line,
                "expected " + std::to_string(table.header.size()) + " fields, got " +
                    std::to_string(fields.size()));
    table.rows.push_back(Row{line, fields});
  }
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return parse(in, path.string());
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << quote(fields[i]);
  }
  os << '\n';
}

std::optional<double> parse_optional_double(const Row& row, std::size_t col,
                                            const std::string& source) {
  const std::string s = trim(row.fields.at(col));
  if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
    row_error(source, row.line, "not a number: '" + s + "'");
  return value;
}

double parse_double(const Row& row, std::size_t col, const std::string& source) {
  auto v = parse_optional_double(row, col, source);
  if (!v) row_error(source, row.line, "missing value in column " + std::to_string(col + 1));
  return *v;
}

bool parse_bool(const Row& row, std::size_t col, const std::string& source) {
  const std::string s = trim(row.fields.at(col));
  if (s == "1" || s == "true" || s == "True") return true;
  if (s == "0" || s == "false" || s == "False") return false;
  row_error(source, row.line, "expected 0 or 1, got '" + s + "'");
}

LabelFile read_labels(const std::filesystem::path& path) {
  const auto table = read(path);
  const std::string source = path.string();
  LabelFile out;
  if (table.header.empty()) return out;
  const auto id = table.column("exam_id");
  std::array<std::size_t, kNumClasses> cols{};
  for (std::size_t c = 0; c < kNumClasses; ++c) cols[c] = table.column(kClassNames[c]);
  for (const auto& row : table.rows) {
    out.exam_ids.push_back(trim(row.fields[id]));
    LabelVector lv;
    for (std::size_t c = 0; c < kNumClasses; ++c) lv[c] = parse_bool(row, cols[c], source);
    out.labels.push_back(lv);
  }
  return out;
}

void write_labels(std::ostream& os, const LabelFile& file) {
  os << "exam_id";
  for (auto n : kClassNames) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < file.exam_ids.size(); ++i) {
    os << quote(file.exam_ids[i]);
    for (std::size_t c = 0; c < kNumClasses; ++c) os << ',' << (file.labels[i][c] ? 1 : 0);
    os << '\n';
  }
}

ScoreFile read_scores(const std::filesystem::path& path) {
  const auto table = read(path);
  const std::string source = path.string();
  ScoreFile out;
  if (table.header.empty()) return out;
  const auto id = table.column("exam_id");
  std::array<std::size_t, kNumClasses> cols{};
  for (std::size_t c = 0; c < kNumClasses; ++c) cols[c] = table.column(kClassNames[c]);
  for (const auto& row : table.rows) {
    out.exam_ids.push_back(trim(row.fields[id]));
    std::array<double, kNumClasses> s{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      s[c] = parse_double(row, cols[c], source);
      if (s[c] < 0.0 || s[c] > 1.0) row_error(source, row.line, "score outside [0, 1]");
    }
    out.scores.push_back(s);
  }
  return out;
}

void write_scores(std::ostream& os, const ScoreFile& file) {
  os << "exam_id";
  for (auto n : kClassNames) os << ',' << n;
  os << '\n';
  const auto precision = os.precision(9);
  for (std::size_t i = 0; i < file.exam_ids.size(); ++i) {
    os << quote(file.exam_ids[i]);
    for (double s : file.scores[i]) os << ',' << s;
    os << '\n';
  }
  os.precision(precision);
}

}  // namespace ecgdnn::csv
