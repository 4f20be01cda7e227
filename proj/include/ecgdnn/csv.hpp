#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecgdnn/labels.hpp"

namespace ecgdnn::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number of the row in its file
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column index by name; throws InputError when missing.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

/// Comma separated, double-quote escaping, first line is the header. Every
/// row must have as many fields as the header.
Table parse(std::istream& in, const std::string& source = "<stream>");
Table read(const std::filesystem::path& path);

std::string quote(std::string_view field);
void write_row(std::ostream& os, const std::vector<std::string>& fields);

/// Strict number parsing with row context in the error message.
double parse_double(const Row& row, std::size_t col, const std::string& source);
std::optional<double> parse_optional_double(const Row& row, std::size_t col,
                                            const std::string& source);
bool parse_bool(const Row& row, std::size_t col, const std::string& source);

/// exam_id plus one 0/1 column per class, named as in kClassNames.
struct LabelFile {
  std::vector<std::string> exam_ids;
  std::vector<LabelVector> labels;
};
LabelFile read_labels(const std::filesystem::path& path);
void write_labels(std::ostream& os, const LabelFile& file);

/// exam_id plus one probability column per class.
struct ScoreFile {
  std::vector<std::string> exam_ids;
  std::vector<std::array<double, kNumClasses>> scores;
};
ScoreFile read_scores(const std::filesystem::path& path);
void write_scores(std::ostream& os, const ScoreFile& file);

}  // namespace ecgdnn::csv
