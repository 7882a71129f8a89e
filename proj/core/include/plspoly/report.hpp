#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "plspoly/residual_poly.hpp"

namespace plspoly {

// Shortest text that reloads to the same double: 17 significant digits.
// Non-finite values print as nan/inf/-inf (callers that need JSON go
// through JsonWriter, which maps them to null).
std::string format_sig17(double v);

std::string json_escape(const std::string& s);

// Ordered JSON emitter: fields appear in call order, floats go through
// format_sig17, non-finite floats become null. The output depends only on
// the call sequence, so equal inputs produce byte-identical documents.
// Two-space indentation, no trailing newline.
class JsonWriter {
 public:
  void begin_object();
  void end_object();
  void begin_array();
  void end_array();
  void key(const std::string& name);
  void value(double v);
  void value(bool v);
  void value(const std::string& v);
  void value(const char* v);
  void value_size(std::size_t v);
  void null();
  void number_array(const std::vector<double>& values);

  const std::string& str() const { return buf_; }

 private:
  void item_prefix();

  std::string buf_;
  std::vector<char> stack_;  // '{' or '['
  bool needs_comma_ = false;
  bool key_pending_ = false;
};

// CSV rows: numbers through format_sig17, non-finite values become empty
// cells. Text cells pass through unquoted, so they must not contain commas,
// quotes, or newlines (report labels never do).
class CsvWriter {
 public:
  void cell(double v);
  void cell(const std::string& v);
  void cell(const char* v) { cell(std::string(v)); }
  void cell_size(std::size_t v);
  void end_row();

  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
  bool row_open_ = false;
};

// Weight table exports: one record per tuple, the 1-based descending
// indices plus the weight. CSV columns: tuple ("j1 j2 ... jk",
// space-separated) and weight.
std::string weight_table_csv(const WeightTable& table);
void weight_table_json(JsonWriter& w, const WeightTable& table);

}  // namespace plspoly
