#include "plspoly/report.hpp"

#include <cmath>
#include <cstdio>

#include "plspoly/errors.hpp"

namespace plspoly {

std::string format_sig17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

void JsonWriter::item_prefix() {
  if (key_pending_) {
    key_pending_ = false;
    return;  // value follows its key on the same line
  }
  if (needs_comma_) buf_ += ',';
  if (!stack_.empty()) {
    buf_ += '\n';
    buf_.append(2 * stack_.size(), ' ');
  }
}

void JsonWriter::begin_object() {
  item_prefix();
  buf_ += '{';
  stack_.push_back('{');
  needs_comma_ = false;
}

void JsonWriter::end_object() {
  stack_.pop_back();
  buf_ += '\n';
  buf_.append(2 * stack_.size(), ' ');
  buf_ += '}';
  needs_comma_ = true;
}

void JsonWriter::begin_array() {
  item_prefix();
  buf_ += '[';
  stack_.push_back('[');
  needs_comma_ = false;
}

void JsonWriter::end_array() {
  stack_.pop_back();
  buf_ += '\n';
  buf_.append(2 * stack_.size(), ' ');
  buf_ += ']';
  needs_comma_ = true;
}

void JsonWriter::key(const std::string& name) {
  if (needs_comma_) buf_ += ',';
  buf_ += '\n';
  buf_.append(2 * stack_.size(), ' ');
  buf_ += '"';
  buf_ += json_escape(name);
  buf_ += "\": ";
  needs_comma_ = false;
  key_pending_ = true;
}

void JsonWriter::value(double v) {
  item_prefix();
  if (std::isfinite(v))
    buf_ += format_sig17(v);
  else
    buf_ += "null";
  needs_comma_ = true;
}

void JsonWriter::value(bool v) {
  item_prefix();
  buf_ += v ? "true" : "false";
  needs_comma_ = true;
}

void JsonWriter::value(const std::string& v) {
  item_prefix();
  buf_ += '"';
  buf_ += json_escape(v);
  buf_ += '"';
  needs_comma_ = true;
}

void JsonWriter::value(const char* v) { value(std::string(v)); }

void JsonWriter::value_size(std::size_t v) {
  item_prefix();
  buf_ += std::to_string(v);
  needs_comma_ = true;
}

void JsonWriter::null() {
  item_prefix();
  buf_ += "null";
  needs_comma_ = true;
}

void JsonWriter::number_array(const std::vector<double>& values) {
  begin_array();
  for (double v : values) value(v);
  end_array();
}

void CsvWriter::cell(double v) {
  if (row_open_) buf_ += ',';
  if (std::isfinite(v)) buf_ += format_sig17(v);
  row_open_ = true;
}

void CsvWriter::cell(const std::string& v) {
  if (row_open_) buf_ += ',';
  buf_ += v;
  row_open_ = true;
}

void CsvWriter::cell_size(std::size_t v) {
  if (row_open_) buf_ += ',';
  buf_ += std::to_string(v);
  row_open_ = true;
}

void CsvWriter::end_row() {
  buf_ += '\n';
  row_open_ = false;
}

namespace {

std::string tuple_text(const WeightTable& table, std::size_t row) {
  std::string out;
  for (std::size_t c = 0; c < table.k; ++c) {
    if (c) out += ' ';
    out += std::to_string(table.tuple_data[row * table.k + c]);
  }
  return out;
}

}  // namespace

std::string weight_table_csv(const WeightTable& table) {
  CsvWriter w;
  w.cell("tuple");
  w.cell("weight");
  w.end_row();
  for (std::size_t row = 0; row < table.count; ++row) {
    w.cell(tuple_text(table, row));
    w.cell(table.weights[row]);
    w.end_row();
  }
  return w.str();
}

void weight_table_json(JsonWriter& w, const WeightTable& table) {
  w.begin_object();
  w.key("k");
  w.value_size(table.k);
  w.key("count");
  w.value_size(table.count);
  w.key("normalizer_log");
  w.value(table.normalizer_log);
  w.key("tuples");
  w.begin_array();
  for (std::size_t row = 0; row < table.count; ++row) {
    w.begin_object();
    w.key("tuple");
    w.value(tuple_text(table, row));
    w.key("weight");
    w.value(table.weights[row]);
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

}  // namespace plspoly
