#include "dcn/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcn {

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) io_fail("cannot open for writing", path);
  const auto emit = [&f](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) f << ',';
      f << csv_escape(fields[i]);
    }
    f << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  if (!f) io_fail("write failed", path);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) io_fail("cannot open", path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  const auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  const auto end_row = [&] {
    if (field_started || !row.empty()) {
      end_field();
      rows.push_back(row);
      row.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
      field_started = true;  // a comma opens the next field even if empty
    } else if (ch == '\n') {
      end_row();
    } else if (ch != '\r') {
      field += ch;
      field_started = true;
    }
  }
  if (quoted) io_fail("unterminated quote in CSV", path);
  end_row();
  return rows;
}

double parse_double_field(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error("trailing junk in number: '" + s + "'");
  return v;
}

int parse_int_field(const std::string& s) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("not an integer: '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error("trailing junk in integer: '" + s + "'");
  return v;
}

std::vector<Roi> read_rois(const std::string& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"batch", "x", "y", "w", "h"})
    throw std::runtime_error("RoI CSV must start with header batch,x,y,w,h: " + path);
  std::vector<Roi> rois;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 5)
      throw std::runtime_error("RoI CSV rows need 5 fields: " + path);
    Roi roi;
    roi.batch = parse_int_field(rows[r][0]);
    roi.p0.x = parse_double_field(rows[r][1]);
    roi.p0.y = parse_double_field(rows[r][2]);
    roi.w = parse_double_field(rows[r][3]);
    roi.h = parse_double_field(rows[r][4]);
    rois.push_back(roi);
  }
  return rois;
}

void write_rois(const std::string& path, const std::vector<Roi>& rois) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(rois.size());
  for (const Roi& r : rois)
    rows.push_back({std::to_string(r.batch), format_double(r.p0.x),
                    format_double(r.p0.y), format_double(r.w),
                    format_double(r.h)});
  write_csv(path, {"batch", "x", "y", "w", "h"}, rows);
}

void write_manifest(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream f(path, std::ios::binary);
  if (!f) io_fail("cannot open for writing", path);
  for (const auto& [key, value] : entries) f << key << '=' << value << '\n';
  if (!f) io_fail("write failed", path);
}

}  // namespace dcn
