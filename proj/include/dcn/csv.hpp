#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dcn/pool.hpp"

namespace dcn {

// Doubles rendered with %.17g so an f64 round-trips exactly and files are
// byte-stable for a fixed seed.
std::string format_double(double v);

// Comma/quote/newline fields get RFC-4180 quoting; everything else passes
// through untouched.
std::string csv_escape(const std::string& field);

// Header row plus data rows, newline-terminated.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Parsed rows including the header. Understands quoted fields; throws
// std::runtime_error on unbalanced quotes or unreadable files.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

// Strict numeric field parsers; throw std::runtime_error on junk.
double parse_double_field(const std::string& s);
int parse_int_field(const std::string& s);

// RoI lists travel as CSV with columns batch,x,y,w,h in feature-map pixels.
std::vector<Roi> read_rois(const std::string& path);
void write_rois(const std::string& path, const std::vector<Roi>& rois);

// Flat key=value run description, one pair per line, written next to a
// command's outputs.
void write_manifest(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace dcn
