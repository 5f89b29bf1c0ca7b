#pragma once

#include <string>
#include <vector>

namespace esfbma {

// Compact float formatting shared by every CSV/JSON writer so that identical
// runs produce identical bytes.
std::string format_double(double v);
std::string format_fixed(double v, int digits);

// Minimal CSV handling. Fields may not contain commas or quotes; unit ids and
// variable names are validated against valid_identifier() at ingest time,
// which keeps the format unambiguous.
std::vector<std::string> split_csv_line(const std::string& line);

// Identifiers: [A-Za-z0-9_.\-]+ (no spaces, no commas).
bool valid_identifier(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

std::string trim(const std::string& s);

}  // namespace esfbma
