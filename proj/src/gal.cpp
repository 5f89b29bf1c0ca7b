#include "esfbma/gal.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <vector>

#include "esfbma/errors.hpp"
#include "esfbma/io_util.hpp"

namespace esfbma {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail(int lineno, const std::string& what) {
  throw ValidationError("GAL line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

NeighborList parse_neighbor_file(const std::string& gal_text,
                                 const std::optional<std::string>& sidecar_csv) {
  std::istringstream in(gal_text);
  std::string line;
  int lineno = 0;

  auto next_line = [&](bool allow_eof) -> std::optional<std::string> {
    if (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (!allow_eof) fail(lineno, "unexpected end of file");
    return std::nullopt;
  };

  auto header = next_line(false);
  auto hfields = split_ws(*header);
  if (hfields.size() != 4 || hfields[0] != "0")
    fail(lineno, "malformed header, expected '0 <n> <dataset> <id-field>'");
  const long n = parse_long(hfields[1], "GAL header");
  if (n < 0) fail(lineno, "negative unit count");

  struct Record {
    std::string id;
    std::vector<std::string> neighbor_ids;
    int lineno;
  };
  std::vector<Record> records;
  records.reserve(n);
  for (long r = 0; r < n; ++r) {
    auto rec_line = next_line(false);
    auto rf = split_ws(*rec_line);
    if (rf.size() != 2)
      fail(lineno, "expected '<unit_id> <neighbor_count>'");
    Record rec;
    rec.id = rf[0];
    rec.lineno = lineno;
    const long count = parse_long(rf[1], "GAL record for " + rec.id);
    if (count < 0) fail(lineno, "negative neighbor count for " + rec.id);
    auto nbr_line = next_line(false);
    rec.neighbor_ids = split_ws(*nbr_line);
    if (static_cast<long>(rec.neighbor_ids.size()) != count)
      fail(lineno, "unit " + rec.id + " declares " + std::to_string(count) +
                       " neighbors but lists " +
                       std::to_string(rec.neighbor_ids.size()));
    records.push_back(std::move(rec));
  }
  while (auto rest = next_line(true)) {
    if (!trim(*rest).empty()) fail(lineno, "trailing content after records");
  }

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!index.emplace(records[i].id, static_cast<int>(i)).second)
      fail(records[i].lineno, "duplicate unit_id " + records[i].id);
  }

  NeighborList nl;
  nl.builder_tag = "queen-file";
  nl.unit_ids.reserve(records.size());
  for (const auto& r : records) nl.unit_ids.push_back(r.id);
  nl.entries.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const std::string& nid : records[i].neighbor_ids) {
      auto it = index.find(nid);
      if (it == index.end())
        fail(records[i].lineno, "unknown neighbor unit_id '" + nid + "'");
      nl.entries[i].push_back({it->second, 1.0});
    }
    std::sort(nl.entries[i].begin(), nl.entries[i].end(),
              [](const NeighborEntry& a, const NeighborEntry& b) {
                return a.index < b.index;
              });
  }

  if (sidecar_csv.has_value()) {
    std::istringstream sin(*sidecar_csv);
    std::string sline;
    if (!std::getline(sin, sline))
      throw ValidationError("weight sidecar: empty file");
    auto sh = split_csv_line(sline);
    if (sh.size() != 3 || trim(sh[0]) != "unit_id" ||
        trim(sh[1]) != "neighbor_id" || trim(sh[2]) != "weight_raw")
      throw ValidationError(
          "weight sidecar: expected header 'unit_id,neighbor_id,weight_raw'");
    int slineno = 1;
    while (std::getline(sin, sline)) {
      ++slineno;
      if (trim(sline).empty()) continue;
      auto f = split_csv_line(sline);
      if (f.size() != 3)
        throw ValidationError("weight sidecar line " +
                              std::to_string(slineno) + ": expected 3 fields");
      auto iu = index.find(trim(f[0]));
      auto iv = index.find(trim(f[1]));
      if (iu == index.end() || iv == index.end())
        throw ValidationError("weight sidecar line " +
                              std::to_string(slineno) + ": unknown unit_id");
      const double w = parse_double(
          f[2], "weight sidecar line " + std::to_string(slineno));
      if (!(w > 0.0))
        throw ValidationError("weight sidecar line " +
                              std::to_string(slineno) +
                              ": weight must be > 0");
      bool found = false;
      for (auto& e : nl.entries[iu->second]) {
        if (e.index == iv->second) {
          e.weight = w;
          found = true;
          break;
        }
      }
      if (!found)
        throw ValidationError("weight sidecar line " +
                              std::to_string(slineno) + ": pair " + f[0] +
                              "/" + f[1] + " is not a GAL link");
    }
  }

  nl.validate();
  return nl;
}

std::string serialize_neighbor_file(const NeighborList& nl,
                                    std::string* sidecar_csv_out,
                                    const std::string& dataset_name,
                                    const std::string& id_field) {
  nl.validate();
  std::string out = "0 " + std::to_string(nl.n()) + " " + dataset_name + " " +
                    id_field + "\n";
  std::string sidecar = "unit_id,neighbor_id,weight_raw\n";
  bool any_nonbinary = false;
  for (int i = 0; i < nl.n(); ++i) {
    out += nl.unit_ids[i] + " " + std::to_string(nl.entries[i].size()) + "\n";
    std::string row;
    for (const auto& e : nl.entries[i]) {
      if (!row.empty()) row += ' ';
      row += nl.unit_ids[e.index];
      if (e.weight != 1.0) {
        any_nonbinary = true;
        sidecar += nl.unit_ids[i] + "," + nl.unit_ids[e.index] + "," +
                   format_double(e.weight) + "\n";
      }
    }
    out += row + "\n";
  }
  if (any_nonbinary) {
    if (sidecar_csv_out == nullptr)
      throw ValidationError(
          "serialize_neighbor_file: list has non-binary weights, a sidecar "
          "output is required");
    *sidecar_csv_out = sidecar;
  } else if (sidecar_csv_out != nullptr) {
    sidecar_csv_out->clear();
  }
  return out;
}

}  // namespace esfbma
