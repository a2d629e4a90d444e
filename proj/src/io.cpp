#include "confsel/io.hpp"

#include "confsel/error.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace confsel::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ValidationError("unterminated quote on line " + std::to_string(line_no));
  fields.emplace_back(trim(cur));
  return fields;
}

}  // namespace

RawTable parse_csv(std::string_view text) {
  RawTable table;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_record(line, line_no);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      table.rows.push_back(std::move(fields));
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw ValidationError("CSV input is empty (no header row)");
  return table;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RawTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) eq = line.find(':');
    if (eq == std::string_view::npos)
      throw ValidationError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) throw ValidationError("duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

Schema parse_schema(std::string_view text) {
  Schema s;
  for (auto& [name, role] : parse_key_values(text)) {
    if (role == "treatment") {
      if (!s.treatment.empty()) throw ValidationError("schema declares two treatment columns");
      s.treatment = name;
    } else if (role == "outcome") {
      if (!s.outcome.empty()) throw ValidationError("schema declares two outcome columns");
      s.outcome = name;
    } else if (role == "potential0") {
      s.potential0 = name;
    } else if (role == "potential1") {
      s.potential1 = name;
    } else if (role == "ignore") {
      s.ignored.push_back(name);
    } else {
      s.covariates.push_back({name, VariableKind::parse(role)});
    }
  }
  if (s.treatment.empty()) throw ValidationError("schema declares no treatment column");
  if (s.outcome.empty()) throw ValidationError("schema declares no outcome column");
  return s;
}

Schema read_schema(const std::filesystem::path& path) { return parse_schema(read_text(path)); }

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string dataset_csv(const Dataset& ds) {
  std::string out;
  for (const auto& c : ds.columns()) out += c.name + ",";
  out += "T,Y";
  if (ds.potential()) out += ",Y0,Y1";
  out += "\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int k = 0; k < ds.p(); ++k) out += format_double(ds.x()(i, k)) + ",";
    out += std::to_string(ds.treatment()(i)) + "," + format_double(ds.outcome()(i));
    if (ds.potential())
      out += "," + format_double(ds.potential()->y0(i)) + "," + format_double(ds.potential()->y1(i));
    out += "\n";
  }
  return out;
}

std::string dataset_schema(const Dataset& ds) {
  std::string out;
  for (const auto& c : ds.columns()) out += c.name + " = " + c.kind.to_string() + "\n";
  out += "T = treatment\nY = outcome\n";
  if (ds.potential()) out += "Y0 = potential0\nY1 = potential1\n";
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ValidationError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ValidationError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace confsel::io
