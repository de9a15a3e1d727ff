#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fedkd/errors.hpp"

namespace fedkd::jsonio {

namespace detail {

// Locale-independent double formatting at 17 significant digits, enough to
// round-trip any IEEE double exactly.
inline void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline void dump_value(std::string& out, const nlohmann::ordered_json& j, int indent,
                       int depth) {
  const auto pad = [&](int d) {
    if (indent >= 0) {
      out.push_back('\n');
      out.append(static_cast<std::size_t>(indent) * static_cast<std::size_t>(d), ' ');
    }
  };
  switch (j.type()) {
    case nlohmann::ordered_json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out.push_back(',');
        first = false;
        pad(depth + 1);
        out += nlohmann::ordered_json(key).dump();
        out += indent >= 0 ? ": " : ":";
        dump_value(out, value, indent, depth + 1);
      }
      pad(depth);
      out.push_back('}');
      return;
    }
    case nlohmann::ordered_json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out.push_back('[');
      bool first = true;
      for (const auto& value : j) {
        if (!first) out.push_back(',');
        first = false;
        pad(depth + 1);
        dump_value(out, value, indent, depth + 1);
      }
      pad(depth);
      out.push_back(']');
      return;
    }
    case nlohmann::ordered_json::value_t::number_float:
      append_double(out, j.get<double>());
      return;
    default:
      out += j.dump();  // integers, strings, booleans, null
      return;
  }
}

}  // namespace detail

// Serialize with floats at 17 significant digits; indent < 0 means compact.
inline std::string dump(const nlohmann::ordered_json& j, int indent = -1) {
  std::string out;
  detail::dump_value(out, j, indent, 0);
  return out;
}

// Write-temp-then-rename so readers never observe a partial document.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fedkd::jsonio
