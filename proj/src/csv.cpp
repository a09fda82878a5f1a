/* Copyright 2026 The lsched Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lsched/csv.hpp"

#include <charconv>
#include <cstdlib>

#include "lsched/error.hpp"

namespace lsched {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw Error(ErrorKind::kIo, "cannot open " + path);
}

void CsvReader::read_header() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    header_ = split_csv_line(text);
    for (auto& h : header_) {
      while (!h.empty() && h.back() == ' ') h.pop_back();
      while (!h.empty() && h.front() == ' ') h.erase(h.begin());
    }
    return;
  }
  throw Error(ErrorKind::kParseError, path_ + ": missing header row");
}

void CsvReader::expect_header(std::initializer_list<const char*> columns) {
  read_header();
  std::vector<std::string> want(columns.begin(), columns.end());
  if (header_ != want) {
    std::string joined;
    for (const auto& c : want) joined += (joined.empty() ? "" : ",") + c;
    fail("expected header `" + joined + "`");
  }
}

bool CsvReader::next(std::vector<std::string>& row) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    row = split_csv_line(text);
    if (!header_.empty() && row.size() != header_.size()) {
      fail("expected " + std::to_string(header_.size()) + " fields, got " +
           std::to_string(row.size()));
    }
    return true;
  }
  return false;
}

void CsvReader::fail(const std::string& what) const {
  throw Error(ErrorKind::kParseError,
              path_ + ":" + std::to_string(line_) + ": " + what);
}

double CsvReader::parse_double(const std::string& field,
                               const std::string& name) const {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    fail("bad number for " + name + ": '" + field + "'");
  }
  return v;
}

int64_t CsvReader::parse_int(const std::string& field,
                             const std::string& name) const {
  int64_t v = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    fail("bad integer for " + name + ": '" + field + "'");
  }
  return v;
}

}  // namespace lsched
