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

#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace lsched {

// Minimal reader for the unquoted comma-separated files this project writes.
// Errors carry the 1-based line number of the offending row.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path);

  // Reads the header row and checks it matches `columns` exactly.
  void expect_header(std::initializer_list<const char*> columns);
  const std::vector<std::string>& header() const { return header_; }
  void read_header();

  // Next non-blank data row; false at end of file.
  bool next(std::vector<std::string>& row);

  int line() const { return line_; }
  [[noreturn]] void fail(const std::string& what) const;

  double parse_double(const std::string& field, const std::string& name) const;
  int64_t parse_int(const std::string& field, const std::string& name) const;

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  int line_ = 0;
};

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace lsched
