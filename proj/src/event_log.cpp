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

#include "lsched/event_log.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lsched/csv.hpp"
#include "lsched/error.hpp"

namespace lsched {

void EventLog::add(int64_t ts_us, std::string event, int src, int dst,
                   int64_t request_id, std::string detail) {
  records_.push_back(
      EventRecord{ts_us, std::move(event), src, dst, request_id, std::move(detail)});
}

std::string EventLog::to_csv() const {
  std::string out = "ts,event,src,dst,request_id,detail\n";
  out.reserve(records_.size() * 48);
  for (const auto& r : records_) {
    out += std::to_string(r.ts_us);
    out += ',';
    out += r.event;
    out += ',';
    out += std::to_string(r.src);
    out += ',';
    out += std::to_string(r.dst);
    out += ',';
    out += std::to_string(r.request_id);
    out += ',';
    out += r.detail;
    out += '\n';
  }
  return out;
}

void EventLog::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << to_csv();
}

EventLog EventLog::read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

EventLog EventLog::parse_csv(const std::string& text) {
  EventLog log;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::kParseError,
                "events csv line " + std::to_string(line_no) + ": " + what);
  };
  auto to_int = [&](const std::string& s, auto& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "ts,event,src,dst,request_id,detail") fail("unexpected header");
      continue;
    }
    if (line.empty()) continue;
    // detail may itself contain no commas; split into exactly six fields.
    std::vector<std::string> f;
    size_t start = 0;
    for (int k = 0; k < 5; ++k) {
      const size_t comma = line.find(',', start);
      if (comma == std::string::npos) fail("expected 6 fields");
      f.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    f.push_back(line.substr(start));
    EventRecord r;
    to_int(f[0], r.ts_us);
    r.event = f[1];
    to_int(f[2], r.src);
    to_int(f[3], r.dst);
    to_int(f[4], r.request_id);
    r.detail = f[5];
    log.records_.push_back(std::move(r));
  }
  if (line_no == 0) fail("empty file");
  return log;
}

std::map<std::string, std::string> parse_detail(const std::string& detail) {
  std::map<std::string, std::string> out;
  size_t start = 0;
  while (start < detail.size()) {
    size_t end = detail.find(';', start);
    if (end == std::string::npos) end = detail.size();
    const std::string item = detail.substr(start, end - start);
    const size_t eq = item.find('=');
    if (eq != std::string::npos) out[item.substr(0, eq)] = item.substr(eq + 1);
    start = end + 1;
  }
  return out;
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Detail& Detail::add(const std::string& key, const std::string& value) {
  if (!text_.empty()) text_ += ';';
  text_ += key;
  text_ += '=';
  text_ += value;
  return *this;
}

Detail& Detail::add(const std::string& key, int64_t value) {
  return add(key, std::to_string(value));
}

Detail& Detail::add_real(const std::string& key, double value) {
  return add(key, format_real(value));
}

}  // namespace lsched
