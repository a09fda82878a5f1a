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
#include <map>
#include <string>
#include <vector>

namespace lsched {

// One audit row: `ts,event,src,dst,request_id,detail`. Timestamps are integer
// microseconds; -1 marks an unused id column. `detail` is `k=v;k=v`.
struct EventRecord {
  int64_t ts_us = 0;
  std::string event;
  int src = -1;
  int dst = -1;
  int64_t request_id = -1;
  std::string detail;
};

class EventLog {
 public:
  void add(int64_t ts_us, std::string event, int src, int dst,
           int64_t request_id, std::string detail = {});

  const std::vector<EventRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
  static EventLog read_csv(const std::string& path);
  static EventLog parse_csv(const std::string& text);

 private:
  std::vector<EventRecord> records_;
};

std::map<std::string, std::string> parse_detail(const std::string& detail);

// Builds `k=v;k=v` in insertion order.
class Detail {
 public:
  Detail& add(const std::string& key, const std::string& value);
  Detail& add(const std::string& key, int64_t value);
  Detail& add(const std::string& key, int value) {
    return add(key, static_cast<int64_t>(value));
  }
  // Shortest text that parses back to the same double.
  Detail& add_real(const std::string& key, double value);
  std::string str() const { return text_; }

 private:
  std::string text_;
};

std::string format_real(double value);

}  // namespace lsched
